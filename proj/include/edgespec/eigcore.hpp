#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "edgespec/error.hpp"

namespace edgespec {

using cplx = std::complex<double>;
using Vec = std::vector<double>;

// Symmetric tridiagonal matrix on a uniform grid.
// rowsum, when present, holds diag[i] + offdiag[i-1] + offdiag[i] computed
// without cancellation (the potential for a Schroedinger stencil). apply()
// then uses the difference form, which keeps residuals accurate when the
// Laplacian part is much larger than the eigenvalues of interest.
struct TridiagonalOperator {
    Vec diag;
    Vec offdiag;
    double spacing = 1.0;
    Vec rowsum;

    std::size_t size() const { return diag.size(); }

    void validate() const {
        require(diag.size() >= 2, "tridiagonal operator needs N >= 2");
        require(offdiag.size() + 1 == diag.size(), "offdiag must have length N-1");
        require(std::isfinite(spacing) && spacing > 0, "spacing must be positive");
        for (double d : diag) require(std::isfinite(d), "non-finite diagonal entry");
        for (double e : offdiag) require(std::isfinite(e), "non-finite off-diagonal entry");
        require(rowsum.empty() || rowsum.size() == diag.size(), "rowsum length mismatch");
    }

    double norm_inf() const {
        double m = 0;
        const std::size_t n = size();
        for (std::size_t i = 0; i < n; ++i) {
            double r = std::abs(diag[i]);
            if (i > 0) r += std::abs(offdiag[i - 1]);
            if (i + 1 < n) r += std::abs(offdiag[i]);
            m = std::max(m, r);
        }
        return m;
    }

    // y = (T - shift) x
    void apply(const Vec& x, Vec& y, double shift = 0.0) const {
        const std::size_t n = size();
        y.resize(n);
        if (rowsum.empty()) {
            for (std::size_t i = 0; i < n; ++i) {
                double s = (diag[i] - shift) * x[i];
                if (i > 0) s += offdiag[i - 1] * x[i - 1];
                if (i + 1 < n) s += offdiag[i] * x[i + 1];
                y[i] = s;
            }
            return;
        }
        for (std::size_t i = 0; i < n; ++i) {
            double s = (rowsum[i] - shift) * x[i];
            if (i > 0) s += offdiag[i - 1] * (x[i - 1] - x[i]);
            if (i + 1 < n) s += offdiag[i] * (x[i + 1] - x[i]);
            y[i] = s;
        }
    }

    Vec apply(const Vec& x, double shift = 0.0) const {
        Vec y;
        apply(x, y, shift);
        return y;
    }
};

inline double wdot(const Vec& a, const Vec& b, double spacing) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s * spacing;
}

inline double wnorm(const Vec& a, double spacing) { return std::sqrt(wdot(a, a, spacing)); }

// Number of eigenvalues strictly below x (Sturm sequence, LAPACK-style pivmin guard).
inline std::size_t sturm_count(const TridiagonalOperator& T, double x) {
    const std::size_t n = T.size();
    double emax = 1.0;
    for (double e : T.offdiag) emax = std::max(emax, e * e);
    const double pivmin = std::numeric_limits<double>::min() * emax;
    std::size_t cnt = 0;
    double q = T.diag[0] - x;
    if (std::abs(q) < pivmin) q = -pivmin;
    if (q < 0) ++cnt;
    for (std::size_t i = 1; i < n; ++i) {
        q = T.diag[i] - x - T.offdiag[i - 1] * T.offdiag[i - 1] / q;
        if (std::abs(q) < pivmin) q = -pivmin;
        if (q < 0) ++cnt;
    }
    return cnt;
}

inline std::pair<double, double> gershgorin(const TridiagonalOperator& T) {
    const std::size_t n = T.size();
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
        double r = 0;
        if (i > 0) r += std::abs(T.offdiag[i - 1]);
        if (i + 1 < n) r += std::abs(T.offdiag[i]);
        lo = std::min(lo, T.diag[i] - r);
        hi = std::max(hi, T.diag[i] + r);
    }
    double pad = 2 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi)) + 1e-300;
    return {lo - pad, hi + pad};
}

namespace detail {

// LU with partial pivoting of a shifted tridiagonal matrix (LAPACK gttrf/gtts2).
struct TridiagLU {
    Vec dl, d, du, du2;
    std::vector<char> swapped;

    TridiagLU(const TridiagonalOperator& T, double shift, double tiny) {
        const std::size_t n = T.size();
        d.resize(n);
        for (std::size_t i = 0; i < n; ++i) d[i] = T.diag[i] - shift;
        dl = T.offdiag;
        du = T.offdiag;
        du2.assign(n, 0.0);
        swapped.assign(n, 0);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (std::abs(d[i]) >= std::abs(dl[i])) {
                if (d[i] == 0) d[i] = tiny;
                double f = dl[i] / d[i];
                dl[i] = f;
                d[i + 1] -= f * du[i];
            } else {
                double f = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = f;
                double tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - f * d[i + 1];
                if (i + 2 < n) {
                    du2[i] = du[i + 1];
                    du[i + 1] = -f * du[i + 1];
                }
                swapped[i] = 1;
            }
        }
        if (d[n - 1] == 0) d[n - 1] = tiny;
    }

    void solve(Vec& b) const {
        const std::size_t n = d.size();
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (!swapped[i]) {
                b[i + 1] -= dl[i] * b[i];
            } else {
                double tmp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = tmp - dl[i] * b[i];
            }
        }
        b[n - 1] /= d[n - 1];
        if (n >= 2) b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
        for (std::size_t i = n - 2; i-- > 0;) b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
    }
};

// Deterministic start vectors (splitmix64).
inline Vec probe_vector(std::size_t n, std::uint64_t seed) {
    Vec v(n);
    std::uint64_t x = seed;
    for (auto& e : v) {
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        z ^= z >> 31;
        e = double(z >> 11) * 0x1.0p-53 - 0.5;
    }
    return v;
}

} // namespace detail

inline std::vector<double> tridiag_lowest(const TridiagonalOperator& T, std::size_t k) {
    T.validate();
    require(k >= 1 && k <= T.size(), "k out of range");
    auto [lo, hi] = gershgorin(T);
    std::vector<double> out;
    out.reserve(k);
    double left = lo;
    for (std::size_t j = 0; j < k; ++j) {
        double l = left, r = hi;
        for (int it = 0; it < 2200; ++it) {
            double mid = 0.5 * (l + r);
            if (mid <= l || mid >= r) break;
            if (sturm_count(T, mid) >= j + 1)
                r = mid;
            else
                l = mid;
        }
        out.push_back(0.5 * (l + r));
        left = l; // count(l) <= j <= j+1
    }
    return out;
}

// Rayleigh quotient <Tv,v>/<v,v>.
inline double rayleigh_quotient(const TridiagonalOperator& T, const Vec& v) {
    Vec tv = T.apply(v);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        num += tv[i] * v[i];
        den += v[i] * v[i];
    }
    return num / den;
}

// Inverse iteration. Normalized in the spacing-weighted norm, largest entry positive.
inline Vec tridiag_eigvec(const TridiagonalOperator& T, double lambda) {
    T.validate();
    require(std::isfinite(lambda), "non-finite eigenvalue estimate");
    const std::size_t n = T.size();
    const double tnorm = std::max(T.norm_inf(), std::numeric_limits<double>::min());
    const double tiny = std::numeric_limits<double>::epsilon() * tnorm;
    detail::TridiagLU lu(T, lambda, tiny);
    for (int restart = 0; restart < 4; ++restart) {
        Vec v = detail::probe_vector(n, 12345 + 977 * restart);
        for (int it = 0; it < 6; ++it) {
            lu.solve(v);
            double nrm = 0;
            for (double e : v) nrm = std::max(nrm, std::abs(e));
            if (!(nrm > 0) || !std::isfinite(nrm)) break;
            for (auto& e : v) e /= nrm;
        }
        double l2 = 0;
        for (double e : v) l2 += e * e;
        l2 = std::sqrt(l2);
        if (!(l2 > 0) || !std::isfinite(l2)) continue;
        for (auto& e : v) e /= l2;
        Vec r = T.apply(v, lambda);
        double rn = 0;
        for (double e : r) rn += e * e;
        rn = std::sqrt(rn);
        if (rn <= 1e-9 * tnorm) {
            std::size_t imax = 0;
            for (std::size_t i = 1; i < n; ++i)
                if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
            double s = (v[imax] < 0 ? -1.0 : 1.0) / std::sqrt(T.spacing);
            for (auto& e : v) e *= s;
            return v;
        }
    }
    throw NonConvergence("inverse iteration did not converge");
}

struct DeflatedSolution {
    Vec v;
    double residual = 0;      // ||(T-z)v - (w - <w,u>u)|| / ||w||
    double orthogonality = 0; // |<v,u>|
    int iterations = 0;
};

// Solves (T - z) v = w - <w,u>u with <v,u> = 0 by preconditioned CG on the
// complement of u. The preconditioner is (T - s)^{-1} with s below the spectrum,
// projected on both sides. Requires the deflated operator to be positive on the
// complement, i.e. z below every eigenvalue other than the deflated one.
inline DeflatedSolution deflated_solve(const TridiagonalOperator& T, double z, const Vec& u, const Vec& w,
                                       double tol = 1e-12, int max_iter = 2000) {
    T.validate();
    const std::size_t n = T.size();
    const double h = T.spacing;
    require(u.size() == n && w.size() == n, "deflated_solve: size mismatch");
    require(std::isfinite(z), "deflated_solve: non-finite z");
    require(std::abs(wnorm(u, h) - 1.0) < 1e-8, "deflated_solve: u must be normalized");

    const double lam_u = rayleigh_quotient(T, u);
    const double delta = 1e-10 * std::max(1.0, std::abs(z));
    long near = long(sturm_count(T, z + delta)) - long(sturm_count(T, z - delta));
    if (std::abs(lam_u - z) < delta) --near;
    if (near > 0) throw IllPosed("deflated_solve: z is within 1e-10 of a non-deflated eigenvalue");
    long below = long(sturm_count(T, z - delta)) - (lam_u < z - delta ? 1 : 0);
    if (below > 0) throw IllPosed("deflated_solve: deflated operator is indefinite at this z");

    auto project = [&](Vec& x) {
        double c = wdot(x, u, h);
        for (std::size_t i = 0; i < n; ++i) x[i] -= c * u[i];
    };

    const double lam1 = tridiag_lowest(T, 1)[0];
    const double s = std::min(z, lam1) - 1.0;
    const double tiny = std::numeric_limits<double>::epsilon() * T.norm_inf();
    detail::TridiagLU prec(T, s, tiny);
    auto precondition = [&](const Vec& r) {
        Vec y = r;
        project(y);
        prec.solve(y);
        project(y);
        return y;
    };

    Vec b = w;
    project(b);
    const double wn = wnorm(w, h);
    const double bn = wnorm(b, h);
    DeflatedSolution out;
    out.v.assign(n, 0.0);
    if (bn == 0) return out;

    Vec x(n, 0.0), r = b, y = precondition(r), p = y, ap;
    double ry = wdot(r, y, h);
    int it = 0;
    for (; it < max_iter; ++it) {
        T.apply(p, ap, z);
        project(ap);
        double pap = wdot(p, ap, h);
        if (!(pap > 0)) throw IllPosed("deflated_solve: loss of positivity in CG");
        double alpha = ry / pap;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if (wnorm(r, h) <= tol * bn) {
            ++it;
            break;
        }
        y = precondition(r);
        double ry_new = wdot(r, y, h);
        double beta = ry_new / ry;
        ry = ry_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = y[i] + beta * p[i];
    }
    project(x);
    Vec res = T.apply(x, z);
    for (std::size_t i = 0; i < n; ++i) res[i] -= b[i];
    out.v = std::move(x);
    out.residual = wnorm(res, h) / (wn > 0 ? wn : 1.0);
    out.orthogonality = std::abs(wdot(out.v, u, h));
    out.iterations = it;
    if (out.residual > 1e-8) throw NonConvergence("deflated_solve: residual " + std::to_string(out.residual));
    return out;
}

// Dense Hermitian matrix carrier.
struct HermitianMatrix {
    Eigen::MatrixXcd entries;

    explicit HermitianMatrix(Eigen::Index order = 0) : entries(Eigen::MatrixXcd::Zero(order, order)) {}
    explicit HermitianMatrix(Eigen::MatrixXcd m) : entries(std::move(m)) {}

    Eigen::Index order() const { return entries.rows(); }

    double hermiticity_residual() const {
        double scale = entries.cwiseAbs().maxCoeff();
        if (scale == 0) return 0;
        return (entries - entries.adjoint()).cwiseAbs().maxCoeff() / scale;
    }
};

struct DenseEigenResult {
    std::vector<double> values;
    Eigen::MatrixXcd vectors; // columns
};

inline DenseEigenResult dense_hermitian_eigensystem(const HermitianMatrix& M, Eigen::Index k) {
    require(M.entries.rows() == M.entries.cols() && M.order() >= 1, "matrix must be square");
    require(k >= 1 && k <= M.order(), "k out of range");
    require(M.entries.allFinite(), "non-finite matrix entry");
    require(M.hermiticity_residual() <= 1e-13, "matrix is not Hermitian");
    Eigen::MatrixXcd sym = 0.5 * (M.entries + M.entries.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(sym);
    if (es.info() != Eigen::Success) throw NonConvergence("dense Hermitian eigensolver failed");
    DenseEigenResult out;
    out.values.resize(std::size_t(k));
    for (Eigen::Index i = 0; i < k; ++i) out.values[std::size_t(i)] = es.eigenvalues()(i);
    out.vectors = es.eigenvectors().leftCols(k);
    return out;
}

inline std::vector<double> dense_hermitian_eigs(const HermitianMatrix& M, Eigen::Index k) {
    return dense_hermitian_eigensystem(M, k).values;
}

// Matrix-free Hermitian operator.
struct SparseHermitianOperator {
    Eigen::Index order = 0;
    std::function<void(const Eigen::VectorXcd&, Eigen::VectorXcd&)> apply;
    std::size_t nonzeros = 0; // structural estimate, informational

    Eigen::VectorXcd operator()(const Eigen::VectorXcd& x) const {
        Eigen::VectorXcd y(order);
        apply(x, y);
        return y;
    }
};

inline Eigen::VectorXcd random_complex_vector(Eigen::Index n, std::uint64_t seed) {
    Vec re = detail::probe_vector(std::size_t(n), seed);
    Vec im = detail::probe_vector(std::size_t(n), seed ^ 0x5bd1e995ULL);
    Eigen::VectorXcd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = cplx(re[std::size_t(i)], im[std::size_t(i)]);
    return v;
}

// max relative asymmetry |<Av,w> - conj(<Aw,v>)| over a few random probes
inline double hermiticity_probe(const SparseHermitianOperator& A, int probes = 3) {
    double worst = 0;
    for (int p = 0; p < probes; ++p) {
        Eigen::VectorXcd v = random_complex_vector(A.order, 101 + 2 * p);
        Eigen::VectorXcd w = random_complex_vector(A.order, 102 + 2 * p);
        cplx a = A(v).dot(w);
        cplx b = std::conj(A(w).dot(v));
        double scale = std::max(std::abs(a), A(v).norm() * w.norm());
        worst = std::max(worst, std::abs(a - b) / scale);
    }
    return worst;
}

struct LanczosOptions {
    int max_krylov = 400;
    int max_restarts = 5;
    std::uint64_t seed = 7;
};

struct LanczosResult {
    std::vector<double> values;
    std::vector<Eigen::VectorXcd> vectors;
    std::vector<double> residuals;
    bool converged = false;
    int iterations = 0;
};

// Lowest eigenpairs by Lanczos with full reorthogonalization. Converged Ritz
// pairs are locked and later cycles run orthogonal to them, which also
// recovers repeated eigenvalues. A cycle that finds nothing below the current
// k-th value ends the search.
inline LanczosResult lanczos_lowest(const SparseHermitianOperator& A, int k, double tol,
                                    const LanczosOptions& opt = {}) {
    require(A.order >= 1 && bool(A.apply), "operator not set");
    require(k >= 1 && k <= A.order, "k out of range");
    require(tol > 0, "tol must be positive");
    const Eigen::Index n = A.order;

    std::vector<Eigen::VectorXcd> locked;
    std::vector<double> locked_vals, locked_res;
    LanczosResult out;
    Eigen::VectorXcd restart_vec;
    bool search_done = false;

    auto orth_against = [](Eigen::VectorXcd& x, const std::vector<Eigen::VectorXcd>& basis) {
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis) x -= b * b.dot(x);
    };

    for (int cycle = 0; cycle <= opt.max_restarts + k && !search_done; ++cycle) {
        const Eigen::Index room = n - Eigen::Index(locked.size());
        if (room <= 0) break;
        Eigen::VectorXcd q = restart_vec.size() == n ? restart_vec : random_complex_vector(n, opt.seed + 31 * cycle);
        restart_vec.resize(0);
        orth_against(q, locked);
        if (q.norm() < 1e-12) q = random_complex_vector(n, opt.seed + 1000 + cycle), orth_against(q, locked);
        q.normalize();

        const int mmax = int(std::min<Eigen::Index>(room, opt.max_krylov));
        std::vector<Eigen::VectorXcd> V;
        std::vector<double> alpha, beta;
        V.push_back(q);
        Eigen::VectorXcd wv(n);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tes;
        int m = 0;
        bool invariant = false;
        const int want = k;
        for (int j = 0; j < mmax; ++j) {
            A.apply(V[j], wv);
            ++out.iterations;
            double a = V[j].dot(wv).real();
            alpha.push_back(a);
            for (int pass = 0; pass < 2; ++pass) {
                for (const auto& b : locked) wv -= b * b.dot(wv);
                for (const auto& b : V) wv -= b * b.dot(wv);
            }
            double b = wv.norm();
            m = j + 1;
            bool check = (m >= want && (m % 5 == 0 || m == mmax)) || b < 1e-14 * std::abs(a);
            if (check) {
                Eigen::VectorXd dd = Eigen::Map<Eigen::VectorXd>(alpha.data(), m);
                Eigen::VectorXd ee = m > 1 ? Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(beta.data(), m - 1))
                                           : Eigen::VectorXd();
                tes.computeFromTridiagonal(dd, ee, Eigen::ComputeEigenvectors);
                int nw = std::min(want, m);
                bool all = true;
                for (int i = 0; i < nw; ++i) {
                    double res = b * std::abs(tes.eigenvectors()(m - 1, i));
                    if (res > tol * std::max(1.0, std::abs(tes.eigenvalues()(i)))) all = false;
                }
                if (all || b < 1e-14 * std::max(1.0, std::abs(a))) {
                    invariant = b < 1e-14 * std::max(1.0, std::abs(a));
                    beta.push_back(b);
                    break;
                }
            }
            beta.push_back(b);
            if (j + 1 < mmax) V.push_back(wv / b);
        }
        Eigen::VectorXd dd = Eigen::Map<Eigen::VectorXd>(alpha.data(), m);
        Eigen::VectorXd ee = m > 1 ? Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(beta.data(), m - 1))
                                   : Eigen::VectorXd();
        tes.computeFromTridiagonal(dd, ee, Eigen::ComputeEigenvectors);
        const double blast = beta.back();

        double kth = std::numeric_limits<double>::infinity();
        if (int(locked_vals.size()) >= k) {
            std::vector<double> s = locked_vals;
            std::sort(s.begin(), s.end());
            kth = s[std::size_t(k - 1)];
        }
        int newly = 0;
        Eigen::VectorXcd unconverged = Eigen::VectorXcd::Zero(n);
        bool any_unconverged = false;
        for (int i = 0; i < std::min(k, m); ++i) {
            double theta = tes.eigenvalues()(i);
            double res = invariant ? 0.0 : blast * std::abs(tes.eigenvectors()(m - 1, i));
            Eigen::VectorXcd y = Eigen::VectorXcd::Zero(n);
            for (int j = 0; j < m; ++j) y += V[std::size_t(j)] * tes.eigenvectors()(j, i);
            if (res <= tol * std::max(1.0, std::abs(theta))) {
                if (theta < kth - tol * std::max(1.0, std::abs(theta))) {
                    orth_against(y, locked);
                    y.normalize();
                    locked.push_back(y);
                    locked_vals.push_back(theta);
                    locked_res.push_back(res);
                    ++newly;
                }
            } else {
                unconverged += y;
                any_unconverged = true;
            }
        }
        if (any_unconverged) restart_vec = unconverged;
        if (newly == 0 && !any_unconverged && int(locked_vals.size()) >= k) search_done = true;
    }

    std::vector<std::size_t> idx(locked_vals.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return locked_vals[i] < locked_vals[j]; });
    for (std::size_t i = 0; i < idx.size() && int(i) < k; ++i) {
        out.values.push_back(locked_vals[idx[i]]);
        out.vectors.push_back(locked[idx[i]]);
        out.residuals.push_back(locked_res[idx[i]]);
    }
    out.converged = int(out.values.size()) == k && search_done;
    return out;
}

} // namespace edgespec
