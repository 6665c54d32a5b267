#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "edgespec/band.hpp"
#include "edgespec/eigcore.hpp"
#include "edgespec/geometry.hpp"

namespace edgespec {

// Smooth even cutoff: 1 on [-1, 1], 0 outside (-2, 2), with S(u) = 1/(1 + e^{1/u - 1/(1-u)})
// as the transition. Returns c(x), c'(x), c''(x).
struct CutoffJet {
    double c, dc, ddc;
};

inline CutoffJet cutoff(double x) {
    const double u = std::abs(x) - 1;
    if (u <= 0) return {1, 0, 0};
    if (u >= 1) return {0, 0, 0};
    const double q = 1 / u - 1 / (1 - u);
    if (q > 700) return {1, 0, 0};
    if (q < -700) return {0, 0, 0};
    const double S = 1 / (1 + std::exp(q));
    const double q1 = -1 / (u * u) - 1 / ((1 - u) * (1 - u));
    const double q2 = 2 / (u * u * u) - 2 / ((1 - u) * (1 - u) * (1 - u));
    const double S1 = -S * (1 - S) * q1;
    const double S2 = -(S1 * (1 - 2 * S) * q1 + S * (1 - S) * q2);
    const double sgn = x > 0 ? 1.0 : -1.0;
    return {1 - S, -sgn * S1, -S2};
}

// sup_x x c(x), used for the Jacobian bound.
inline double cutoff_reach() {
    double best = 1;
    for (int i = 0; i <= 2000; ++i) {
        double x = 1 + i / 2000.0;
        best = std::max(best, x * cutoff(x).c);
    }
    return best;
}

struct StripOperatorSpec {
    double a = -0.5;
    double hbar = 0.1;
    double theta = 0;
    double eta = 0.25;
    double L = M_PI;
    double sigma_centre = 0;      // mode window centred at hbar pi m / L + theta ~ sigma_centre
    int n_modes = 16;             // Ns = 2 n_modes + 1 collocation points in s
    std::vector<double> k;        // curvature at s_i = -L + 2L i / Ns
    TransverseGrid grid_t;

    int Ns() const { return 2 * n_modes + 1; }
    double mu() const { return std::pow(hbar, 2 * eta); }
    double s(int i) const { return -L + 2 * L * double(i) / double(Ns()); }

    double jacobian_bound() const {
        double kmax = 0;
        for (double x : k) kmax = std::max(kmax, std::abs(x));
        return hbar * kmax * cutoff_reach() / mu();
    }

    void validate() const {
        require(a >= -1 && a < 0, "strip: a must lie in [-1, 0)");
        require(hbar > 0 && std::isfinite(theta), "strip: need hbar > 0 and finite theta");
        require(eta > 0 && eta < 0.5, "strip: eta must lie in (0, 1/2)");
        require(n_modes >= 1 && int(k.size()) == Ns(), "strip: curvature samples must match the s-grid");
        require(L > 0, "strip: L must be positive");
        grid_t.validate();
        require(jacobian_bound() < 0.5, "strip: Jacobian bound violated (hbar sup|t c| sup|k| >= 1/2); lower eta or hbar");
        require(window_reach() <= 1.0, "strip: mode window puts wells in the cutoff transition zone; lower n_modes");
    }

    // Wells of the outermost modes sit at t = xi and t = xi / a; keep them where c(mu t) = 1.
    double xi_max() const {
        const double step = hbar * M_PI / L;
        const double mc = std::round((sigma_centre - theta) / step);
        return step * (mc + n_modes) + theta;
    }
    double window_reach() const { return mu() * std::max(0.0, xi_max()) / std::min(1.0, std::abs(a)); }
};

// Largest eta (in steps of 0.01, at most 1/4) meeting the Jacobian bound.
inline double admissible_eta(double hbar, double kmax) {
    const double reach = cutoff_reach();
    for (double eta = 0.25; eta > 0.005; eta -= 0.01)
        if (hbar * kmax * reach / std::pow(hbar, 2 * eta) < 0.5) return eta;
    throw InvalidInput("strip: no admissible eta for this hbar and curvature");
}

inline StripOperatorSpec strip_spec(const BandMinimum& bm, double hbar, const CurveGeometry& geom, double theta,
                                    int n_modes, const TransverseGrid& grid_t, double eta = 0) {
    StripOperatorSpec sp;
    sp.a = bm.a;
    sp.sigma_centre = bm.sigma_a;
    sp.hbar = hbar;
    sp.theta = theta;
    sp.L = geom.L;
    sp.n_modes = n_modes;
    sp.grid_t = grid_t;
    double kmax = 0;
    for (double k : geom.k_samples) kmax = std::max(kmax, std::abs(k));
    sp.eta = eta > 0 ? eta : admissible_eta(hbar, kmax);
    if (n_modes <= 0) {
        // widest window (up to 48 modes per side) that passes the well check
        sp.n_modes = 48;
        while (sp.n_modes > 1 && sp.window_reach() > 1.0) --sp.n_modes;
    }
    sp.k.resize(std::size_t(sp.Ns()));
    for (int i = 0; i < sp.Ns(); ++i) sp.k[std::size_t(i)] = geom.curvature_at(sp.s(i));
    sp.validate();
    return sp;
}

// Discretization of
//   -d_t^2 - (d_t m)^2/(4m^2) + d_t^2 m/(2m) + (m^{-1/2} T m^{-1/2})^2,
//   T = hbar D_s + theta - b t + hbar c(mu t) (k/2) b t^2,  m = 1 - hbar c(mu t) t k,
// by collocation in s (Fourier modes m_c - n .. m_c + n) and finite differences in t.
// Vectors are Ns x Nt column-major (s fastest).
class StripOperator {
  public:
    explicit StripOperator(StripOperatorSpec spec) : sp_(std::move(spec)) {
        sp_.validate();
        Ns_ = sp_.Ns();
        Nt_ = Eigen::Index(sp_.grid_t.N) - 2;
        h_ = sp_.grid_t.spacing;
        m_center_ = std::llround((sp_.sigma_centre - sp_.theta) * sp_.L / (M_PI * sp_.hbar));
        build();
    }

    const StripOperatorSpec& spec() const { return sp_; }
    Eigen::Index order() const { return Ns_ * Nt_; }
    Eigen::Index Ns() const { return Ns_; }
    Eigen::Index Nt() const { return Nt_; }
    double xi(Eigen::Index p) const { return xi_(p); }
    double t(Eigen::Index j) const { return sp_.grid_t.t(std::size_t(j + 1)); }

    void apply(const Eigen::VectorXcd& x, Eigen::VectorXcd& y) const {
        Eigen::Map<const Eigen::MatrixXcd> X(x.data(), Ns_, Nt_);
        y.resize(order());
        Eigen::Map<Eigen::MatrixXcd> Y(y.data(), Ns_, Nt_);
        Eigen::MatrixXcd S1 = applyS(X);
        Y = applyS(S1);
        const double inv = 1 / (h_ * h_);
        for (Eigen::Index j = 0; j < Nt_; ++j) {
            Y.col(j) += (2 * inv) * X.col(j) + W_.col(j).cwiseProduct(X.col(j));
            if (j > 0) Y.col(j) -= inv * X.col(j - 1);
            if (j + 1 < Nt_) Y.col(j) -= inv * X.col(j + 1);
        }
    }

    SparseHermitianOperator as_operator() const {
        SparseHermitianOperator A;
        A.order = order();
        A.nonzeros = std::size_t(Ns_ * Ns_ * Nt_ * 2 + 3 * Ns_ * Nt_);
        A.apply = [this](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) { apply(x, y); };
        return A;
    }

    // Lowest eigenvalue of the k = 0 operator, block-diagonal over the s-modes.
    double flat_lowest() const {
        double best = INFINITY;
        for (Eigen::Index p = 0; p < Ns_; ++p) best = std::min(best, tridiag_lowest(flat_block(p), 1)[0]);
        return best;
    }

    TridiagonalOperator flat_block(Eigen::Index p) const {
        return assemble_transverse(sp_.a, xi_(p), sp_.grid_t);
    }

    // (A0 - shift)^{-1} with A0 the flat operator, applied mode by mode.
    struct FlatInverse {
        const StripOperator* op;
        std::vector<detail::TridiagLU> lu;

        void operator()(const Eigen::VectorXcd& r, Eigen::VectorXcd& z) const {
            const Eigen::Index Ns = op->Ns_, Nt = op->Nt_;
            Eigen::Map<const Eigen::MatrixXcd> R(r.data(), Ns, Nt);
            Eigen::MatrixXcd H = op->U_.adjoint() * R;
            const auto nt = std::size_t(Nt);
            Vec re(nt), im(nt);
            for (Eigen::Index p = 0; p < Ns; ++p) {
                for (Eigen::Index j = 0; j < Nt; ++j) re[std::size_t(j)] = H(p, j).real(), im[std::size_t(j)] = H(p, j).imag();
                lu[std::size_t(p)].solve(re);
                lu[std::size_t(p)].solve(im);
                for (Eigen::Index j = 0; j < Nt; ++j) H(p, j) = cplx(re[std::size_t(j)], im[std::size_t(j)]);
            }
            z.resize(r.size());
            Eigen::Map<Eigen::MatrixXcd>(z.data(), Ns, Nt) = op->U_ * H;
        }
    };

    FlatInverse flat_inverse(double shift) const {
        FlatInverse f{this, {}};
        for (Eigen::Index p = 0; p < Ns_; ++p) {
            auto T = flat_block(p);
            f.lu.emplace_back(T, shift, std::numeric_limits<double>::epsilon() * T.norm_inf());
        }
        return f;
    }

    // fraction of |v|^2 on |t| > t0
    double tail_mass(const Eigen::VectorXcd& v, double t0) const {
        Eigen::Map<const Eigen::MatrixXcd> V(v.data(), Ns_, Nt_);
        double tail = 0;
        for (Eigen::Index j = 0; j < Nt_; ++j)
            if (std::abs(t(j)) > t0) tail += V.col(j).squaredNorm();
        return tail / v.squaredNorm();
    }

    // fraction of |v|^2 on the two outermost s-modes per side
    double mode_edge_mass(const Eigen::VectorXcd& v) const {
        Eigen::Map<const Eigen::MatrixXcd> V(v.data(), Ns_, Nt_);
        Eigen::MatrixXcd H = U_.adjoint() * V;
        double e = 0;
        const Eigen::Index w = std::min<Eigen::Index>(2, Ns_ / 2);
        for (Eigen::Index p = 0; p < w; ++p) e += H.row(p).squaredNorm() + H.row(Ns_ - 1 - p).squaredNorm();
        return e / v.squaredNorm();
    }

  private:
    void build() {
        const double hb = sp_.hbar, mu = sp_.mu();
        xi_.resize(Ns_);
        U_.resize(Ns_, Ns_);
        for (Eigen::Index p = 0; p < Ns_; ++p) {
            long long m = m_center_ - sp_.n_modes + p;
            xi_(p) = hb * M_PI * double(m) / sp_.L + sp_.theta;
            for (Eigen::Index i = 0; i < Ns_; ++i)
                U_(i, p) = std::polar(1.0 / std::sqrt(double(Ns_)), M_PI * double(m) * sp_.s(int(i)) / sp_.L);
        }
        D_ = U_ * xi_.asDiagonal() * U_.adjoint();
        D_ = (0.5 * (D_ + D_.adjoint())).eval();

        minvh_.resize(Ns_, Nt_);
        mult_.resize(Ns_, Nt_);
        W_.resize(Ns_, Nt_);
        for (Eigen::Index j = 0; j < Nt_; ++j) {
            const double tt = t(j), b = step_field(sp_.a, tt);
            const auto cj = cutoff(mu * tt);
            const double g = cj.c + mu * tt * cj.dc;               // d/dt [c(mu t) t]
            const double gg = 2 * mu * cj.dc + mu * mu * tt * cj.ddc; // d^2/dt^2 [c(mu t) t]
            for (Eigen::Index i = 0; i < Ns_; ++i) {
                const double k = sp_.k[std::size_t(i)];
                const double m = 1 - hb * cj.c * tt * k;
                const double dm = -hb * k * g, ddm = -hb * k * gg;
                minvh_(i, j) = 1 / std::sqrt(m);
                mult_(i, j) = -b * tt + hb * cj.c * 0.5 * k * b * tt * tt;
                W_(i, j) = -dm * dm / (4 * m * m) + ddm / (2 * m);
            }
        }
    }

    Eigen::MatrixXcd applyS(const Eigen::MatrixXcd& X) const {
        Eigen::MatrixXcd Z = X.cwiseProduct(minvh_);
        Eigen::MatrixXcd Y = D_ * Z;
        Y += Z.cwiseProduct(mult_);
        return Y.cwiseProduct(minvh_);
    }

    StripOperatorSpec sp_;
    Eigen::Index Ns_ = 0, Nt_ = 0;
    double h_ = 0;
    long long m_center_ = 0;
    Eigen::VectorXd xi_;
    Eigen::MatrixXcd U_, D_;
    Eigen::MatrixXd minvh_, mult_, W_;
};

inline StripOperator assemble_strip(const StripOperatorSpec& spec) { return StripOperator(spec); }

struct StripSpectrum {
    std::vector<double> eigenvalues;
    std::vector<double> residuals;   // ||A v - lambda v|| / ||v||
    std::vector<double> tail_mass;   // |t| > 8
    std::vector<double> mode_edge_mass;
    double shift = 0;
    int lanczos_iterations = 0;
    int inner_iterations = 0;
    bool converged = false;
};

namespace detail {

// PCG for (A - shift) x = b with the flat preconditioner; throws IllPosed on loss of positivity.
inline int strip_pcg(const StripOperator& A, const StripOperator::FlatInverse& P, double shift,
                     const Eigen::VectorXcd& b, Eigen::VectorXcd& x, double tol, int max_iter) {
    const Eigen::Index n = b.size();
    x = Eigen::VectorXcd::Zero(n);
    Eigen::VectorXcd r = b, z, p, ap;
    P(r, z);
    p = z;
    cplx rz = r.dot(z);
    const double bn = b.norm();
    if (bn == 0) return 0;
    for (int it = 0; it < max_iter; ++it) {
        A.apply(p, ap);
        ap -= shift * p;
        double pap = p.dot(ap).real();
        if (!(pap > 0)) throw IllPosed("strip: shifted operator is not positive");
        cplx alpha = rz / pap;
        x += alpha * p;
        r -= alpha * ap;
        if (r.norm() <= tol * bn) return it + 1;
        P(r, z);
        cplx rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    throw NonConvergence("strip: inner PCG did not converge");
}

} // namespace detail

// Lowest eigenvalues by shift-invert Lanczos on -(A - s)^{-1}; s sits below the
// spectrum and is lowered if the shifted operator turns out indefinite.
inline StripSpectrum strip_lowest(const StripOperator& A, int n, double tol = 1e-10) {
    require(n >= 1 && n < A.order(), "strip_lowest: n out of range");
    const double flat = A.flat_lowest();
    double margin = 0.05 + 2 * A.spec().hbar * 3.0;
    for (int attempt = 0; attempt < 6; ++attempt, margin *= 2) {
        const double shift = flat - margin;
        auto P = A.flat_inverse(shift);
        int inner = 0;
        SparseHermitianOperator B;
        B.order = A.order();
        B.apply = [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) {
            Eigen::VectorXcd v;
            inner += detail::strip_pcg(A, P, shift, x, v, 1e-13, 500);
            y = -v;
        };
        try {
            LanczosOptions opt;
            opt.max_krylov = 120;
            auto lr = lanczos_lowest(B, n, tol, opt);
            StripSpectrum out;
            out.shift = shift;
            out.lanczos_iterations = lr.iterations;
            out.inner_iterations = inner;
            out.converged = lr.converged && int(lr.values.size()) == n;
            std::vector<std::pair<double, std::size_t>> order;
            for (std::size_t i = 0; i < lr.vectors.size(); ++i) {
                Eigen::VectorXcd Av;
                A.apply(lr.vectors[i], Av);
                double lam = lr.vectors[i].dot(Av).real() / lr.vectors[i].squaredNorm();
                order.push_back({lam, i});
            }
            std::sort(order.begin(), order.end());
            for (auto [lam, i] : order) {
                const auto& v = lr.vectors[i];
                Eigen::VectorXcd Av;
                A.apply(v, Av);
                out.eigenvalues.push_back(lam);
                out.residuals.push_back((Av - lam * v).norm() / v.norm());
                out.tail_mass.push_back(A.tail_mass(v, 8.0));
                out.mode_edge_mass.push_back(A.mode_edge_mass(v));
            }
            if (!out.converged) throw NonConvergence("strip: Lanczos did not converge");
            return out;
        } catch (const IllPosed&) {
            continue;
        }
    }
    throw NonConvergence("strip: could not find a shift below the spectrum");
}

inline StripSpectrum strip_lowest(const StripOperatorSpec& spec, int n, double tol = 1e-10) {
    return strip_lowest(StripOperator(spec), n, tol);
}

// Richardson over dt and 2 dt; diagnostics are from the fine grid. error = |fine - coarse| / 3.
struct StripExtrapolated {
    StripSpectrum fine;
    std::vector<double> eigenvalues;
    std::vector<double> errors;
};

inline StripExtrapolated strip_lowest_extrapolated(const StripOperatorSpec& spec, int n, double tol = 1e-10) {
    StripExtrapolated r;
    r.fine = strip_lowest(spec, n, tol);
    StripOperatorSpec c = spec;
    c.grid_t = spec.grid_t.coarsened();
    auto coarse = strip_lowest(c, n, tol);
    for (int i = 0; i < n; ++i) {
        r.eigenvalues.push_back(richardson(r.fine.eigenvalues[std::size_t(i)], coarse.eigenvalues[std::size_t(i)]));
        r.errors.push_back(std::abs(r.fine.eigenvalues[std::size_t(i)] - coarse.eigenvalues[std::size_t(i)]) / 3);
    }
    return r;
}

} // namespace edgespec
