#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "edgespec/edgespec.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace edgespec;

namespace {

struct RunConfig {
    std::string out = "out";
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());

    std::vector<double> a{-0.5};
    std::vector<double> h;
    std::vector<double> hbar;
    std::optional<double> E;
    std::string curve = "ellipse";
    std::vector<double> params{1.0, 0.6};
    int samples = 512;

    double sigma_min = -1.0, sigma_max = 3.0;
    int points = 81;
    int levels = 1;
    int modes = 0;
    double spacing = 1.0 / 400;
    double strip_T = 12.0, strip_dt = 0.05;
    std::optional<double> eta;
    std::optional<double> theta;

    std::string csv, x, y, output;
    bool logx = false, logy = false;
};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Csv {
  public:
    Csv(const fs::path& p, const std::string& header) : f_(p) {
        if (!f_) throw InvalidInput("cannot write " + p.string());
        f_ << header << '\n';
    }
    template <class... T> void row(const T&... v) {
        std::string line;
        ((line += cell(v), line += ','), ...);
        line.pop_back();
        f_ << line << '\n';
    }

  private:
    static std::string cell(double v) { return num(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(long v) { return std::to_string(v); }
    static std::string cell(long long v) { return std::to_string(v); }
    std::ofstream f_;
};

void write_json(const fs::path& p, const json& j) {
    std::ofstream f(p);
    if (!f) throw InvalidInput("cannot write " + p.string());
    f << j.dump(2) << '\n';
}

// Bounded pool: jobs write into their own slot, the caller emits output afterwards.
// An exception from any job is rethrown after all workers join.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& job) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex m;
    auto work = [&] {
        for (std::size_t i; (i = next++) < n;) {
            try {
                job(i);
            } catch (...) {
                std::lock_guard<std::mutex> g(m);
                if (!err) err = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < std::min<std::size_t>(threads, n); ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

CurveGeometry geometry_of(const RunConfig& c, int min_samples = 0) {
    require(c.samples >= 64, "samples must be >= 64");
    return curve_geometry(CurveSpec::parse(c.curve, c.params), std::size_t(std::max(c.samples, min_samples)));
}

std::vector<double> hbar_list(const RunConfig& c) {
    std::vector<double> out = c.hbar;
    for (double h : c.h) {
        require(h > 0, "h must be positive");
        out.push_back(std::sqrt(h));
    }
    require(!out.empty(), "need --hbar or --h");
    for (double hb : out) require(hb > 0 && hb < 1, "hbar must lie in (0, 1)");
    return out;
}

void check_a(double a) { require(a >= -1 && a < 0, "a must lie in [-1, 0)"); }

std::map<double, BandMinimum> minima(const RunConfig& c) {
    for (double a : c.a) check_a(a);
    std::vector<BandMinimum> ms(c.a.size());
    parallel_for(c.a.size(), c.threads, [&](std::size_t i) { ms[i] = band_minimum(c.a[i]); });
    std::map<double, BandMinimum> out;
    for (std::size_t i = 0; i < ms.size(); ++i) out.emplace(c.a[i], ms[i]);
    return out;
}

void cmd_band(const RunConfig& c, const fs::path& out) {
    require(c.points >= 2 && c.sigma_max > c.sigma_min, "need points >= 2 and sigma_max > sigma_min");
    require(c.levels >= 1 && c.levels <= 4, "levels must lie in 1..4");
    struct Job {
        double a, sigma;
        int level;
        double mu = 0;
    };
    std::vector<Job> jobs;
    for (double a : c.a) {
        check_a(a);
        for (int i = 0; i < c.points; ++i)
            for (int n = 1; n <= c.levels; ++n)
                jobs.push_back({a, c.sigma_min + (c.sigma_max - c.sigma_min) * i / (c.points - 1), n});
    }
    parallel_for(jobs.size(), c.threads, [&](std::size_t i) {
        auto& j = jobs[i];
        j.mu = band_value(j.a, j.sigma, j.level, default_grid(j.a, std::abs(j.sigma) + 1, c.spacing)).mu;
    });
    Csv csv(out / "band.csv", "a,sigma,level,mu");
    for (const auto& j : jobs) csv.row(j.a, j.sigma, j.level, j.mu);
}

void cmd_minimize(const RunConfig& c, const fs::path& out) {
    auto ms = minima(c);
    Csv csv(out / "minimum.csv", "a,sigma_a,beta_a,mu_pp");
    for (double a : c.a) {
        const auto& m = ms.at(a);
        csv.row(a, m.sigma_a, m.beta_a, m.mu_pp);
    }
}

void cmd_moments(const RunConfig& c, const fs::path& out) {
    auto ms = minima(c);
    std::vector<MomentSet> sets(c.a.size());
    parallel_for(c.a.size(), c.threads, [&](std::size_t i) { sets[i] = moments(c.a[i], ms.at(c.a[i])); });
    Csv csv(out / "moments.csv", "a,M0,M1,M2,M3,M4,quad_err");
    for (const auto& M : sets)
        csv.row(M.a, M.values[0], M.values[1], M.values[2], M.values[3], M.values[4], M.quadrature_error);
}

json degennes_json(const DeGennesData& dg) {
    return json{{"Theta0", dg.Theta0},
                {"xi0", dg.xi0},
                {"mu_pp", dg.mu_pp},
                {"theta_convergence", dg.theta_convergence},
                {"M2", dg.halfmoments[2]},
                {"M3", dg.halfmoments[3]},
                {"M4", dg.halfmoments[4]},
                {"halfmoment_error", dg.halfmoment_error},
                {"f0_sq_at_0", dg.f0_sq_at_0}};
}

void cmd_degennes(const RunConfig&, const fs::path& out) { write_json(out / "degennes.json", degennes_json(degennes())); }

void cmd_constants(const RunConfig& c, const fs::path& out) {
    require(c.a.size() == 1, "constants takes a single a");
    const double a = c.a[0];
    check_a(a);
    auto dg = degennes();
    auto G = constant_G(dg);
    auto m = band_minimum(a);
    auto M = moments(a, m);
    auto u = universal_constants(M, G);
    json j{{"a", a},
           {"C", u.C_of_a},
           {"G_closed", G.corrected_form2},
           {"G_direct", G.G_direct},
           {"C0", u.C0},
           {"G_closed_alt", G.alt_form1},
           {"C0_alt", u.C0_alt},
           {"route_difference", G.route_difference}};
    write_json(out / "constants.json", j);
}

void cmd_geometry(const RunConfig& c, const fs::path& out) {
    auto g = geometry_of(c);
    Csv csv(out / "geometry.csv", "s,k");
    for (std::size_t i = 0; i < g.size(); ++i) csv.row(g.s_samples[i], g.k_samples[i]);
    json j{{"curve", g.spec.name()}, {"params", g.spec.params}, {"L", g.L}, {"area", g.area}, {"gamma0", g.gamma0}};
    if (g.spec.kind != CurveKind::circle) {
        auto cm = curvature_max(g);
        j["s_max"] = cm.s_max;
        j["k_max"] = cm.k_max;
        j["k_pp"] = cm.k_pp;
        j["maxima"] = cm.multiplicity;
    }
    write_json(out / "geometry.json", j);
}

void cmd_effective(const RunConfig& c, const fs::path& out) {
    require(c.a.size() == 1, "effective takes a single a");
    check_a(c.a[0]);
    auto g = geometry_of(c);
    auto m = band_minimum(c.a[0]);
    auto co = symbol_coefficients(m);
    auto rs = reduced_symbol(m, co, g);
    Csv csv(out / "effsym.csv", "s,k,lin,c1,quad");
    for (std::size_t i = 0; i < g.size(); ++i)
        csv.row(rs.s_samples[i], rs.k_samples[i], rs.lin_samples[i], rs.c1_samples[i], rs.quad_samples[i]);
    write_json(out / "effective.json", json{{"a", m.a},
                                            {"sigma_a", m.sigma_a},
                                            {"beta_a", m.beta_a},
                                            {"mu_pp", m.mu_pp},
                                            {"g1", co.g1},
                                            {"g1_prime_sigma", co.g1_prime_sigma},
                                            {"g2", co.g2},
                                            {"deflation_residual", co.deflation_residual}});
}

// r(hbar) = (lambda_1 + C k_max hbar) / hbar^{3/2} - sqrt(C mu'' |k''|) / 2 for a in (-1, 0);
// at a = -1 the column holds max_n |lambda_n / hbar^2 - gamma_n|.
void cmd_asymptotics(const RunConfig& c, const fs::path& out) {
    require(c.a.size() == 1, "asymptotics takes a single a");
    const double a = c.a[0];
    check_a(a);
    auto hbars = hbar_list(c);
    const int modes = c.modes > 0 ? c.modes : 64;
    const int nlev = std::max(c.levels, 1);
    require(nlev <= 2 * modes + 1, "levels exceed the mode window");
    auto g = geometry_of(c, 4 * modes + 1);
    auto m = band_minimum(a);
    auto co = symbol_coefficients(m);
    auto rs = reduced_symbol(m, co, g);
    const bool minus1 = a == -1.0;
    std::optional<DeGennesData> dg;
    double C0 = 0;
    if (minus1) {
        dg = degennes();
        C0 = -0.25 - 0.5 * constant_G(*dg).G_direct;
    }
    std::optional<CurvatureMax> cm;
    if (!minus1) cm = curvature_max(g);

    struct Row {
        double hbar, theta = 0, r = 0;
        std::vector<double> lambda;
    };
    std::vector<Row> rows;
    for (double hb : hbars) rows.push_back({hb});
    parallel_for(rows.size(), c.threads, [&](std::size_t i) {
        auto& row = rows[i];
        const double hb = row.hbar;
        auto fo = minus1 ? flux_offsets(g, hb * hb, dg->xi0) : flux_offsets(g, hb * hb);
        row.theta = c.theta ? *c.theta : fo.theta;
        auto sp = spectrum_lowest(quantize_reduced(rs, g.L, hb, row.theta, modes), nlev);
        row.lambda = sp.eigenvalues;
        if (minus1) {
            auto gam = spectrum_lowest(a_minus1_operator(g, fo.alpha_h, C0, m.mu_pp, modes), nlev);
            for (int n = 0; n < nlev; ++n)
                row.r = std::max(row.r, std::abs(sp.eigenvalues[std::size_t(n)] / (hb * hb) - gam.eigenvalues[std::size_t(n)]));
        } else {
            auto hp = harmonic_prediction(m, *cm, co.g1, hb, 1);
            row.r = (sp.eigenvalues[0] + co.g1 * cm->k_max * hb) / std::pow(hb, 1.5) - 0.5 * hp.level_gap / std::pow(hb, 1.5);
        }
    });
    Csv spec(out / "spectrum.csv", "hbar,theta,n,lambda");
    for (const auto& r : rows)
        for (int n = 0; n < nlev; ++n) spec.row(r.hbar, r.theta, n + 1, r.lambda[std::size_t(n)]);
    Csv res(out / "residuals.csv", minus1 ? "hbar,cross_route" : "hbar,r");
    for (const auto& r : rows) res.row(r.hbar, r.r);
}

void cmd_weyl(const RunConfig& c, const fs::path& out) {
    require(c.a.size() == 1, "weyl takes a single a");
    check_a(c.a[0]);
    require(c.E.has_value(), "weyl needs --E");
    require(!c.h.empty(), "weyl needs --h");
    auto g = geometry_of(c);
    auto m = band_minimum(c.a[0]);
    std::vector<WeylCount> ws(c.h.size());
    parallel_for(c.h.size(), c.threads, [&](std::size_t i) { ws[i] = weyl_count(m, g, *c.E, c.h[i]); });
    Csv csv(out / "weyl.csv", "h,E,count,prediction,ratio");
    for (std::size_t i = 0; i < ws.size(); ++i) csv.row(c.h[i], *c.E, ws[i].count, ws[i].prediction, double(ws[i].count) / ws[i].prediction);
}

void cmd_strip2d(const RunConfig& c, const fs::path& out) {
    require(c.a.size() == 1, "strip2d takes a single a");
    check_a(c.a[0]);
    auto hbars = hbar_list(c);
    const int nlev = std::max(c.levels, 1);
    auto g = geometry_of(c);
    auto m = band_minimum(c.a[0]);
    auto grid = TransverseGrid::make(c.strip_T, c.strip_dt);
    struct Row {
        double hbar, theta = 0, eta = 0;
        StripSpectrum sp;
    };
    std::vector<Row> rows;
    for (double hb : hbars) rows.push_back({hb});
    // the Lanczos driver is single-threaded; independent hbar values run in parallel
    parallel_for(rows.size(), c.threads, [&](std::size_t i) {
        auto& r = rows[i];
        r.theta = c.theta ? *c.theta : flux_offsets(g, r.hbar * r.hbar).theta;
        auto spec = strip_spec(m, r.hbar, g, r.theta, c.modes, grid, c.eta ? *c.eta : 0.0);
        r.eta = spec.eta;
        r.sp = strip_lowest(spec, nlev);
    });
    Csv csv(out / "strip.csv", "hbar,theta,n,lambda,tail_mass");
    json runs = json::array();
    for (const auto& r : rows) {
        for (int n = 0; n < nlev; ++n)
            csv.row(r.hbar, r.theta, n + 1, r.sp.eigenvalues[std::size_t(n)], r.sp.tail_mass[std::size_t(n)]);
        runs.push_back({{"hbar", r.hbar},
                        {"eta", r.eta},
                        {"max_residual", *std::max_element(r.sp.residuals.begin(), r.sp.residuals.end())},
                        {"max_mode_edge_mass", *std::max_element(r.sp.mode_edge_mass.begin(), r.sp.mode_edge_mass.end())}});
    }
    write_json(out / "strip.json", json{{"a", m.a}, {"beta_a", m.beta_a}, {"runs", runs}});
}

void cmd_report(const RunConfig&, const fs::path& out) {
    json doc = json::object();
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(out))
        if (e.path().extension() == ".json" && e.path().filename() != "report.json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
        std::ifstream f(p);
        try {
            doc[p.stem().string()] = json::parse(f);
        } catch (const json::parse_error& e) {
            throw InvalidInput("cannot parse " + p.string() + ": " + e.what());
        }
    }
    write_json(out / "report.json", doc);
}

// Single-panel polyline SVG, 800x600, five ticks per axis.
void cmd_plot(const RunConfig& c, const fs::path& out) {
    require(!c.csv.empty() && !c.x.empty() && !c.y.empty(), "plot needs --csv, --x and --y");
    std::ifstream f(c.csv);
    require(bool(f), "cannot read " + c.csv);
    std::string line;
    std::getline(f, line);
    std::vector<std::string> head;
    {
        std::stringstream ss(line);
        for (std::string h; std::getline(ss, h, ',');) head.push_back(h);
    }
    auto col = [&](const std::string& name) {
        auto it = std::find(head.begin(), head.end(), name);
        require(it != head.end(), "column '" + name + "' not in " + c.csv);
        return std::size_t(it - head.begin());
    };
    const std::size_t ix = col(c.x), iy = col(c.y);
    std::vector<std::pair<double, double>> pts;
    while (std::getline(f, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string v; std::getline(ss, v, ',');) cells.push_back(v);
        if (cells.size() != head.size()) continue;
        double x = std::stod(cells[ix]), y = std::stod(cells[iy]);
        if (c.logx) x = std::log10(std::abs(x));
        if (c.logy) y = std::log10(std::abs(y));
        if (std::isfinite(x) && std::isfinite(y)) pts.push_back({x, y});
    }
    require(!pts.empty(), "no plottable rows in " + c.csv);
    auto [xl, xh] = std::minmax_element(pts.begin(), pts.end(), [](auto& p, auto& q) { return p.first < q.first; });
    auto [yl, yh] = std::minmax_element(pts.begin(), pts.end(), [](auto& p, auto& q) { return p.second < q.second; });
    double x0 = xl->first, x1 = xh->first, y0 = yl->second, y1 = yh->second;
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const double L = 90, R = 770, T = 30, B = 540;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (R - L); };
    auto py = [&](double y) { return B - (y - y0) / (y1 - y0) * (B - T); };
    auto label = [](double v, bool lg) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4g", lg ? std::pow(10.0, v) : v);
        return std::string(buf);
    };
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 600\" width=\"800\" height=\"600\">\n"
      << "<rect width=\"800\" height=\"600\" fill=\"white\"/>\n"
      << "<g stroke=\"black\" fill=\"none\"><line x1=\"" << L << "\" y1=\"" << B << "\" x2=\"" << R << "\" y2=\"" << B
      << "\"/><line x1=\"" << L << "\" y1=\"" << B << "\" x2=\"" << L << "\" y2=\"" << T << "\"/></g>\n"
      << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
    for (int i = 0; i < 5; ++i) {
        double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
        s << "<line x1=\"" << px(xv) << "\" y1=\"" << B << "\" x2=\"" << px(xv) << "\" y2=\"" << B + 6 << "\" stroke=\"black\"/>"
          << "<text x=\"" << px(xv) << "\" y=\"" << B + 22 << "\" text-anchor=\"middle\">" << label(xv, c.logx) << "</text>\n"
          << "<line x1=\"" << L - 6 << "\" y1=\"" << py(yv) << "\" x2=\"" << L << "\" y2=\"" << py(yv) << "\" stroke=\"black\"/>"
          << "<text x=\"" << L - 10 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << label(yv, c.logy) << "</text>\n";
    }
    s << "<text x=\"" << (L + R) / 2 << "\" y=\"585\" text-anchor=\"middle\">" << c.x << (c.logx ? " (log)" : "") << "</text>\n"
      << "<text x=\"20\" y=\"" << (T + B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " << (T + B) / 2
      << ")\">" << c.y << (c.logy ? " (log)" : "") << "</text>\n</g>\n<polyline fill=\"none\" stroke=\"#1f4e99\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : pts) s << px(x) << ',' << py(y) << ' ';
    s << "\"/>\n</svg>\n";
    fs::path target = c.output.empty() ? out / (fs::path(c.csv).stem().string() + "_" + c.y + ".svg") : fs::path(c.output);
    std::ofstream o(target);
    require(bool(o), "cannot write " + target.string());
    o << s.str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Edge spectra of magnetic step fields along smooth curves"};
    app.set_help_flag("--help", "print usage");
    app.set_config("--config", "", "key=value file; flags override it");
    app.require_subcommand(1);
    app.fallthrough();

    RunConfig c;
    app.add_option("--out", c.out, "output directory")->capture_default_str();
    app.add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--a", c.a, "field ratio(s) in [-1, 0)")->delimiter(',');
    app.add_option("--h", c.h, "semiclassical parameter(s) h")->delimiter(',');
    app.add_option("--hbar", c.hbar, "hbar = sqrt(h) value(s)")->delimiter(',');
    app.add_option("--E", c.E, "energy threshold");
    app.add_option("--curve", c.curve, "circle | ellipse | fourier")->capture_default_str();
    app.add_option("--params", c.params, "curve parameters")->delimiter(',');
    app.add_option("--samples", c.samples, "arc-length samples")->capture_default_str();
    app.add_option("--sigma-min", c.sigma_min)->capture_default_str();
    app.add_option("--sigma-max", c.sigma_max)->capture_default_str();
    app.add_option("--points", c.points, "sigma points for band")->capture_default_str();
    app.add_option("--levels", c.levels, "number of levels")->capture_default_str();
    app.add_option("--modes", c.modes, "Fourier modes per side (0 = automatic)");
    app.add_option("--spacing", c.spacing, "transverse grid spacing")->capture_default_str();
    app.add_option("--strip-T", c.strip_T, "strip half-width in t")->capture_default_str();
    app.add_option("--strip-dt", c.strip_dt, "strip spacing in t")->capture_default_str();
    app.add_option("--eta", c.eta, "strip cutoff exponent (default: largest admissible <= 1/4)");
    app.add_option("--theta", c.theta, "override the flux offset theta");
    app.add_option("--csv", c.csv, "plot: input CSV");
    app.add_option("--x", c.x, "plot: x column");
    app.add_option("--y", c.y, "plot: y column");
    app.add_option("--output", c.output, "plot: SVG path");
    app.add_flag("--logx", c.logx);
    app.add_flag("--logy", c.logy);

    const std::vector<std::pair<std::string, std::function<void(const RunConfig&, const fs::path&)>>> commands{
        {"band", cmd_band},         {"minimize", cmd_minimize}, {"moments", cmd_moments},
        {"degennes", cmd_degennes}, {"constants", cmd_constants}, {"geometry", cmd_geometry},
        {"effective", cmd_effective}, {"asymptotics", cmd_asymptotics}, {"weyl", cmd_weyl},
        {"strip2d", cmd_strip2d},   {"report", cmd_report},     {"plot", cmd_plot}};
    for (const auto& [name, fn] : commands) app.add_subcommand(name)->fallthrough()->set_help_flag("--help");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 2;
    }

    try {
        const fs::path out(c.out);
        fs::create_directories(out);
        for (const auto& [name, fn] : commands)
            if (app.got_subcommand(name)) fn(c, out);
        return 0;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
