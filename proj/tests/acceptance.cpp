// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mbsc/cli.hpp"
#include "mbsc/dgp.hpp"
#include "mbsc/document.hpp"
#include "mbsc/estimators.hpp"
#include "mbsc/io.hpp"
#include "mbsc/simplex.hpp"
#include "mbsc/transport.hpp"
#include "support.hpp"

using namespace mbsc;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

int failures = 0;

void report(int id, const std::string& title, double limit_s, const std::function<void(Outcome&)>& body) {
    Outcome o;
    const auto start = Clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (limit_s > 0.0) o.require(secs < limit_s, "runtime over " + std::to_string(limit_s) + " s");
    if (!o.pass) ++failures;
    std::printf("%s criterion %d: %s (%.2f s)%s\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), secs,
                o.detail.str().c_str());
    std::fflush(stdout);
}

PgdConfig default_config(std::int64_t trace_every = 0) {
    PgdConfig c;  // lr 5e-6, 200000 epochs
    c.trace_every = trace_every;
    return c;
}

double pre_sse(const PanelData& panel, const Weights& w) {
    const Vector r = panel.target_outcomes() - synthetic_series(panel, w);
    return r.head(panel.t0).squaredNorm();
}

double weight_of(const PanelData& panel, const Weights& w, const std::string& unit) {
    const auto ids = panel.donor_ids();
    for (std::size_t j = 0; j < ids.size(); ++j)
        if (ids[j] == unit) return w[static_cast<Eigen::Index>(j)];
    throw InvalidArgument("no donor " + unit);
}

bool same_fit(const FitResult& a, const FitResult& b) {
    if (!(a.weights == b.weights) || a.objective_value != b.objective_value) return false;
    if (a.trace.size() != b.trace.size()) return false;
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        if (a.trace[i].epoch != b.trace[i].epoch || a.trace[i].value != b.trace[i].value) return false;
    }
    return a.best_weights == b.best_weights && a.w1_at_solution == b.w1_at_solution;
}

int run_cli(std::vector<std::string> args, std::string* out = nullptr) {
    args.insert(args.begin(), "mbsc");
    std::ostringstream o, e;
    const int code = cli::run(args, o, e);
    if (out) *out = o.str();
    if (code != 0) std::cerr << e.str();
    return code;
}

}  // namespace

int main() {
    testing::Rng rng(20260515);

    report(1, "exact W1 vs spanning-tree LP oracle (200) and 1D CDF formula (200)", 10.0, [&](Outcome& o) {
        double worst_lp = 0.0, worst_cdf = 0.0;
        for (int rep = 0; rep < 200; ++rep) {
            const int n = rng.integer(1, 5), m = rng.integer(1, 5), d = rng.integer(1, 3);
            const Matrix src = rep % 2 ? rng.lattice_points(n, d) : rng.real_points(n, d);
            const Matrix tgt = rep % 2 ? rng.lattice_points(m, d) : rng.real_points(m, d);
            const Matrix c = l1_cost_matrix(src, tgt);
            const Vector p = rng.simplex(n, true), q = rng.simplex(m, true);
            const double oracle = testing::TreeEnumerationOracle(p, q, c).solve();
            worst_lp = std::max(worst_lp, std::abs(w1_exact(p, q, c).value - oracle));
        }
        for (int rep = 0; rep < 200; ++rep) {
            const int n = rng.integer(1, 40), m = rng.integer(1, 40);
            const Matrix xs = rng.real_points(n, 1, -20, 20), xt = rng.real_points(m, 1, -20, 20);
            const Vector p = rng.simplex(n, true), q = rng.simplex(m, true);
            const double v = w1_exact(p, q, l1_cost_matrix(xs, xt)).value;
            worst_cdf = std::max(worst_cdf, std::abs(v - testing::cdf_w1(xs.col(0), p, xt.col(0), q)));
        }
        o.detail << " max |LP diff| " << worst_lp << ", max |CDF diff| " << worst_cdf;
        o.require(worst_lp <= 1e-9, "LP oracle");
        o.require(worst_cdf <= 1e-8, "CDF oracle");
    });

    report(2, "simplex projection vs grid (100 x 3D), exact idempotence and shift invariance", 5.0, [&](Outcome& o) {
        const int steps = 1000;
        double worst = 0.0;
        bool idem = true, shift = true;
        for (int rep = 0; rep < 100; ++rep) {
            // Dyadic inputs and shifts, so v + c is exact and invariance can be checked bitwise.
            Vector v(3);
            for (int i = 0; i < 3; ++i) v[i] = rng.integer(-65536, 2 * 65536) / 65536.0;
            const double c = rng.integer(-4 * 65536, 4 * 65536) / 65536.0;
            const Vector x = project_simplex(v).values();
            worst = std::max(worst, (x - testing::grid_project3(v, steps)).cwiseAbs().maxCoeff());
            idem = idem && project_simplex(x).values() == x;
            shift = shift && project_simplex((v.array() + c).matrix()).values() == x;
        }
        o.detail << " max grid deviation " << worst;
        o.require(worst <= 1.0 / steps, "grid oracle");
        o.require(idem, "idempotence");
        o.require(shift, "shift invariance");
    });

    report(3, "entropic weight gradient vs central differences (50 instances, eps 1e-2)", 30.0, [&](Outcome& o) {
        double worst = 0.0;
        const double h = 1e-5;
        EntropicOptions opt;
        opt.epsilon = 1e-2;
        opt.tol = 1e-13;
        for (int rep = 0; rep < 50; ++rep) {
            const int n = rng.integer(2, 6), m = rng.integer(2, 6), J = rng.integer(2, 4);
            const Matrix c = l1_cost_matrix(rng.real_points(n, 2, 0, 1), rng.real_points(m, 2, 0, 1));
            const Vector p0 = rng.simplex(n);
            Matrix D(m, J);
            for (int j = 0; j < J; ++j) D.col(j) = rng.simplex(m);
            const Weights w(rng.simplex(J));
            const Vector g = w1_weight_gradient(D, w, w1_entropic(p0, D * w.values(), c, opt));
            for (int j = 0; j < J; ++j) {
                // Move along (w + h e_j) / (1 + h), which stays on the simplex.
                Vector up = w.values(), dn = w.values();
                up[j] += h;
                dn[j] -= h;
                up /= 1.0 + h;
                dn /= 1.0 - h;
                const double fd =
                    (w1_entropic(p0, D * up, c, opt).value - w1_entropic(p0, D * dn, c, opt).value) / (2 * h);
                worst = std::max(worst, std::abs((g[j] - g.dot(w.values())) - fd));
            }
        }
        o.detail << " max deviation " << worst;
        o.require(worst <= 1e-3, "deviation above 1e-3");
    });

    double ell = 0.0;
    report(4, "Lipschitz constant of the synthetic outcome function in [3.5, 4.5]", 10.0, [&](Outcome& o) {
        ell = dgp_lipschitz(DgpConfig{}).ell;
        o.detail << " ell = " << ell << " (target 4.0)";
        o.require(ell >= 3.5 && ell <= 4.5, "ell out of range");
    });

    const auto ex = generate_panel(DgpConfig{});
    const auto geo = make_geometry(ex.panel, ex.distributions);
    const SolverOptions exact;
    FitResult standard, m_fit, james;
    double fits_seconds = 0.0;
    {
        const auto start = Clock::now();
        standard = fit_standard_sc(ex.panel, default_config(1000), &geo);
        m_fit = fit_m_bound(geo, default_config(1000), exact, &ex.panel);
        james = fit_james_bound(ex.panel, geo, ell, default_config(1000), exact);
        fits_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    }

    report(5, "synthetic experiment: M-bound and standard weights, M interval covers truth", 600.0, [&](Outcome& o) {
        const Weights& wm = m_fit.weights;
        const auto ids = ex.panel.donor_ids();
        Eigen::Index arg;
        wm.values().maxCoeff(&arg);
        const double g20 = weight_of(ex.panel, wm, "g20"), g50 = weight_of(ex.panel, wm, "g50");
        const double s20 = weight_of(ex.panel, standard.weights, "g20");
        const double s50 = weight_of(ex.panel, standard.weights, "g50");
        const auto cov = coverage_report(ex.truth, ex.panel.t0, m_intervals(ex.panel, wm, ell, *m_fit.w1_at_solution));
        o.detail << " M weights g20 " << g20 << " g50 " << g50 << "; standard g20 " << s20 << " g50 " << s50
                 << "; truth inside " << cov.pre_inside + cov.post_inside << "/50; three fits took "
                 << fits_seconds << " s";
        o.require(ids[static_cast<std::size_t>(arg)] == "g50", "M argmax is not g50");
        o.require(g20 + g50 > 0.8, "g20 + g50 <= 0.8");
        o.require(s20 > s50, "standard g20 <= g50");
        o.require(cov.all_inside() && cov.pre_total + cov.post_total == 50, "truth outside M interval");
        o.require(fits_seconds < 600.0, "fits took over 10 minutes");
    });

    report(6, "James bound with lambda = ell vs M and standard fits", 600.0, [&](Outcome& o) {
        const double m_hw = m_bound_value(ell, *m_fit.w1_at_solution);
        const double j_hw = james_bound_value(ex.panel, james.weights, ell, *james.w1_at_solution);
        const auto cov = coverage_report(ex.truth, ex.panel.t0,
                                         james_intervals(ex.panel, james.weights, ell, *james.w1_at_solution));
        o.detail << " pre-fit max error James " << *james.pre_fit_max_abs_error << " vs M "
                 << *m_fit.pre_fit_max_abs_error << "; W1 James " << *james.w1_at_solution << " vs standard "
                 << *standard.w1_at_solution << "; half-width James " << j_hw << " vs M " << m_hw;
        o.require(*james.pre_fit_max_abs_error <= *m_fit.pre_fit_max_abs_error, "pre-fit error");
        o.require(*james.w1_at_solution <= *standard.w1_at_solution, "W1");
        o.require(j_hw >= m_hw, "half-width");
        o.require(cov.all_inside(), "truth outside James interval");
    });

    report(7, "each fit is best in its own objective", 0.0, [&](Outcome& o) {
        const double sse_s = pre_sse(ex.panel, standard.weights), sse_m = pre_sse(ex.panel, m_fit.weights);
        const double w1_s = *standard.w1_at_solution, w1_m = *m_fit.w1_at_solution;
        o.detail << " SSE standard " << sse_s << " vs at M " << sse_m << "; W1 at M " << w1_m << " vs at standard "
                 << w1_s;
        o.require(sse_s <= sse_m * (1 + 1e-6), "SSE");
        o.require(w1_m <= w1_s * (1 + 1e-6), "W1");
    });

    report(8, "census-style fixture: dists, lipschitz, fit, bound, placebo through the CLI", 0.0, [&](Outcome& o) {
        const fs::path fx = MBSC_FIXTURE_DIR;
        const fs::path dir = testing::fresh_dir("acceptance_census");
        const std::string dists = (dir / "dists.json").string();
        o.require(run_cli({"dists", "--table", (fx / "census.csv").string(), "--schema", (fx / "schema.json").string(),
                       "--out", dists}) == 0, "dists");
        const auto loaded = io::read_distributions_json(dists);
        o.require(loaded.set.atoms->size() == 224, "224 atoms");
        o.require(run_cli({"lipschitz", "--survey", (fx / "survey.csv").string(), "--schema",
                       (fx / "schema.json").string(), "--out", (dir / "lip.json").string()}) == 0, "lipschitz");
        const double l = io::read_json(dir / "lip.json")["ell"].get<double>();
        const std::string l_text = io::format_double(l);
        const std::vector<std::string> common{"--panel", (fx / "panel.csv").string(), "--target", "Northfield",
                                              "--t0", "1989", "--dists", dists};

        std::vector<std::string> fit_args{"fit", "--method", "m", "--out", (dir / "fit.json").string()};
        fit_args.insert(fit_args.end(), common.begin(), common.end());
        o.require(run_cli(fit_args) == 0, "fit");
        o.require(run_cli({"bound", "--fit", (dir / "fit.json").string(), "--lipschitz", l_text, "--out",
                       (dir / "bound.json").string()}) == 0, "bound");
        const auto doc = io::read_json(dir / "bound.json");
        validate_result_document(doc);
        const double hw = doc["bound"]["half_width"].get<double>();
        o.require(hw == l * doc["w1"].get<double>(), "half-width != ell * W1");
        for (const auto& rec : doc["periods"]) {
            o.require(rec["upper"].get<double>() - rec["synthetic"].get<double>() ==
                          (rec["synthetic"].get<double>() + hw) - rec["synthetic"].get<double>(),
                      "interval arithmetic");
        }

        std::vector<std::string> placebo_args{"placebo", "--method", "m", "--lipschitz", l_text, "--out-dir",
                                              (dir / "placebo").string()};
        placebo_args.insert(placebo_args.end(), common.begin(), common.end());
        o.require(run_cli(placebo_args) == 0, "placebo");
        int docs = 0;
        for (const auto& entry : fs::directory_iterator(dir / "placebo")) {
            if (entry.path().extension() != ".json") continue;
            validate_result_document(io::read_json(entry.path()));
            ++docs;
        }
        o.require(docs == 2, "one placebo document per donor");
        o.detail << " ell " << l << ", W1 " << doc["w1"].get<double>() << ", half-width " << hw << ", "
                 << docs << " placebo documents";
    });

    report(9, "fits are bit-identical when re-run", 0.0, [&](Outcome& o) {
        const auto s2 = fit_standard_sc(ex.panel, default_config(1000), &geo);
        const auto m2 = fit_m_bound(geo, default_config(1000), exact, &ex.panel);
        const auto j2 = fit_james_bound(ex.panel, geo, ell, default_config(1000), exact);
        o.require(same_fit(standard, s2), "standard");
        o.require(same_fit(m_fit, m2), "m_bound");
        o.require(same_fit(james, j2), "james_bound");
        o.detail << " compared weights, objectives and " << m2.trace.size() << "-point traces";
    });

    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
