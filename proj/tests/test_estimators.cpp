#include <doctest.h>

#include <string>
#include <vector>

#include "mbsc/dgp.hpp"
#include "mbsc/estimators.hpp"
#include "support.hpp"

using namespace mbsc;
using mbsc::testing::Rng;

namespace {

PanelData make_panel(const Matrix& y, Eigen::Index t0, Eigen::Index target = 0) {
    PanelData p;
    p.outcomes = y;
    p.t0 = t0;
    p.target_index = target;
    for (Eigen::Index j = 0; j < y.rows(); ++j) p.unit_ids.push_back("u" + std::to_string(j));
    for (Eigen::Index t = 0; t < y.cols(); ++t) p.period_labels.push_back(std::to_string(2000 + t));
    p.validate();
    return p;
}

Matrix random_outcomes(Rng& rng, Eigen::Index units, Eigen::Index periods) {
    Matrix y(units, periods);
    for (Eigen::Index j = 0; j < units; ++j)
        for (Eigen::Index t = 0; t < periods; ++t) y(j, t) = rng.normal(5.0, 2.0);
    return y;
}

double pre_sse(const PanelData& panel, const Weights& w) {
    const Vector r = panel.target_outcomes() - synthetic_series(panel, w);
    return r.head(panel.t0).squaredNorm();
}

DistributionTable point_masses(const std::vector<std::string>& units, const std::vector<double>& xs) {
    Matrix pts(static_cast<Eigen::Index>(xs.size()), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) pts(static_cast<Eigen::Index>(i), 0) = xs[i];
    auto atoms = make_atom_set(pts);
    DistributionTable table;
    for (std::size_t u = 0; u < units.size(); ++u) {
        // Duplicate points are merged, so look the atom up by value.
        Vector probs = Vector::Zero(atoms->size());
        for (Eigen::Index k = 0; k < atoms->size(); ++k)
            if (atoms->points()(k, 0) == xs[u]) probs[k] = 1.0;
        table.emplace(units[u], DiscreteDistribution(atoms, probs));
    }
    return table;
}

PgdConfig quick(double lr, std::int64_t epochs) {
    PgdConfig c;
    c.learning_rate = lr;
    c.epochs = epochs;
    return c;
}

}  // namespace

TEST_CASE("panel validation") {
    Matrix y = Matrix::Ones(3, 4);
    CHECK_NOTHROW(make_panel(y, 2));
    CHECK_THROWS_AS(make_panel(y, 4), InvalidArgument);
    CHECK_THROWS_AS(make_panel(Matrix::Ones(1, 4), 2), InvalidArgument);
    CHECK_THROWS_AS(make_panel(Matrix::Ones(3, 1), 0), InvalidArgument);
    y(1, 1) = NAN;
    CHECK_THROWS_AS(make_panel(y, 2), InvalidArgument);
}

TEST_CASE("method names") {
    CHECK(parse_method("standard") == Method::standard);
    CHECK(parse_method("m") == Method::m_bound);
    CHECK(parse_method("james") == Method::james_bound);
    CHECK(parse_method(to_string(Method::james_bound)) == Method::james_bound);
    CHECK_THROWS_AS(parse_method("ridge"), InvalidArgument);
}

TEST_CASE("synthetic series") {
    Rng rng(1);
    const PanelData p = make_panel(random_outcomes(rng, 4, 6), 3);
    const Matrix donors = p.donor_outcomes();
    CHECK(synthetic_series(p, Weights::vertex(3, 1)) == donors.row(1).transpose());

    Matrix flat = Matrix::Constant(4, 5, 7.25);
    CHECK(synthetic_series(make_panel(flat, 2), Weights::uniform(3)).isApproxToConstant(7.25, 1e-15));

    const Weights w(rng.simplex(3));
    const Vector got = synthetic_series(p, w);
    for (Eigen::Index t = 0; t < p.periods(); ++t) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < 3; ++j) s += w[j] * donors(j, t);
        CHECK(std::abs(got[t] - s) <= 1e-13);
    }
    CHECK_THROWS_AS(synthetic_series(p, Weights::uniform(2)), InvalidArgument);
}

TEST_CASE("bound values and intervals") {
    CHECK(m_bound_value(0.0, 3.0) == 0.0);
    CHECK(m_bound_value(3.0, 0.0) == 0.0);
    CHECK(m_bound_value(2.0, 0.5) == 1.0);
    CHECK_THROWS_AS(m_bound_value(-1.0, 1.0), InvalidArgument);
    CHECK_THROWS_AS(m_bound_value(1.0, -1.0), InvalidArgument);

    // Target 10 everywhere except a pre-period miss of 3; one donor at 10.
    Matrix y(2, 4);
    y << 13, 10, 10, 10,
         10, 10, 10, 10;
    const PanelData p = make_panel(y, 2);
    const Weights w = Weights::uniform(1);
    const auto m = m_intervals(p, w, 2.0, 0.5);
    REQUIRE(m.size() == 4);
    for (const auto& iv : m) {
        CHECK(iv.lower == 9.0);
        CHECK(iv.upper == 11.0);
        CHECK(iv.half_width == 1.0);
    }
    CHECK(pre_fit_max_abs_error(p, w) == 3.0);
    CHECK(james_bound_value(p, w, 2.0, 0.5) == 4.0);
    for (const auto& iv : james_intervals(p, w, 2.0, 0.5)) CHECK(iv.half_width == 4.0);

    Matrix exact(2, 3);
    exact << 1, 2, 3,
             1, 2, 3;
    const PanelData pe = make_panel(exact, 2);
    CHECK(james_bound_value(pe, w, 5.0, 0.0) == 0.0);
    for (const auto& iv : james_intervals(pe, w, 5.0, 0.0)) CHECK(iv.lower == iv.upper);

    Rng rng(2);
    for (int rep = 0; rep < 50; ++rep) {
        const PanelData pr = make_panel(random_outcomes(rng, 4, 8), 5);
        const Weights wr(rng.simplex(3));
        const double ell = rng.uniform(0, 5), w1 = rng.uniform(0, 2);
        CHECK(james_bound_value(pr, wr, ell, w1) >= m_bound_value(ell, w1));
        const auto mi = m_intervals(pr, wr, ell, w1);
        const auto ji = james_intervals(pr, wr, ell, w1);
        for (std::size_t t = 0; t < mi.size(); ++t) {
            CHECK(mi[t].lower == mi[t].synthetic - mi[t].half_width);
            CHECK(mi[t].upper == mi[t].synthetic + mi[t].half_width);
            CHECK(ji[t].lower == ji[t].synthetic - ji[t].half_width);
            CHECK(ji[t].upper == ji[t].synthetic + ji[t].half_width);
            CHECK(ji[t].half_width >= mi[t].half_width);
        }
    }
    CHECK_THROWS_AS(james_bound_value(make_panel(y, 0), w, 1.0, 1.0), InvalidArgument);
}

TEST_CASE("coverage report") {
    Matrix y(2, 5);
    y << 1, 2, 3, 4, 5,
         1, 2, 3, 4, 5;
    const PanelData p = make_panel(y, 2);
    auto iv = m_intervals(p, Weights::uniform(1), 1.0, 0.5);
    auto rep = coverage_report(p, iv);
    CHECK(rep.all_inside());
    CHECK(rep.pre_total == 2);
    CHECK(rep.post_total == 3);

    PanelData shifted = p;
    shifted.outcomes(0, 3) = iv[3].upper + 1.0;
    rep = coverage_report(shifted, iv);
    CHECK_FALSE(rep.inside[3]);
    CHECK(rep.post_inside == 2);
    CHECK(rep.pre_inside == 2);

    iv.pop_back();
    CHECK_THROWS_AS(coverage_report(p, iv), InvalidArgument);
}

TEST_CASE("standard SC") {
    Rng rng(4);
    SUBCASE("target duplicates a donor") {
        Matrix y = random_outcomes(rng, 4, 6);
        y.row(0) = y.row(2);
        const PanelData p = make_panel(y, 4);
        const auto r = fit_standard_sc(p, quick(5e-3, 20000));
        CHECK(*r.pre_fit_max_abs_error <= 1e-6);
    }
    SUBCASE("two donors against a grid search") {
        for (int rep = 0; rep < 10; ++rep) {
            const PanelData p = make_panel(random_outcomes(rng, 3, 5), 3);
            const auto r = fit_standard_sc(p, quick(1e-2, 20000));
            double best = INFINITY;
            for (int k = 0; k <= 10000; ++k) {
                const double a = k / 10000.0;
                best = std::min(best, pre_sse(p, Weights(Vector{{a, 1.0 - a}})));
            }
            CHECK(r.objective_value <= best + 1e-6);
            CHECK(r.objective_value == doctest::Approx(pre_sse(p, r.weights)));
        }
    }
    SUBCASE("needs a pre-period") {
        const PanelData p = make_panel(random_outcomes(rng, 3, 5), 0);
        CHECK_THROWS_AS(fit_standard_sc(p, quick(1e-2, 10)), InvalidArgument);
    }
}

TEST_CASE("M bound on point masses") {
    // Donors at 0, 1, 3; the target sits on the middle donor.
    Matrix pts(3, 1);
    pts << 0.0, 1.0, 3.0;
    auto atoms = make_atom_set(pts);
    const std::vector<DiscreteDistribution> donors{
        DiscreteDistribution(atoms, Vector{{1.0, 0.0, 0.0}}),
        DiscreteDistribution(atoms, Vector{{0.0, 1.0, 0.0}}),
        DiscreteDistribution(atoms, Vector{{0.0, 0.0, 1.0}}),
    };
    const DiscreteDistribution p0(atoms, Vector{{0.0, 1.0, 0.0}});
    const double delta = 1.0;  // smallest pairwise donor distance
    const auto r = fit_m_bound(p0, donors, quick(1e-2, 5000), SolverOptions{});
    CHECK(*r.w1_at_solution <= 1e-3 * delta);
    CHECK(r.weights[1] > 0.99);
    CHECK(!r.fit_term);

    SolverOptions ent;
    ent.kind = SolverKind::entropic;
    const auto re = fit_m_bound(p0, donors, quick(1e-2, 2000), ent);
    CHECK(re.weights[1] > 0.9);
    CHECK(*re.w1_at_solution >= 0.0);
}

TEST_CASE("M bound ignores outcomes") {
    Rng rng(6);
    const PanelData p = make_panel(random_outcomes(rng, 3, 4), 2);
    auto dists = point_masses(p.unit_ids, {0.4, 0.0, 1.0});
    FitOptions opt;
    opt.config = quick(1e-2, 3000);
    const auto a = fit(Method::m_bound, p, &dists, opt);
    PanelData q = p;
    q.outcomes = random_outcomes(rng, 3, 4);
    const auto b = fit(Method::m_bound, q, &dists, opt);
    CHECK(a.weights == b.weights);
    // W1 to a point mass at 0.4 is 0.4 w0 + 0.6 w1, minimized at the nearer donor.
    CHECK(a.weights[0] > 0.99);
}

TEST_CASE("James bound") {
    Rng rng(9);
    SUBCASE("lambda zero with an exact-match donor") {
        Matrix y = random_outcomes(rng, 4, 6);
        y.row(0) = y.row(3);
        const PanelData p = make_panel(y, 4);
        const auto dists = point_masses(p.unit_ids, {0.0, 1.0, 2.0, 3.0});
        FitOptions opt;
        opt.config = quick(1e-4, 50000);
        opt.lambda = 0.0;
        const auto r = fit(Method::james_bound, p, &dists, opt);
        CHECK(r.best_objective <= 1e-2);
        CHECK(*r.fit_term >= 0.0);
    }
    SUBCASE("perfect fit and matching distribution") {
        Matrix y = random_outcomes(rng, 3, 5);
        y.row(0) = y.row(1);
        const PanelData p = make_panel(y, 3);
        const auto dists = point_masses(p.unit_ids, {0.0, 0.0, 5.0});
        FitOptions opt;
        opt.config = quick(1e-3, 20000);
        opt.lambda = 1.0;
        const auto r = fit(Method::james_bound, p, &dists, opt);
        CHECK(r.best_objective <= 1e-2);
        CHECK(*r.lambda == 1.0);
        CHECK(r.objective_value == doctest::Approx(*r.fit_term + *r.w1_term));
    }
    SUBCASE("lambda required and non-negative") {
        const PanelData p = make_panel(random_outcomes(rng, 3, 5), 3);
        const auto dists = point_masses(p.unit_ids, {0.0, 1.0, 2.0});
        FitOptions opt;
        opt.config = quick(1e-3, 10);
        CHECK_THROWS_AS(fit(Method::james_bound, p, &dists, opt), InvalidArgument);
        opt.lambda = -1.0;
        CHECK_THROWS_AS(fit(Method::james_bound, p, &dists, opt), InvalidArgument);
    }
}

TEST_CASE("fit requires distributions for every unit") {
    Rng rng(10);
    const PanelData p = make_panel(random_outcomes(rng, 3, 5), 3);
    auto dists = point_masses({"u0", "u1"}, {0.0, 1.0});
    FitOptions opt;
    opt.config = quick(1e-3, 10);
    try {
        fit(Method::m_bound, p, &dists, opt);
        FAIL("expected InvalidArgument");
    } catch (const InvalidArgument& e) {
        CHECK(std::string(e.what()).find("u2") != std::string::npos);
    }
    CHECK_THROWS_AS(fit(Method::m_bound, p, nullptr, opt), InvalidArgument);
}

TEST_CASE("intervals_for picks the method's bound") {
    Rng rng(12);
    const PanelData p = make_panel(random_outcomes(rng, 3, 6), 3);
    const auto dists = point_masses(p.unit_ids, {0.5, 0.0, 1.0});
    FitOptions opt;
    opt.config = quick(1e-3, 200);
    opt.lambda = 1.0;
    const auto m = fit(Method::m_bound, p, &dists, opt);
    CHECK(intervals_for(m, p, 2.0)[0].half_width == m_bound_value(2.0, *m.w1_at_solution));
    const auto j = fit(Method::james_bound, p, &dists, opt);
    CHECK(intervals_for(j, p, 2.0)[0].half_width ==
          james_bound_value(p, j.weights, 2.0, *j.w1_at_solution));
    const auto s = fit(Method::standard, p, nullptr, opt);
    CHECK(!s.w1_at_solution);
    CHECK_THROWS_AS(intervals_for(s, p, 2.0), InvalidArgument);
    const auto sd = fit(Method::standard, p, &dists, opt);
    CHECK(sd.w1_at_solution);
}

TEST_CASE("placebo study") {
    Rng rng(14);
    SUBCASE("one result per donor, true target left out") {
        const PanelData p = make_panel(random_outcomes(rng, 3, 6), 3);
        const auto dists = point_masses(p.unit_ids, {0.0, 1.0, 2.0});
        PlaceboParams params;
        params.method = Method::m_bound;
        params.options.config = quick(1e-3, 100);
        params.ell = 1.0;
        const auto res = placebo_study(p, dists, params);
        REQUIRE(res.size() == 2);
        CHECK(res[0].unit == "u1");
        CHECK(res[1].unit == "u2");
        for (const auto& r : res) {
            CHECK(r.panel.unit_count() == 2);
            for (const auto& id : r.panel.unit_ids) CHECK(id != "u0");
            CHECK(r.intervals.size() == 6);
        }
    }
    SUBCASE("duplicate donors give zero W1 and zero pre-fit error") {
        Matrix y = random_outcomes(rng, 4, 6);
        y.row(2) = y.row(1);
        const PanelData p = make_panel(y, 3);
        auto dists = point_masses(p.unit_ids, {0.0, 1.0, 2.0, 3.0});
        dists.at("u2") = dists.at("u1");
        PlaceboParams params;
        params.method = Method::james_bound;
        params.options.config = quick(1e-4, 20000);
        params.options.lambda = 1.0;
        params.ell = 1.0;
        const auto res = placebo_study(p, dists, params);
        REQUIRE(res.size() == 3);
        CHECK(*res[0].fit.w1_at_solution <= 1e-3);
        CHECK(*res[0].fit.pre_fit_max_abs_error <= 1e-2);
    }
    SUBCASE("threads do not change results") {
        const PanelData p = make_panel(random_outcomes(rng, 5, 6), 3);
        const auto dists = point_masses(p.unit_ids, {0.0, 1.0, 2.0, 3.5, 4.0});
        PlaceboParams params;
        params.method = Method::m_bound;
        params.options.config = quick(1e-3, 500);
        params.ell = 1.0;
        params.threads = 1;
        const auto serial = placebo_study(p, dists, params);
        params.threads = 4;
        const auto parallel = placebo_study(p, dists, params);
        REQUIRE(serial.size() == parallel.size());
        for (std::size_t i = 0; i < serial.size(); ++i) {
            CHECK(serial[i].unit == parallel[i].unit);
            CHECK(serial[i].fit.weights == parallel[i].fit.weights);
        }
    }
    SUBCASE("missing distribution names the unit") {
        const PanelData p = make_panel(random_outcomes(rng, 3, 6), 3);
        const auto dists = point_masses({"u0", "u1"}, {0.0, 1.0});
        PlaceboParams params;
        try {
            placebo_study(p, dists, params);
            FAIL("expected InvalidArgument");
        } catch (const InvalidArgument& e) {
            CHECK(std::string(e.what()).find("u2") != std::string::npos);
        }
    }
}

TEST_CASE("James bound limits on the synthetic experiment") {
    const auto ex = generate_panel(DgpConfig{});
    const auto geo = make_geometry(ex.panel, ex.distributions);
    const SolverOptions exact;

    const auto m = fit_m_bound(geo, quick(5e-6, 20000), exact, &ex.panel);
    // Large lambda: the W1 term dominates; scale the step to keep the same effective rate.
    const double big = 1000.0;
    const auto j = fit_james_bound(ex.panel, geo, big, quick(5e-6 / big, 20000), exact);
    CHECK(*j.w1_at_solution <= 1.05 * *m.w1_at_solution);

    const auto s = fit_standard_sc(ex.panel, quick(5e-6, 20000), &geo);
    const auto j0 = fit_james_bound(ex.panel, geo, 0.0, quick(1e-6, 20000), exact);
    const double j0_err = pre_fit_max_abs_error(ex.panel, j0.best_weights);
    CHECK(j0_err <= *s.pre_fit_max_abs_error);
    CHECK(j0_err <= *m.pre_fit_max_abs_error);
}
