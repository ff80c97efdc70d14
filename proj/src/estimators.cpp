#include "mbsc/estimators.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <cmath>
#include <thread>

#include "mbsc/error.hpp"

namespace mbsc {

std::string to_string(Method method) {
    switch (method) {
        case Method::standard: return "standard";
        case Method::m_bound: return "m_bound";
        case Method::james_bound: return "james_bound";
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    if (name == "standard") return Method::standard;
    if (name == "m" || name == "m_bound") return Method::m_bound;
    if (name == "james" || name == "james_bound") return Method::james_bound;
    throw InvalidArgument("unknown method '" + name + "' (expected standard, m or james)");
}

// ---------------------------------------------------------------------------
// Cause geometry and the W1 objective

CauseGeometry::CauseGeometry(const DiscreteDistribution& p0, std::span<const DiscreteDistribution> donors) {
    init(p0, donors, nullptr);
}

CauseGeometry::CauseGeometry(const DiscreteDistribution& p0, std::span<const DiscreteDistribution> donors,
                             const Vector& scale) {
    init(p0, donors, &scale);
}

void CauseGeometry::init(const DiscreteDistribution& p0, std::span<const DiscreteDistribution> donors,
                         const Vector* scale) {
    if (donors.empty()) {
        throw InvalidArgument("cause geometry: no donor distributions");
    }
    for (const auto& d : donors) {
        if (d.dimension() != p0.dimension()) {
            throw InvalidArgument("cause geometry: donor atoms have dimension " +
                                  std::to_string(d.dimension()) + ", target atoms " +
                                  std::to_string(p0.dimension()));
        }
    }
    p0_ = p0.probs();
    donor_atoms_ = union_atoms(donors);
    donor_probs_.resize(donor_atoms_->size(), static_cast<Eigen::Index>(donors.size()));
    for (std::size_t j = 0; j < donors.size(); ++j) {
        donor_probs_.col(static_cast<Eigen::Index>(j)) = donors[j].reindexed(donor_atoms_).probs();
    }
    cost_ = scale ? l1_cost_matrix(p0.atoms()->points(), donor_atoms_->points(), *scale)
                  : l1_cost_matrix(p0.atoms()->points(), donor_atoms_->points());
}

CauseGeometry make_geometry(const PanelData& panel, const DistributionTable& dists,
                            const std::optional<Vector>& scale) {
    auto lookup = [&](const std::string& unit) -> const DiscreteDistribution& {
        auto it = dists.find(unit);
        if (it == dists.end()) {
            throw InvalidArgument("missing distribution for unit '" + unit + "'");
        }
        return it->second;
    };
    const DiscreteDistribution& p0 = lookup(panel.target_id());
    std::vector<DiscreteDistribution> donors;
    for (const auto& id : panel.donor_ids()) donors.push_back(lookup(id));
    return scale ? CauseGeometry(p0, donors, *scale) : CauseGeometry(p0, donors);
}

namespace {

double median_entry(const Matrix& m) {
    std::vector<double> v(m.data(), m.data() + m.size());
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

}  // namespace

W1Objective::W1Objective(std::shared_ptr<const CauseGeometry> geometry, SolverOptions solver)
    : geometry_(std::move(geometry)), solver_(solver) {
    if (solver_.kind == SolverKind::exact) {
        exact_ = std::make_unique<NetworkSimplex>(geometry_->cost());
    } else {
        if (!(solver_.epsilon > 0.0)) {
            throw InvalidArgument("entropic solver: epsilon must be positive");
        }
        double unit = median_entry(geometry_->cost());
        if (!(unit > 0.0)) unit = geometry_->cost().maxCoeff();
        if (!(unit > 0.0)) unit = 1.0;
        epsilon_ = solver_.epsilon * unit;
    }
}

ObjectiveEval W1Objective::operator()(const Weights& w) {
    const Vector q = geometry_->donor_probs() * w.values();
    TransportSolution sol;
    if (exact_) {
        sol = exact_->solve(geometry_->p0(), q);
    } else {
        EntropicOptions opt;
        opt.epsilon = epsilon_;
        opt.max_iter = solver_.max_iter;
        opt.tol = solver_.tol;
        sol = w1_entropic(geometry_->p0(), q, geometry_->cost(), opt);
    }
    return {sol.value, w1_weight_gradient(geometry_->donor_probs(), w, sol)};
}

double w1_at(const CauseGeometry& geometry, const Weights& w) {
    if (w.size() != geometry.donor_count()) {
        throw InvalidArgument("w1_at: " + std::to_string(w.size()) + " weights for " +
                              std::to_string(geometry.donor_count()) + " donors");
    }
    return w1_exact(geometry.p0(), geometry.donor_probs() * w.values(), geometry.cost()).value;
}

// ---------------------------------------------------------------------------
// Outcome helpers

namespace {

void check_weights(const PanelData& panel, const Weights& w) {
    if (w.size() != panel.donor_count()) {
        throw InvalidArgument("weights have length " + std::to_string(w.size()) + ", panel has " +
                              std::to_string(panel.donor_count()) + " donors");
    }
}

void require_pre_period(const PanelData& panel) {
    if (panel.t0 < 1) {
        throw InvalidArgument("no pre-intervention periods (t0 = 0)");
    }
}

void copy_descent(FitResult& out, PgdResult&& r) {
    out.weights = std::move(r.weights);
    out.objective_value = r.value;
    out.best_weights = std::move(r.best_weights);
    out.best_objective = r.best_value;
    out.epochs_run = r.epochs_run;
    out.stopped_early = r.stopped_early;
    out.trace = std::move(r.trace);
}

}  // namespace

Vector synthetic_series(const PanelData& panel, const Weights& w) {
    check_weights(panel, w);
    return synthetic_series(panel.donor_outcomes(), w.values());
}

double pre_fit_max_abs_error(const PanelData& panel, const Weights& w) {
    require_pre_period(panel);
    const Vector residual = panel.target_outcomes() - synthetic_series(panel, w);
    return residual.head(panel.t0).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Estimators

FitResult fit_standard_sc(const PanelData& panel, const PgdConfig& config, const CauseGeometry* geometry) {
    panel.validate();
    require_pre_period(panel);
    const Matrix pre = panel.donor_outcomes().leftCols(panel.t0);  // J x T0
    const Vector target = panel.target_outcomes().head(panel.t0);

    Objective objective = [&](const Weights& w) {
        const Vector residual = target - pre.transpose() * w.values();
        return ObjectiveEval{residual.squaredNorm(), -2.0 * (pre * residual)};
    };
    FitResult out;
    out.method = Method::standard;
    copy_descent(out, pgd_minimize(objective, Weights::uniform(panel.donor_count()), config));
    out.fit_term = out.objective_value;
    out.pre_fit_max_abs_error = pre_fit_max_abs_error(panel, out.weights);
    if (geometry) {
        if (geometry->donor_count() != panel.donor_count()) {
            throw InvalidArgument("fit_standard_sc: geometry donor count differs from the panel's");
        }
        out.w1_at_solution = w1_at(*geometry, out.weights);
    }
    return out;
}

FitResult fit_m_bound(const CauseGeometry& geometry, const PgdConfig& config,
                      const SolverOptions& solver, const PanelData* panel) {
    auto shared = std::make_shared<const CauseGeometry>(geometry);
    W1Objective w1(shared, solver);
    Objective objective = [&](const Weights& w) { return w1(w); };

    FitResult out;
    out.method = Method::m_bound;
    copy_descent(out, pgd_minimize(objective, Weights::uniform(geometry.donor_count()), config));
    out.w1_term = out.objective_value;
    out.w1_at_solution = w1_at(geometry, out.weights);
    if (panel) {
        check_weights(*panel, out.weights);
        if (panel->t0 >= 1) out.pre_fit_max_abs_error = pre_fit_max_abs_error(*panel, out.weights);
    }
    return out;
}

FitResult fit_m_bound(const DiscreteDistribution& p0, std::span<const DiscreteDistribution> donors,
                      const PgdConfig& config, const SolverOptions& solver) {
    return fit_m_bound(CauseGeometry(p0, donors), config, solver);
}

FitResult fit_james_bound(const PanelData& panel, const CauseGeometry& geometry, double lambda,
                          const PgdConfig& config, const SolverOptions& solver) {
    panel.validate();
    require_pre_period(panel);
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw InvalidArgument("fit_james_bound: lambda must be a non-negative number");
    }
    if (geometry.donor_count() != panel.donor_count()) {
        throw InvalidArgument("fit_james_bound: geometry donor count differs from the panel's");
    }
    const Matrix pre = panel.donor_outcomes().leftCols(panel.t0);
    const Vector target = panel.target_outcomes().head(panel.t0);
    auto shared = std::make_shared<const CauseGeometry>(geometry);
    W1Objective w1(shared, solver);

    Objective objective = [&](const Weights& w) {
        const Vector residual = target - pre.transpose() * w.values();
        Eigen::Index worst = 0;  // smallest period index wins ties
        for (Eigen::Index t = 1; t < residual.size(); ++t) {
            if (std::abs(residual[t]) > std::abs(residual[worst])) worst = t;
        }
        const double r = residual[worst];
        const double sign = (r > 0.0) - (r < 0.0);
        ObjectiveEval e{std::abs(r), -sign * pre.col(worst)};
        if (lambda > 0.0) {
            const ObjectiveEval transport = w1(w);
            e.value += lambda * transport.value;
            e.subgradient += lambda * transport.subgradient;
        }
        return e;
    };

    FitResult out;
    out.method = Method::james_bound;
    out.lambda = lambda;
    copy_descent(out, pgd_minimize(objective, Weights::uniform(panel.donor_count()), config));
    out.pre_fit_max_abs_error = pre_fit_max_abs_error(panel, out.weights);
    out.fit_term = out.pre_fit_max_abs_error;
    out.w1_at_solution = w1_at(geometry, out.weights);
    out.w1_term = out.objective_value - *out.fit_term;
    return out;
}

FitResult fit_james_bound(const PanelData& panel, const DiscreteDistribution& p0,
                          std::span<const DiscreteDistribution> donors, double lambda,
                          const PgdConfig& config, const SolverOptions& solver) {
    return fit_james_bound(panel, CauseGeometry(p0, donors), lambda, config, solver);
}

// ---------------------------------------------------------------------------
// Bounds and intervals

double m_bound_value(double ell, double w1) {
    if (!(ell >= 0.0) || !(w1 >= 0.0)) {
        throw InvalidArgument("m_bound_value: ell and w1 must be non-negative");
    }
    return ell * w1;
}

std::vector<MisspecInterval> constant_intervals(const Vector& synthetic, double half_width) {
    if (!(half_width >= 0.0)) {
        throw InvalidArgument("interval half-width must be non-negative");
    }
    std::vector<MisspecInterval> out;
    out.reserve(static_cast<std::size_t>(synthetic.size()));
    for (Eigen::Index t = 0; t < synthetic.size(); ++t) {
        out.push_back({t, synthetic[t], synthetic[t] - half_width, synthetic[t] + half_width, half_width});
    }
    return out;
}

std::vector<MisspecInterval> m_intervals(const PanelData& panel, const Weights& w, double ell, double w1) {
    const double half = m_bound_value(ell, w1);
    return constant_intervals(synthetic_series(panel, w), half);
}

double james_bound_value(const PanelData& panel, const Weights& w, double ell, double w1_observed) {
    return m_bound_value(ell, w1_observed) + pre_fit_max_abs_error(panel, w);
}

std::vector<MisspecInterval> james_intervals(const PanelData& panel, const Weights& w, double ell,
                                             double w1_observed) {
    const double half = james_bound_value(panel, w, ell, w1_observed);
    return constant_intervals(synthetic_series(panel, w), half);
}

CoverageReport coverage_report(const Vector& observed, Eigen::Index t0,
                               const std::vector<MisspecInterval>& intervals) {
    if (static_cast<Eigen::Index>(intervals.size()) != observed.size()) {
        throw InvalidArgument("coverage_report: " + std::to_string(intervals.size()) +
                              " intervals for " + std::to_string(observed.size()) + " periods");
    }
    CoverageReport report;
    report.inside.reserve(intervals.size());
    for (Eigen::Index t = 0; t < observed.size(); ++t) {
        const auto& iv = intervals[static_cast<std::size_t>(t)];
        if (iv.period != t) {
            throw InvalidArgument("coverage_report: interval " + std::to_string(t) +
                                  " is for period " + std::to_string(iv.period));
        }
        const bool in = observed[t] >= iv.lower && observed[t] <= iv.upper;
        report.inside.push_back(in);
        if (t < t0) {
            ++report.pre_total;
            report.pre_inside += in;
        } else {
            ++report.post_total;
            report.post_inside += in;
        }
    }
    return report;
}

CoverageReport coverage_report(const PanelData& panel, const std::vector<MisspecInterval>& intervals) {
    return coverage_report(panel.target_outcomes(), panel.t0, intervals);
}

// ---------------------------------------------------------------------------
// Dispatch and placebo

FitResult fit(Method method, const PanelData& panel, const DistributionTable* dists,
              const FitOptions& options) {
    panel.validate();
    switch (method) {
        case Method::standard: {
            if (!dists) return fit_standard_sc(panel, options.config);
            const CauseGeometry geometry = make_geometry(panel, *dists, options.scale);
            return fit_standard_sc(panel, options.config, &geometry);
        }
        case Method::m_bound: {
            if (!dists) throw InvalidArgument("the M-bound estimator needs cause distributions");
            const CauseGeometry geometry = make_geometry(panel, *dists, options.scale);
            return fit_m_bound(geometry, options.config, options.solver, &panel);
        }
        case Method::james_bound: {
            if (!dists) throw InvalidArgument("the James-bound estimator needs cause distributions");
            if (!options.lambda) throw InvalidArgument("the James-bound estimator needs lambda");
            const CauseGeometry geometry = make_geometry(panel, *dists, options.scale);
            return fit_james_bound(panel, geometry, *options.lambda, options.config, options.solver);
        }
    }
    throw InvalidArgument("unknown method");
}

std::vector<MisspecInterval> intervals_for(const FitResult& result, const PanelData& panel, double ell) {
    if (!result.w1_at_solution) {
        throw InvalidArgument("intervals need W1 at the solution; fit with cause distributions");
    }
    if (result.method == Method::james_bound) {
        return james_intervals(panel, result.weights, ell, *result.w1_at_solution);
    }
    return m_intervals(panel, result.weights, ell, *result.w1_at_solution);
}

std::vector<PlaceboResult> placebo_study(const PanelData& panel, const DistributionTable& dists,
                                         const PlaceboParams& params) {
    panel.validate();
    if (!(params.ell >= 0.0)) {
        throw InvalidArgument("placebo_study: ell must be non-negative");
    }
    for (const auto& id : panel.unit_ids) {
        if (!dists.contains(id)) {
            throw InvalidArgument("missing distribution for unit '" + id + "'");
        }
    }
    const auto donors = panel.donor_indices();
    if (donors.size() < 2) {
        throw InvalidArgument("placebo_study: need at least 2 donors");
    }

    std::vector<PlaceboResult> results(donors.size());
    auto run_one = [&](std::size_t slot) {
        const Eigen::Index unit = donors[slot];
        PlaceboResult& r = results[slot];
        r.unit = panel.unit_ids[static_cast<std::size_t>(unit)];
        r.panel = panel.subpanel(donors, unit);
        r.fit = fit(params.method, r.panel, &dists, params.options);
        r.intervals = intervals_for(r.fit, r.panel, params.ell);
        r.coverage = coverage_report(r.panel, r.intervals);
    };

    unsigned threads = params.threads ? params.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(donors.size()));
    if (threads <= 1) {
        for (std::size_t s = 0; s < donors.size(); ++s) run_one(s);
        return results;
    }

    std::vector<std::exception_ptr> errors(donors.size());
    std::atomic<std::size_t> next{0};
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t s = next++; s < donors.size(); s = next++) {
                    try {
                        run_one(s);
                    } catch (...) {
                        errors[s] = std::current_exception();
                    }
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

}  // namespace mbsc
