#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mbsc/atoms.hpp"
#include "mbsc/panel.hpp"
#include "mbsc/simplex.hpp"
#include "mbsc/transport.hpp"

namespace mbsc {

enum class Method { standard, m_bound, james_bound };

std::string to_string(Method method);
/// Accepts "standard", "m", "m_bound", "james", "james_bound".
Method parse_method(const std::string& name);

enum class SolverKind { exact, entropic };

struct SolverOptions {
    SolverKind kind = SolverKind::exact;
    /// Entropic regularization as a multiple of the median cost entry.
    double epsilon = 0.01;
    std::int64_t max_iter = 100000;
    double tol = 1e-10;
};

using DistributionTable = std::map<std::string, DiscreteDistribution>;

/// Target distribution, donor masses re-indexed onto the union of donor atoms, and the
/// target-atoms x donor-atoms L1 cost, computed once per fit.
class CauseGeometry {
public:
    CauseGeometry(const DiscreteDistribution& p0, std::span<const DiscreteDistribution> donors);
    CauseGeometry(const DiscreteDistribution& p0, std::span<const DiscreteDistribution> donors,
                  const Vector& scale);

    [[nodiscard]] const Vector& p0() const noexcept { return p0_; }
    [[nodiscard]] const Matrix& donor_probs() const noexcept { return donor_probs_; }
    [[nodiscard]] const Matrix& cost() const noexcept { return cost_; }
    [[nodiscard]] Eigen::Index donor_count() const noexcept { return donor_probs_.cols(); }
    [[nodiscard]] const AtomSetPtr& donor_atoms() const noexcept { return donor_atoms_; }

private:
    void init(const DiscreteDistribution& p0, std::span<const DiscreteDistribution> donors,
              const Vector* scale);

    Vector p0_;
    AtomSetPtr donor_atoms_;
    Matrix donor_probs_;
    Matrix cost_;
};

/// Geometry for the panel's target and donors (panel order). Throws InvalidArgument naming
/// the first unit without a distribution.
CauseGeometry make_geometry(const PanelData& panel, const DistributionTable& dists,
                            const std::optional<Vector>& scale = std::nullopt);

/// w -> W1(p0, sum_j w_j p_j) with its weight gradient. Keeps solver state between calls,
/// so one instance serves one descent run.
class W1Objective {
public:
    W1Objective(std::shared_ptr<const CauseGeometry> geometry, SolverOptions solver);

    ObjectiveEval operator()(const Weights& w);
    [[nodiscard]] double epsilon() const noexcept { return epsilon_; }

private:
    std::shared_ptr<const CauseGeometry> geometry_;
    SolverOptions solver_;
    double epsilon_ = 0.0;
    std::unique_ptr<NetworkSimplex> exact_;
};

/// Exact W1 between p0 and the mixture at w.
double w1_at(const CauseGeometry& geometry, const Weights& w);

struct FitResult {
    Method method = Method::standard;
    Weights weights;
    double objective_value = 0.0;
    /// Outcome-fit component: pre-period SSE (standard) or max abs error (James).
    std::optional<double> fit_term;
    /// lambda * W1 for James, W1 (solver objective) for the M bound.
    std::optional<double> w1_term;
    std::optional<double> w1_at_solution;
    std::optional<double> pre_fit_max_abs_error;
    std::optional<double> lambda;
    Weights best_weights;
    double best_objective = 0.0;
    std::int64_t epochs_run = 0;
    bool stopped_early = false;
    std::vector<TracePoint> trace;
};

/// Minimizes sum_{t < t0} (y_0t - sum_j w_j y_jt)^2. With `geometry`, also reports W1 at the
/// solution.
FitResult fit_standard_sc(const PanelData& panel, const PgdConfig& config,
                          const CauseGeometry* geometry = nullptr);

/// Minimizes W1(p0, mixture(w)). Outcomes are never read; pass `panel` only to have the
/// pre-period fit error reported.
FitResult fit_m_bound(const CauseGeometry& geometry, const PgdConfig& config,
                      const SolverOptions& solver, const PanelData* panel = nullptr);
FitResult fit_m_bound(const DiscreteDistribution& p0, std::span<const DiscreteDistribution> donors,
                      const PgdConfig& config, const SolverOptions& solver);

/// Minimizes max_{t < t0} |y_0t - sum_j w_j y_jt| + lambda * W1(p0, mixture(w)).
FitResult fit_james_bound(const PanelData& panel, const CauseGeometry& geometry, double lambda,
                          const PgdConfig& config, const SolverOptions& solver);
FitResult fit_james_bound(const PanelData& panel, const DiscreteDistribution& p0,
                          std::span<const DiscreteDistribution> donors, double lambda,
                          const PgdConfig& config, const SolverOptions& solver);

/// y_hat_0t = sum_j w_j y_jt for every period.
Vector synthetic_series(const PanelData& panel, const Weights& w);

/// Per-period synthetic series from a donors x periods outcome block.
template <typename DerivedY, typename DerivedW>
Vec<typename DerivedY::Scalar> synthetic_series(const Eigen::MatrixBase<DerivedY>& donor_outcomes,
                                                const Eigen::MatrixBase<DerivedW>& w) {
    return donor_outcomes.transpose() * w;
}

double pre_fit_max_abs_error(const PanelData& panel, const Weights& w);

struct MisspecInterval {
    Eigen::Index period = 0;
    double synthetic = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double half_width = 0.0;
};

/// M = ell * w1.
double m_bound_value(double ell, double w1);
std::vector<MisspecInterval> m_intervals(const PanelData& panel, const Weights& w, double ell,
                                         double w1);

/// ell * w1 + max_{t < t0} |y_0t - y_hat_0t|, observed outcomes standing in for their
/// expectations. The unobservable third term of the bound is not included.
double james_bound_value(const PanelData& panel, const Weights& w, double ell, double w1_observed);
std::vector<MisspecInterval> james_intervals(const PanelData& panel, const Weights& w, double ell,
                                             double w1_observed);

/// Intervals y_hat_t +- half_width.
std::vector<MisspecInterval> constant_intervals(const Vector& synthetic, double half_width);

struct CoverageReport {
    std::vector<bool> inside;
    Eigen::Index pre_inside = 0;
    Eigen::Index pre_total = 0;
    Eigen::Index post_inside = 0;
    Eigen::Index post_total = 0;

    [[nodiscard]] bool all_inside() const { return pre_inside + post_inside == pre_total + post_total; }
};

CoverageReport coverage_report(const PanelData& panel, const std::vector<MisspecInterval>& intervals);
CoverageReport coverage_report(const Vector& observed, Eigen::Index t0,
                               const std::vector<MisspecInterval>& intervals);

struct FitOptions {
    PgdConfig config;
    SolverOptions solver;
    std::optional<double> lambda;
    std::optional<Vector> scale;
};

/// Runs `method` on the panel's target. Distributions are required for m_bound and
/// james_bound; for standard they are optional and only used to report W1.
FitResult fit(Method method, const PanelData& panel, const DistributionTable* dists,
              const FitOptions& options);

/// Intervals matching the method: James intervals for james_bound, M intervals otherwise.
/// Throws InvalidArgument when the fit carries no W1.
std::vector<MisspecInterval> intervals_for(const FitResult& result, const PanelData& panel, double ell);

struct PlaceboParams {
    Method method = Method::m_bound;
    FitOptions options;
    double ell = 0.0;
    unsigned threads = 0;  // 0 = hardware concurrency
};

struct PlaceboResult {
    std::string unit;
    PanelData panel;  // the placebo panel: unit as target, remaining donors
    FitResult fit;
    std::vector<MisspecInterval> intervals;
    CoverageReport coverage;
};

/// Each donor in turn becomes the target, fitted against the other donors (the true target
/// is left out of every pool). Results come back in panel donor order.
std::vector<PlaceboResult> placebo_study(const PanelData& panel, const DistributionTable& dists,
                                         const PlaceboParams& params);

}  // namespace mbsc
