#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "mbsc/atoms.hpp"
#include "mbsc/linalg.hpp"

namespace mbsc {

using SparsePlan = Eigen::SparseMatrix<double>;

/// Result of one optimal-transport evaluation with L1 ground cost.
///
/// For the exact solver `value` is W1. For the entropic solver `value` is the regularized
/// objective <plan, cost> + eps * KL(plan | p x q), whose gradient in the target masses is
/// exactly `dual_target`; `transport_cost` is always <plan, cost>.
///
/// Duals are normalized so that dual_target is 0 at the first target atom with positive
/// mass (dual_source absorbs the shift).
struct TransportSolution {
    double value = 0.0;
    double transport_cost = 0.0;
    SparsePlan plan;
    Vector dual_source;
    Vector dual_target;
    bool regularized = false;
    bool converged = true;
    std::int64_t iterations = 0;
    double marginal_error = 0.0;
};

/// Exact solver for the balanced transportation problem (network simplex on the complete
/// bipartite graph). The instance keeps its last optimal basis: a later `solve` with
/// slightly different masses restarts from it with dual pivots, which is what makes
/// per-epoch W1 evaluation cheap inside projected descent.
class NetworkSimplex {
public:
    struct Stats {
        std::int64_t cold_starts = 0;
        std::int64_t primal_pivots = 0;
        std::int64_t dual_pivots = 0;
        std::int64_t warm_solves = 0;
    };

    explicit NetworkSimplex(Matrix cost);

    /// Source masses p (rows of cost), target masses q (columns). Both non-negative and
    /// balanced to 1e-9. Throws InvalidArgument otherwise.
    TransportSolution solve(const Vector& p, const Vector& q);

    /// Drops the stored basis; the next solve starts from the north-west corner rule.
    void reset() noexcept { has_basis_ = false; }

    [[nodiscard]] const Matrix& cost() const noexcept { return cost_; }
    [[nodiscard]] const Stats& stats() const noexcept { return stats_; }

private:
    struct Arc {
        int source;
        int sink;
    };

    void cold_start();
    void rebuild_tree();
    void compute_flows();
    void compute_potentials();
    bool primal_phase();
    bool dual_phase();
    [[nodiscard]] double reduced_cost(int i, int k) const {
        return cost_(i, k) - potential_[static_cast<std::size_t>(i)] -
               potential_[static_cast<std::size_t>(n_ + k)];
    }
    [[nodiscard]] TransportSolution extract() const;

    Matrix cost_;
    int n_ = 0;
    int m_ = 0;
    double cost_tol_ = 0.0;
    Vector supply_;  // p then -q, length n + m
    Vector p_;
    Vector q_;

    bool has_basis_ = false;
    std::vector<Arc> basis_;  // n + m - 1 arcs forming a spanning tree
    // Tree in DFS preorder from node 0. Subtree of v is preorder_[pos_[v], pos_[v] + size_[v]).
    std::vector<int> preorder_;
    std::vector<int> pos_;
    std::vector<int> size_;
    std::vector<int> parent_;
    std::vector<int> parent_arc_;
    std::vector<int> depth_;
    std::vector<double> flow_;       // per basis arc
    std::vector<double> potential_;  // u for sources, v for sinks

    // Scratch buffers.
    std::vector<int> adj_start_;
    std::vector<int> adj_fill_;
    std::vector<std::pair<int, int>> adj_;  // (neighbor, basis arc)
    std::vector<char> seen_;
    std::vector<int> stack_;
    std::vector<double> excess_;
    std::vector<int> outside_sources_;
    std::vector<int> inside_sinks_;
    Stats stats_;
    std::int64_t cold_cost_ = 0;  // primal pivots spent by the latest cold start
};

/// Exact W1 between p (source) and q (target) under `cost`.
TransportSolution w1_exact(const Vector& p, const Vector& q, const Matrix& cost);
TransportSolution w1_exact(const DiscreteDistribution& p, const DiscreteDistribution& q,
                           const Matrix& cost);

enum class SinkhornMode { log_domain, scaling };

struct EntropicOptions {
    double epsilon = 1e-2;  // absolute, in cost units
    std::int64_t max_iter = 100000;
    double tol = 1e-10;     // L1 violation of the source marginal
    SinkhornMode mode = SinkhornMode::log_domain;
};

/// Entropically regularized transport via alternating (Sinkhorn) scaling.
TransportSolution w1_entropic(const Vector& p, const Vector& q, const Matrix& cost,
                              const EntropicOptions& options);
TransportSolution w1_entropic(const DiscreteDistribution& p, const DiscreteDistribution& q,
                              const Matrix& cost, const EntropicOptions& options);

/// Gradient of w -> W1(p0, sum_j w_j donor_j): g_j = sum_k dual_target_k * donor_j(k).
/// `donor_probs` holds one donor per column, on the solution's target atoms.
/// Throws InvalidArgument if the plan's target marginal is not donor_probs * w (to 1e-6).
Vector w1_weight_gradient(const Matrix& donor_probs, const Weights& w,
                          const TransportSolution& solution);
Vector w1_weight_gradient(const DiscreteDistribution& p0,
                          std::span<const DiscreteDistribution> donors, const Weights& w,
                          const TransportSolution& solution);

/// Shifts duals so dual_target is zero at the first target atom with positive mass.
void normalize_duals(Vector& dual_source, Vector& dual_target, const Vector& q);

}  // namespace mbsc
