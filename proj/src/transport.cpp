#include "mbsc/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "mbsc/error.hpp"

namespace mbsc {

namespace {

constexpr double kBalanceTolerance = 1e-9;
constexpr double kFlowTolerance = 1e-13;

void check_masses(const Vector& v, const char* what) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]) || v[i] < 0.0) {
            throw InvalidArgument(std::string("transport: ") + what + " mass " + std::to_string(i) +
                                  " is negative or non-finite");
        }
    }
}

void check_instance(const Vector& p, const Vector& q, const Matrix& cost) {
    if (cost.rows() != p.size() || cost.cols() != q.size()) {
        throw InvalidArgument("transport: cost is " + std::to_string(cost.rows()) + "x" +
                              std::to_string(cost.cols()) + " but masses have lengths " +
                              std::to_string(p.size()) + " and " + std::to_string(q.size()));
    }
    check_masses(p, "source");
    check_masses(q, "target");
    const double sp = p.sum();
    const double sq = q.sum();
    if (!(sp > 0.0) || !(sq > 0.0)) {
        throw InvalidArgument("transport: zero total mass");
    }
    if (std::abs(sp - sq) > kBalanceTolerance * std::max(1.0, sp)) {
        throw InvalidArgument("transport: unbalanced masses (" + std::to_string(sp) + " vs " +
                              std::to_string(sq) + ")");
    }
}

}  // namespace

void normalize_duals(Vector& dual_source, Vector& dual_target, const Vector& q) {
    for (Eigen::Index k = 0; k < q.size(); ++k) {
        if (q[k] > 0.0) {
            const double shift = dual_target[k];
            dual_target.array() -= shift;
            dual_source.array() += shift;
            return;
        }
    }
}

// ---------------------------------------------------------------------------
// NetworkSimplex

NetworkSimplex::NetworkSimplex(Matrix cost) : cost_(std::move(cost)) {
    if (cost_.rows() == 0 || cost_.cols() == 0) {
        throw InvalidArgument("NetworkSimplex: empty cost matrix");
    }
    if (!cost_.allFinite()) {
        throw InvalidArgument("NetworkSimplex: non-finite cost entry");
    }
    n_ = static_cast<int>(cost_.rows());
    m_ = static_cast<int>(cost_.cols());
    cost_tol_ = 1e-12 * std::max(1.0, cost_.cwiseAbs().maxCoeff());
    const auto nodes = static_cast<std::size_t>(n_ + m_);
    pos_.assign(nodes, 0);
    size_.assign(nodes, 0);
    parent_.assign(nodes, -1);
    parent_arc_.assign(nodes, -1);
    depth_.assign(nodes, 0);
    potential_.assign(nodes, 0.0);
}

void NetworkSimplex::cold_start() {
    ++stats_.cold_starts;
    // North-west corner rule: a staircase from (0, 0) to (n-1, m-1) is always a spanning tree.
    basis_.clear();
    basis_.reserve(static_cast<std::size_t>(n_ + m_ - 1));
    Vector a = p_;
    Vector b = q_;
    int i = 0;
    int k = 0;
    for (int step = 0; step < n_ + m_ - 1; ++step) {
        basis_.push_back({i, k});
        const double amount = std::min(a[i], b[k]);
        a[i] -= amount;
        b[k] -= amount;
        if (i == n_ - 1) {
            ++k;
        } else if (k == m_ - 1) {
            ++i;
        } else if (a[i] <= b[k]) {
            ++i;
        } else {
            ++k;
        }
    }
    flow_.assign(basis_.size(), 0.0);
    rebuild_tree();
    compute_flows();
    compute_potentials();
}

void NetworkSimplex::rebuild_tree() {
    const auto nodes = static_cast<std::size_t>(n_ + m_);
    // Adjacency of the basis tree in compressed rows; buffers are reused across pivots.
    adj_start_.assign(nodes + 1, 0);
    for (const Arc& arc : basis_) {
        ++adj_start_[static_cast<std::size_t>(arc.source) + 1];
        ++adj_start_[static_cast<std::size_t>(n_ + arc.sink) + 1];
    }
    for (std::size_t v = 0; v < nodes; ++v) adj_start_[v + 1] += adj_start_[v];
    adj_fill_.assign(adj_start_.begin(), adj_start_.end() - 1);
    adj_.resize(2 * basis_.size());
    for (std::size_t a = 0; a < basis_.size(); ++a) {
        const auto s = static_cast<std::size_t>(basis_[a].source);
        const auto t = static_cast<std::size_t>(n_ + basis_[a].sink);
        adj_[static_cast<std::size_t>(adj_fill_[s]++)] = {static_cast<int>(t), static_cast<int>(a)};
        adj_[static_cast<std::size_t>(adj_fill_[t]++)] = {static_cast<int>(s), static_cast<int>(a)};
    }

    preorder_.clear();
    std::fill(parent_.begin(), parent_.end(), -1);
    std::fill(parent_arc_.begin(), parent_arc_.end(), -1);
    seen_.assign(nodes, 0);
    stack_.clear();
    stack_.push_back(0);
    seen_[0] = 1;
    depth_[0] = 0;
    while (!stack_.empty()) {
        const int v = stack_.back();
        stack_.pop_back();
        const auto vs = static_cast<std::size_t>(v);
        pos_[vs] = static_cast<int>(preorder_.size());
        preorder_.push_back(v);
        for (int e = adj_start_[vs + 1] - 1; e >= adj_start_[vs]; --e) {
            const auto [w, arc] = adj_[static_cast<std::size_t>(e)];
            const auto ws = static_cast<std::size_t>(w);
            if (seen_[ws]) continue;
            seen_[ws] = 1;
            parent_[ws] = v;
            parent_arc_[ws] = arc;
            depth_[ws] = depth_[vs] + 1;
            stack_.push_back(w);
        }
    }
    if (preorder_.size() != nodes) {
        throw NumericalError("NetworkSimplex: basis is not a spanning tree");
    }
    std::fill(size_.begin(), size_.end(), 1);
    for (auto it = preorder_.rbegin(); it != preorder_.rend(); ++it) {
        const int p = parent_[static_cast<std::size_t>(*it)];
        if (p >= 0) size_[static_cast<std::size_t>(p)] += size_[static_cast<std::size_t>(*it)];
    }
}

void NetworkSimplex::compute_flows() {
    auto& excess = excess_;
    excess.resize(static_cast<std::size_t>(n_ + m_));
    for (int i = 0; i < n_; ++i) excess[static_cast<std::size_t>(i)] = p_[i];
    for (int k = 0; k < m_; ++k) excess[static_cast<std::size_t>(n_ + k)] = -q_[k];
    for (auto it = preorder_.rbegin(); it + 1 != preorder_.rend(); ++it) {
        const auto v = static_cast<std::size_t>(*it);
        const auto a = static_cast<std::size_t>(parent_arc_[v]);
        flow_[a] = (*it < n_) ? excess[v] : -excess[v];
        excess[static_cast<std::size_t>(parent_[v])] += excess[v];
    }
}

void NetworkSimplex::compute_potentials() {
    potential_[static_cast<std::size_t>(preorder_.front())] = 0.0;
    for (std::size_t idx = 1; idx < preorder_.size(); ++idx) {
        const auto v = static_cast<std::size_t>(preorder_[idx]);
        const Arc arc = basis_[static_cast<std::size_t>(parent_arc_[v])];
        const double c = cost_(arc.source, arc.sink);
        if (preorder_[idx] >= n_) {
            potential_[v] = c - potential_[static_cast<std::size_t>(arc.source)];
        } else {
            potential_[v] = c - potential_[static_cast<std::size_t>(n_ + arc.sink)];
        }
    }
}

bool NetworkSimplex::primal_phase() {
    const std::int64_t limit = 100LL * n_ * m_ + 10000;
    std::vector<int> decreasing;
    for (std::int64_t iter = 0; iter < limit; ++iter) {
        // Bland's rule: first arc (row-major) with negative reduced cost enters.
        int enter_i = -1;
        int enter_k = -1;
        for (int i = 0; i < n_ && enter_i < 0; ++i) {
            for (int k = 0; k < m_; ++k) {
                if (reduced_cost(i, k) < -cost_tol_) {
                    enter_i = i;
                    enter_k = k;
                    break;
                }
            }
        }
        if (enter_i < 0) return true;

        // Cycle = entering arc + tree path between its endpoints. Walking the tree from the
        // sink side, arcs entered at a sink lose flow; from the source side, arcs entered at
        // a source lose flow.
        decreasing.clear();
        int a = n_ + enter_k;
        int b = enter_i;
        auto climb = [&](int& x, bool sink_side) {
            const auto xs = static_cast<std::size_t>(x);
            const bool x_is_sink = x >= n_;
            if (x_is_sink == sink_side) decreasing.push_back(parent_arc_[xs]);
            x = parent_[xs];
        };
        while (a != b) {
            if (depth_[static_cast<std::size_t>(a)] >= depth_[static_cast<std::size_t>(b)]) {
                climb(a, true);
            } else {
                climb(b, false);
            }
        }
        int leave = -1;
        double theta = std::numeric_limits<double>::infinity();
        int leave_key = std::numeric_limits<int>::max();
        for (int arc : decreasing) {
            const auto as = static_cast<std::size_t>(arc);
            const double f = std::max(0.0, flow_[as]);
            const int key = basis_[as].source * m_ + basis_[as].sink;
            if (f < theta || (f == theta && key < leave_key)) {
                theta = f;
                leave = arc;
                leave_key = key;
            }
        }
        basis_[static_cast<std::size_t>(leave)] = {enter_i, enter_k};
        ++stats_.primal_pivots;
        rebuild_tree();
        compute_flows();
        compute_potentials();
    }
    throw NumericalError("NetworkSimplex: primal phase did not converge");
}

bool NetworkSimplex::dual_phase() {
    // Give up once repairing the old basis costs more than the last cold start did.
    const std::int64_t limit = std::min<std::int64_t>(4LL * (n_ + m_) + 100, cold_cost_ + 1);
    for (std::int64_t iter = 0; iter < limit; ++iter) {
        int leave = -1;
        double worst = -kFlowTolerance;
        for (std::size_t a = 0; a < flow_.size(); ++a) {
            if (flow_[a] < worst) {
                worst = flow_[a];
                leave = static_cast<int>(a);
            }
        }
        if (leave < 0) return true;

        const Arc arc = basis_[static_cast<std::size_t>(leave)];
        const int s = arc.source;
        const int t = n_ + arc.sink;
        const int child = (parent_arc_[static_cast<std::size_t>(s)] == leave) ? s : t;
        const int lo = pos_[static_cast<std::size_t>(child)];
        const int hi = lo + size_[static_cast<std::size_t>(child)];
        auto in_subtree = [&](int v) {
            const int p = pos_[static_cast<std::size_t>(v)];
            return p >= lo && p < hi;
        };
        // Side holding the leaving arc's source has a deficit; flow must enter it on an arc
        // from a source outside to a sink inside.
        const bool source_side_is_subtree = (child == s);
        auto on_source_side = [&](int v) { return in_subtree(v) == source_side_is_subtree; };

        outside_sources_.clear();
        inside_sinks_.clear();
        for (int i = 0; i < n_; ++i) {
            if (!on_source_side(i)) outside_sources_.push_back(i);
        }
        for (int k = 0; k < m_; ++k) {
            if (on_source_side(n_ + k)) inside_sinks_.push_back(k);
        }
        int enter_i = -1;
        int enter_k = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int i : outside_sources_) {
            for (int k : inside_sinks_) {
                const double rc = reduced_cost(i, k);
                if (rc < best) {
                    best = rc;
                    enter_i = i;
                    enter_k = k;
                }
            }
        }
        if (enter_i < 0) return false;
        basis_[static_cast<std::size_t>(leave)] = {enter_i, enter_k};
        ++stats_.dual_pivots;
        rebuild_tree();
        compute_flows();
        compute_potentials();
    }
    return false;
}

TransportSolution NetworkSimplex::solve(const Vector& p, const Vector& q) {
    check_instance(p, q, cost_);
    p_ = p;
    q_ = q * (p.sum() / q.sum());

    const auto pivots_before = stats_.primal_pivots + stats_.dual_pivots;
    if (!has_basis_) {
        cold_start();
        primal_phase();
        cold_cost_ = stats_.primal_pivots - pivots_before;
    } else {
        ++stats_.warm_solves;
        compute_flows();
        // Dual pivots keep every reduced cost non-negative, so a primal-feasible basis
        // reached this way is optimal.
        if (!dual_phase()) {
            const auto before_cold = stats_.primal_pivots;
            cold_start();
            primal_phase();
            cold_cost_ = stats_.primal_pivots - before_cold;
        }
    }
    has_basis_ = true;
    TransportSolution out = extract();
    out.iterations = stats_.primal_pivots + stats_.dual_pivots - pivots_before;
    return out;
}

TransportSolution NetworkSimplex::extract() const {
    TransportSolution out;
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(basis_.size());
    Vector row_sums = Vector::Zero(n_);
    Vector col_sums = Vector::Zero(m_);
    double value = 0.0;
    for (std::size_t a = 0; a < basis_.size(); ++a) {
        const double f = std::max(0.0, flow_[a]);
        if (f > 0.0) {
            triplets.emplace_back(basis_[a].source, basis_[a].sink, f);
            value += f * cost_(basis_[a].source, basis_[a].sink);
            row_sums[basis_[a].source] += f;
            col_sums[basis_[a].sink] += f;
        }
    }
    out.plan.resize(n_, m_);
    out.plan.setFromTriplets(triplets.begin(), triplets.end());
    out.value = value;
    out.transport_cost = value;
    out.dual_source.resize(n_);
    out.dual_target.resize(m_);
    for (int i = 0; i < n_; ++i) out.dual_source[i] = potential_[static_cast<std::size_t>(i)];
    for (int k = 0; k < m_; ++k) out.dual_target[k] = potential_[static_cast<std::size_t>(n_ + k)];
    normalize_duals(out.dual_source, out.dual_target, q_);
    out.marginal_error = (row_sums - p_).cwiseAbs().sum() + (col_sums - q_).cwiseAbs().sum();
    out.converged = true;
    return out;
}

TransportSolution w1_exact(const Vector& p, const Vector& q, const Matrix& cost) {
    NetworkSimplex solver(cost);
    return solver.solve(p, q);
}

TransportSolution w1_exact(const DiscreteDistribution& p, const DiscreteDistribution& q,
                           const Matrix& cost) {
    return w1_exact(p.probs(), q.probs(), cost);
}

// ---------------------------------------------------------------------------
// Sinkhorn

namespace {

double log_sum_exp(const double* terms, Eigen::Index n) {
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) top = std::max(top, terms[i]);
    if (!std::isfinite(top)) return top;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) acc += std::exp(terms[i] - top);
    return top + std::log(acc);
}

TransportSolution finish_entropic(const Vector& p, const Vector& q, const Matrix& cost,
                                  const Matrix& plan, Vector f, Vector g) {
    TransportSolution out;
    out.regularized = true;
    out.value = f.dot(p) + g.dot(q);
    out.transport_cost = plan.cwiseProduct(cost).sum();
    out.plan = plan.sparseView();
    out.marginal_error =
        (plan.rowwise().sum() - p).cwiseAbs().sum() + (plan.colwise().sum().transpose() - q).cwiseAbs().sum();
    normalize_duals(f, g, q);
    out.dual_source = std::move(f);
    out.dual_target = std::move(g);
    return out;
}

TransportSolution sinkhorn_log(const Vector& p, const Vector& q, const Matrix& cost,
                               const EntropicOptions& opt) {
    const Eigen::Index n = p.size();
    const Eigen::Index m = q.size();
    const double eps = opt.epsilon;
    const Vector logp = p.array().log();
    const Vector logq = q.array().log();
    Vector f = Vector::Zero(n);
    Vector g = Vector::Zero(m);
    Vector terms_m(m);
    Vector terms_n(n);
    Matrix plan(n, m);
    double err = std::numeric_limits<double>::infinity();
    std::int64_t iter = 0;
    while (iter < opt.max_iter) {
        ++iter;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index k = 0; k < m; ++k) terms_m[k] = logq[k] + (g[k] - cost(i, k)) / eps;
            f[i] = -eps * log_sum_exp(terms_m.data(), m);
        }
        for (Eigen::Index k = 0; k < m; ++k) {
            for (Eigen::Index i = 0; i < n; ++i) terms_n[i] = logp[i] + (f[i] - cost(i, k)) / eps;
            g[k] = -eps * log_sum_exp(terms_n.data(), n);
        }
        if (!f.allFinite() || !g.allFinite()) {
            throw NumericalError("w1_entropic: non-finite dual potential");
        }
        for (Eigen::Index k = 0; k < m; ++k) {
            for (Eigen::Index i = 0; i < n; ++i) {
                plan(i, k) = std::exp(logp[i] + logq[k] + (f[i] + g[k] - cost(i, k)) / eps);
            }
        }
        err = (plan.rowwise().sum() - p).cwiseAbs().sum();
        if (err <= opt.tol) break;
    }
    auto out = finish_entropic(p, q, cost, plan, std::move(f), std::move(g));
    out.iterations = iter;
    out.converged = err <= opt.tol;
    return out;
}

TransportSolution sinkhorn_scaling(const Vector& p, const Vector& q, const Matrix& cost,
                                   const EntropicOptions& opt) {
    const double eps = opt.epsilon;
    // Eigen's vectorized exp clamps large negative arguments instead of returning 0,
    // which would hide the underflow checked below.
    const Matrix kernel = cost.unaryExpr([eps](double c) { return std::exp(-c / eps); });
    const auto underflow = [] {
        return NumericalError(
            "w1_entropic: kernel scaling underflowed; epsilon is too small for scaling mode, "
            "use log-domain mode");
    };
    Vector a = Vector::Ones(p.size());
    Vector b = Vector::Ones(q.size());
    Vector kb(p.size());
    Vector ka(q.size());
    double err = std::numeric_limits<double>::infinity();
    std::int64_t iter = 0;
    while (iter < opt.max_iter) {
        ++iter;
        kb = kernel * b;
        if ((kb.array() <= 0.0).any() || !kb.allFinite()) throw underflow();
        a = p.cwiseQuotient(kb);
        ka = kernel.transpose() * a;
        if ((ka.array() <= 0.0).any() || !ka.allFinite()) throw underflow();
        b = q.cwiseQuotient(ka);
        if (!a.allFinite() || !b.allFinite()) throw underflow();
        kb = kernel * b;
        err = (a.cwiseProduct(kb) - p).cwiseAbs().sum();
        if (err <= opt.tol) break;
    }
    kb = kernel * b;
    ka = kernel.transpose() * a;
    if ((kb.array() <= 0.0).any() || (ka.array() <= 0.0).any()) throw underflow();
    const Matrix plan = a.asDiagonal() * kernel * b.asDiagonal();
    Vector f = -eps * kb.array().log();
    Vector g = -eps * ka.array().log();
    auto out = finish_entropic(p, q, cost, plan, std::move(f), std::move(g));
    out.iterations = iter;
    out.converged = err <= opt.tol;
    return out;
}

}  // namespace

TransportSolution w1_entropic(const Vector& p, const Vector& q, const Matrix& cost,
                              const EntropicOptions& options) {
    check_instance(p, q, cost);
    if (!(options.epsilon > 0.0) || !std::isfinite(options.epsilon)) {
        throw InvalidArgument("w1_entropic: epsilon must be positive");
    }
    if (options.max_iter < 1) {
        throw InvalidArgument("w1_entropic: max_iter must be >= 1");
    }
    const Vector pn = p / p.sum();
    const Vector qn = q / q.sum();
    return options.mode == SinkhornMode::log_domain ? sinkhorn_log(pn, qn, cost, options)
                                                    : sinkhorn_scaling(pn, qn, cost, options);
}

TransportSolution w1_entropic(const DiscreteDistribution& p, const DiscreteDistribution& q,
                              const Matrix& cost, const EntropicOptions& options) {
    return w1_entropic(p.probs(), q.probs(), cost, options);
}

// ---------------------------------------------------------------------------
// Gradient

Vector w1_weight_gradient(const Matrix& donor_probs, const Weights& w,
                          const TransportSolution& solution) {
    if (donor_probs.cols() != w.size()) {
        throw InvalidArgument("w1_weight_gradient: " + std::to_string(w.size()) + " weights for " +
                              std::to_string(donor_probs.cols()) + " donors");
    }
    if (donor_probs.rows() != solution.dual_target.size() ||
        solution.plan.cols() != donor_probs.rows()) {
        throw InvalidArgument("w1_weight_gradient: donor atoms do not match the solution's target atoms");
    }
    const Vector mix = donor_probs * w.values();
    Vector col_sums = Vector::Zero(solution.plan.cols());
    for (int k = 0; k < solution.plan.outerSize(); ++k) {
        for (SparsePlan::InnerIterator it(solution.plan, k); it; ++it) col_sums[it.col()] += it.value();
    }
    const double drift = (col_sums - mix).cwiseAbs().maxCoeff();
    if (drift > 1e-6) {
        throw InvalidArgument("w1_weight_gradient: stale solution (target marginal differs from the "
                              "mixture by " + std::to_string(drift) + ")");
    }
    return donor_probs.transpose() * solution.dual_target;
}

Vector w1_weight_gradient(const DiscreteDistribution& p0,
                          std::span<const DiscreteDistribution> donors, const Weights& w,
                          const TransportSolution& solution) {
    if (p0.size() != solution.dual_source.size()) {
        throw InvalidArgument("w1_weight_gradient: p0 atoms do not match the solution's source atoms");
    }
    return w1_weight_gradient(donor_matrix(donors), w, solution);
}

}  // namespace mbsc
