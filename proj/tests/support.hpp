#pragma once

// Random generators and brute-force oracles shared by the unit and acceptance tests.
// Nothing here calls into the solver code it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mbsc/linalg.hpp"

namespace mbsc::testing {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(gen_);
    }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
    double normal(double mean = 0.0, double sd = 1.0) {
        return std::normal_distribution<double>(mean, sd)(gen_);
    }

    /// Random point on the simplex; with `allow_zeros` some entries are exactly 0.
    Vector simplex(Eigen::Index n, bool allow_zeros = false) {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            v[i] = (allow_zeros && integer(0, 4) == 0) ? 0.0 : uniform(0.05, 1.0);
        }
        if (v.sum() == 0.0) v[0] = 1.0;
        return v / v.sum();
    }

    /// n distinct points in d dimensions with small integer coordinates, so ties in the
    /// cost matrix are common.
    Matrix lattice_points(Eigen::Index n, Eigen::Index d, int span = 4) {
        Matrix pts(n, d);
        for (Eigen::Index i = 0; i < n;) {
            for (Eigen::Index m = 0; m < d; ++m) pts(i, m) = integer(0, span);
            bool fresh = true;
            for (Eigen::Index r = 0; r < i && fresh; ++r) fresh = pts.row(r) != pts.row(i);
            if (fresh) ++i;
        }
        return pts;
    }

    Matrix real_points(Eigen::Index n, Eigen::Index d, double lo = -3.0, double hi = 3.0) {
        Matrix pts(n, d);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index m = 0; m < d; ++m) pts(i, m) = uniform(lo, hi);
        return pts;
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

/// Plain double loop over coordinates.
inline Matrix naive_l1_cost(const Matrix& src, const Matrix& tgt) {
    Matrix c(src.rows(), tgt.rows());
    for (Eigen::Index i = 0; i < src.rows(); ++i) {
        for (Eigen::Index k = 0; k < tgt.rows(); ++k) {
            double s = 0.0;
            for (Eigen::Index m = 0; m < src.cols(); ++m) s += std::fabs(src(i, m) - tgt(k, m));
            c(i, k) = s;
        }
    }
    return c;
}

/// Minimum transport cost by enumerating every spanning tree of the complete bipartite
/// graph. Each tree is a candidate basis; its flow is fixed by peeling leaves, and the
/// cheapest non-negative one is the LP optimum (a vertex of the transportation polytope).
class TreeEnumerationOracle {
public:
    TreeEnumerationOracle(const Vector& p, const Vector& q, const Matrix& cost)
        : p_(p), q_(q), cost_(cost), n_(static_cast<int>(p.size())), m_(static_cast<int>(q.size())) {}

    double solve() {
        best_ = std::numeric_limits<double>::infinity();
        chosen_.clear();
        search(0);
        return best_;
    }

private:
    int find(std::vector<int>& uf, int v) const {
        while (uf[static_cast<std::size_t>(v)] != v) v = uf[static_cast<std::size_t>(v)];
        return v;
    }

    void search(int arc) {
        const int needed = n_ + m_ - 1;
        const int total = n_ * m_;
        if (static_cast<int>(chosen_.size()) == needed) {
            evaluate();
            return;
        }
        if (needed - static_cast<int>(chosen_.size()) > total - arc) return;
        // Acyclicity check against the arcs chosen so far.
        std::vector<int> uf(static_cast<std::size_t>(n_ + m_));
        std::iota(uf.begin(), uf.end(), 0);
        for (int a : chosen_) {
            const int x = find(uf, a / m_);
            const int y = find(uf, n_ + a % m_);
            uf[static_cast<std::size_t>(x)] = y;
        }
        if (find(uf, arc / m_) != find(uf, n_ + arc % m_)) {
            chosen_.push_back(arc);
            search(arc + 1);
            chosen_.pop_back();
        }
        search(arc + 1);
    }

    void evaluate() {
        std::vector<double> excess(static_cast<std::size_t>(n_ + m_));
        for (int i = 0; i < n_; ++i) excess[static_cast<std::size_t>(i)] = p_[i];
        for (int k = 0; k < m_; ++k) excess[static_cast<std::size_t>(n_ + k)] = -q_[k];
        std::vector<int> degree(static_cast<std::size_t>(n_ + m_), 0);
        for (int a : chosen_) {
            ++degree[static_cast<std::size_t>(a / m_)];
            ++degree[static_cast<std::size_t>(n_ + a % m_)];
        }
        std::vector<bool> done(chosen_.size(), false);
        double value = 0.0;
        for (std::size_t round = 0; round < chosen_.size(); ++round) {
            bool progressed = false;
            for (std::size_t e = 0; e < chosen_.size() && !progressed; ++e) {
                if (done[e]) continue;
                const int i = chosen_[e] / m_;
                const int k = n_ + chosen_[e] % m_;
                double flow;
                if (degree[static_cast<std::size_t>(i)] == 1) {
                    flow = excess[static_cast<std::size_t>(i)];
                } else if (degree[static_cast<std::size_t>(k)] == 1) {
                    flow = -excess[static_cast<std::size_t>(k)];
                } else {
                    continue;
                }
                if (flow < -1e-12) return;  // infeasible basis
                excess[static_cast<std::size_t>(i)] -= flow;
                excess[static_cast<std::size_t>(k)] += flow;
                --degree[static_cast<std::size_t>(i)];
                --degree[static_cast<std::size_t>(k)];
                done[e] = true;
                value += flow * cost_(i, k - n_);
                progressed = true;
            }
            if (!progressed) return;
        }
        best_ = std::min(best_, value);
    }

    Vector p_;
    Vector q_;
    Matrix cost_;
    int n_;
    int m_;
    double best_ = 0.0;
    std::vector<int> chosen_;
};

/// W1 on the real line: integral of |F_p - F_q| over the merged sorted support.
inline double cdf_w1(const Vector& xp, const Vector& p, const Vector& xq, const Vector& q) {
    std::vector<std::pair<double, double>> events;  // (position, signed mass)
    for (Eigen::Index i = 0; i < xp.size(); ++i) events.emplace_back(xp[i], p[i]);
    for (Eigen::Index k = 0; k < xq.size(); ++k) events.emplace_back(xq[k], -q[k]);
    std::sort(events.begin(), events.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double diff = 0.0;
    double total = 0.0;
    for (std::size_t e = 0; e + 1 < events.size(); ++e) {
        diff += events[e].second;
        total += std::fabs(diff) * (events[e + 1].first - events[e].first);
    }
    return total;
}

/// Closest point to v on a grid over the 2-simplex with spacing 1/steps.
inline Vector grid_project3(const Vector& v, int steps) {
    Vector best(3);
    double best_d = std::numeric_limits<double>::infinity();
    for (int a = 0; a <= steps; ++a) {
        for (int b = 0; a + b <= steps; ++b) {
            const Vector x{{a / double(steps), b / double(steps), (steps - a - b) / double(steps)}};
            const double d = (x - v).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = x;
            }
        }
    }
    return best;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("mbsc_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace mbsc::testing
