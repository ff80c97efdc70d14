#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mbsc/error.hpp"
#include "mbsc/linalg.hpp"
#include "mbsc/weights.hpp"

namespace mbsc {

/// Euclidean projection of v onto {x >= 0, sum x = 1} by sorting and thresholding.
///
/// The threshold is evaluated through pairwise differences v_i - v_k only, so adding a
/// constant c to v changes nothing whenever v + c is exact in floating point.
template <typename Derived>
Vec<typename Derived::Scalar> project_simplex_values(const Eigen::MatrixBase<Derived>& v) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = v.size();
    if (n == 0) {
        throw InvalidArgument("project_simplex: empty vector");
    }
    if (!v.allFinite()) {
        throw InvalidArgument("project_simplex: non-finite entry");
    }
    const Vec<Scalar> dense = v;
    if ((dense.array() >= Scalar(0)).all() &&
        std::abs(dense.sum() - Scalar(1)) <= Scalar(4) * Eigen::NumTraits<Scalar>::epsilon() * Scalar(n)) {
        return dense;  // already on the simplex
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return dense[a] > dense[b]; });

    // Gap of the r largest entries above entry r: sum_{k<r} (u_k - u_r). Entry r stays in
    // the support while that gap is below 1.
    auto gap = [&](std::size_t r) {
        Scalar g(0);
        for (std::size_t k = 0; k < r; ++k) g += dense[order[k]] - dense[order[r]];
        return g;
    };
    std::size_t support = 1;
    for (std::size_t r = 1; r < order.size(); ++r) {
        if (gap(r) < Scalar(1)) support = r + 1;
    }

    Vec<Scalar> out = Vec<Scalar>::Zero(n);
    for (std::size_t r = 0; r < support; ++r) {
        const Eigen::Index i = order[r];
        Scalar above(0);
        for (std::size_t k = 0; k < support; ++k) above += dense[order[k]] - dense[i];
        out[i] = std::max(Scalar(0), (Scalar(1) - above) / static_cast<Scalar>(support));
    }
    // Absorb rounding so the result is a valid simplex point to machine precision.
    const Scalar total = out.sum();
    if (total > Scalar(0)) out /= total;
    return out;
}

inline Weights project_simplex(const Vector& v) {
    if (v.size() == 0) {
        throw InvalidArgument("project_simplex: empty vector");
    }
    return Weights(project_simplex_values(v));
}

struct PgdConfig {
    double learning_rate = 5e-6;
    std::int64_t epochs = 200000;
    /// Early stop once the inf-norm weight change stays below this for `patience` epochs.
    std::optional<double> tolerance;
    std::int64_t patience = 100;
    std::int64_t trace_every = 0;

    void validate() const;
};

struct ObjectiveEval {
    double value = 0.0;
    Vector subgradient;
};

using Objective = std::function<ObjectiveEval(const Weights&)>;

struct TracePoint {
    std::int64_t epoch = 0;
    double value = 0.0;
};

struct PgdResult {
    Weights weights;       // last iterate
    double value = 0.0;    // objective at the last iterate
    Weights best_weights;  // lowest objective among evaluated iterates
    double best_value = 0.0;
    std::int64_t epochs_run = 0;
    bool stopped_early = false;
    std::vector<TracePoint> trace;
};

/// Projected (sub)gradient descent: w <- project_simplex(w - lr * g) for `epochs` steps.
/// Throws NumericalError naming the epoch if the objective returns a non-finite value.
PgdResult pgd_minimize(const Objective& objective, const Weights& w0, const PgdConfig& config);

}  // namespace mbsc
