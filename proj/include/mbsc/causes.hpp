#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mbsc/atoms.hpp"
#include "mbsc/estimators.hpp"
#include "mbsc/linalg.hpp"

namespace mbsc {

enum class CauseKind { numeric, categorical, binned_numeric };

struct CauseVariable {
    std::string name;
    CauseKind kind = CauseKind::numeric;
    std::vector<std::string> levels;  // categorical
    std::vector<double> bin_edges;    // binned_numeric, strictly increasing

    /// Number of encoded coordinates: k for a k-level categorical, 1 otherwise.
    [[nodiscard]] Eigen::Index width() const;
};

/// Ordered cause variables plus a positive multiplier per encoded coordinate.
struct CausesSchema {
    std::vector<CauseVariable> variables;
    Vector scale;  // empty means all ones

    void validate() const;
    [[nodiscard]] Eigen::Index dimension() const;
    [[nodiscard]] Vector effective_scale() const;
};

/// k coordinates, 1/2 at position r and 0 elsewhere, so distinct levels are at L1 distance 1.
Vector one_half_hot(Eigen::Index r, Eigen::Index k);

/// Encodes one record (one value per schema variable, as text). Numeric values pass through,
/// binned values map to their bin midpoint, categorical values are one-half-hot encoded;
/// every coordinate is then multiplied by its scale factor.
Vector encode_cause_point(std::span<const std::string> values, const CausesSchema& schema);

struct CauseRow {
    std::string unit;
    std::vector<std::string> values;
    double weight = 1.0;
};

struct DistributionSet {
    AtomSetPtr atoms;
    DistributionTable units;
};

/// Per-unit distributions over the union of encoded cause combinations. Atoms are sorted
/// lexicographically, so the result does not depend on row order.
DistributionSet build_distributions(std::span<const CauseRow> rows, const CausesSchema& schema);

struct SurveyRow {
    std::vector<std::string> values;
    double outcome = 0.0;
    std::optional<double> weight;
};

struct LipschitzEstimate {
    double ell = 0.0;
    std::int64_t n_pairs = 0;
    Vector argmax_first;
    Vector argmax_second;
    std::optional<Eigen::Index> argmax_period;
};

/// Largest ratio |m(x) - m(x')| / ||x - x'||_1 over distinct encoded cause points, where
/// m is the (optionally weighted) cell mean of the outcome.
LipschitzEstimate estimate_lipschitz(std::span<const SurveyRow> rows, const CausesSchema& schema);

/// Same ratio for a function tabulated on distinct points (rows of `points`), one column of
/// `values` per period; the maximum is also taken over periods.
LipschitzEstimate estimate_lipschitz_grid(const Matrix& points, const Matrix& values);

}  // namespace mbsc
