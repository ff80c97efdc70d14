#pragma once

#include <cstddef>

#include "mbsc/linalg.hpp"

namespace mbsc {

/// A point on the probability simplex: synthetic-control weights over J donors.
class Weights {
public:
    static constexpr double kSumTolerance = 1e-9;

    Weights() = default;
    /// Throws InvalidArgument unless every entry is finite, non-negative and the sum is 1 (to 1e-9).
    explicit Weights(Vector values);

    static Weights uniform(Eigen::Index size);
    static Weights vertex(Eigen::Index size, Eigen::Index k);

    [[nodiscard]] const Vector& values() const noexcept { return values_; }
    [[nodiscard]] Eigen::Index size() const noexcept { return values_.size(); }
    [[nodiscard]] double operator[](Eigen::Index j) const { return values_[j]; }

    friend bool operator==(const Weights& a, const Weights& b) {
        return a.values_.size() == b.values_.size() && a.values_ == b.values_;
    }

private:
    Vector values_;
};

}  // namespace mbsc
