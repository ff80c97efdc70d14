#include "mbsc/weights.hpp"

#include <cmath>
#include <string>

#include "mbsc/error.hpp"

namespace mbsc {

Weights::Weights(Vector values) : values_(std::move(values)) {
    if (values_.size() == 0) {
        throw InvalidArgument("Weights: empty weight vector");
    }
    for (Eigen::Index j = 0; j < values_.size(); ++j) {
        if (!std::isfinite(values_[j]) || values_[j] < 0.0) {
            throw InvalidArgument("Weights: entry " + std::to_string(j) +
                                  " is negative or non-finite");
        }
    }
    if (std::abs(values_.sum() - 1.0) > kSumTolerance) {
        throw InvalidArgument("Weights: entries sum to " + std::to_string(values_.sum()) +
                              ", expected 1");
    }
}

Weights Weights::uniform(Eigen::Index size) {
    if (size < 1) {
        throw InvalidArgument("Weights::uniform: need at least one donor");
    }
    return Weights(Vector::Constant(size, 1.0 / static_cast<double>(size)));
}

Weights Weights::vertex(Eigen::Index size, Eigen::Index k) {
    if (k < 0 || k >= size) {
        throw InvalidArgument("Weights::vertex: index out of range");
    }
    Vector v = Vector::Zero(size);
    v[k] = 1.0;
    return Weights(std::move(v));
}

}  // namespace mbsc
