#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mbsc/error.hpp"
#include "mbsc/linalg.hpp"
#include "mbsc/weights.hpp"

namespace mbsc {

/// Ordered, duplicate-free set of atoms in cause space. Row i of `points()` is atom i.
class AtomSet {
public:
    /// Duplicate rows are merged, keeping the first occurrence. `merged_index()` maps each
    /// input row to its position in the merged set.
    explicit AtomSet(const Matrix& points);

    [[nodiscard]] Eigen::Index size() const noexcept { return points_.rows(); }
    [[nodiscard]] Eigen::Index dimension() const noexcept { return points_.cols(); }
    [[nodiscard]] const Matrix& points() const noexcept { return points_; }
    [[nodiscard]] auto atom(Eigen::Index i) const { return points_.row(i); }
    [[nodiscard]] const std::vector<Eigen::Index>& merged_index() const noexcept { return merged_index_; }

    [[nodiscard]] std::optional<Eigen::Index> find(const Eigen::Ref<const Eigen::RowVectorXd>& point) const;

    friend bool operator==(const AtomSet& a, const AtomSet& b) {
        return a.points_.rows() == b.points_.rows() && a.points_.cols() == b.points_.cols() &&
               a.points_ == b.points_;
    }

private:
    Matrix points_;
    std::vector<Eigen::Index> merged_index_;
    std::vector<Eigen::Index> sorted_;  // row indices in lexicographic order, for find()
};

using AtomSetPtr = std::shared_ptr<const AtomSet>;

inline AtomSetPtr make_atom_set(const Matrix& points) { return std::make_shared<const AtomSet>(points); }

/// Probability masses over a shared AtomSet. Masses are renormalized on construction.
class DiscreteDistribution {
public:
    static constexpr double kNormTolerance = 1e-9;

    DiscreteDistribution(AtomSetPtr atoms, Vector probs);

    /// Builds a distribution from raw (possibly repeated) points; repeated points have
    /// their masses summed.
    static DiscreteDistribution from_points(const Matrix& points, const Vector& masses);

    [[nodiscard]] const AtomSetPtr& atoms() const noexcept { return atoms_; }
    [[nodiscard]] const Vector& probs() const noexcept { return probs_; }
    [[nodiscard]] Eigen::Index size() const noexcept { return probs_.size(); }
    [[nodiscard]] Eigen::Index dimension() const noexcept { return atoms_->dimension(); }

    /// Same distribution expressed on a superset of its atoms; absent atoms get mass 0.
    [[nodiscard]] DiscreteDistribution reindexed(const AtomSetPtr& superset) const;

private:
    AtomSetPtr atoms_;
    Vector probs_;
};

/// Union of the atom sets, in first-occurrence order. Returns the common pointer when all
/// distributions already share one AtomSet.
AtomSetPtr union_atoms(std::span<const DiscreteDistribution> dists);

/// Column j holds donor j's masses. All donors must share one AtomSet.
Matrix donor_matrix(std::span<const DiscreteDistribution> donors);

/// Entries c(i, k) = sum_m scale_m * |source_i,m - target_k,m|. Rows of the inputs are atoms.
template <typename DerivedA, typename DerivedB>
Mat<typename DerivedA::Scalar> l1_cost_matrix(const Eigen::MatrixBase<DerivedA>& source,
                                              const Eigen::MatrixBase<DerivedB>& target) {
    using Scalar = typename DerivedA::Scalar;
    if (source.cols() != target.cols()) {
        throw InvalidArgument("l1_cost_matrix: dimension mismatch (source d=" +
                              std::to_string(source.cols()) + ", target d=" +
                              std::to_string(target.cols()) + ")");
    }
    Mat<Scalar> cost(source.rows(), target.rows());
    for (Eigen::Index k = 0; k < target.rows(); ++k) {
        for (Eigen::Index i = 0; i < source.rows(); ++i) {
            Scalar sum(0);
            for (Eigen::Index m = 0; m < source.cols(); ++m) {
                sum += std::abs(source(i, m) - target(k, m));
            }
            cost(i, k) = sum;
        }
    }
    return cost;
}

/// Weighted variant: coordinate m is multiplied by scale_m (> 0) before the distance.
template <typename DerivedA, typename DerivedB>
Mat<typename DerivedA::Scalar> l1_cost_matrix(const Eigen::MatrixBase<DerivedA>& source,
                                              const Eigen::MatrixBase<DerivedB>& target,
                                              const Vec<typename DerivedA::Scalar>& scale) {
    if (scale.size() != source.cols()) {
        throw InvalidArgument("l1_cost_matrix: scale has " + std::to_string(scale.size()) +
                              " entries, atoms have dimension " + std::to_string(source.cols()));
    }
    if ((scale.array() <= 0).any()) {
        throw InvalidArgument("l1_cost_matrix: scale factors must be positive");
    }
    return l1_cost_matrix(source * scale.asDiagonal(), target * scale.asDiagonal());
}

inline Matrix l1_cost_matrix(const AtomSet& source, const AtomSet& target) {
    return l1_cost_matrix(source.points(), target.points());
}

/// sum_j w_j * donor_j. Donors must share one AtomSet.
DiscreteDistribution mixture(std::span<const DiscreteDistribution> donors, const Weights& w);

/// Matrix form of the mixture: columns of `donor_probs` are donor masses.
template <typename DerivedD, typename DerivedW>
Vec<typename DerivedD::Scalar> mixture_probs(const Eigen::MatrixBase<DerivedD>& donor_probs,
                                             const Eigen::MatrixBase<DerivedW>& w) {
    return donor_probs * w;
}

}  // namespace mbsc
