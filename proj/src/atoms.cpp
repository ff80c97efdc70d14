#include "mbsc/atoms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mbsc {

namespace {

bool row_less(const Matrix& a, Eigen::Index i, const Eigen::Ref<const Eigen::RowVectorXd>& b) {
    for (Eigen::Index m = 0; m < a.cols(); ++m) {
        if (a(i, m) < b[m]) return true;
        if (b[m] < a(i, m)) return false;
    }
    return false;
}

bool row_equal(const Matrix& a, Eigen::Index i, const Eigen::Ref<const Eigen::RowVectorXd>& b) {
    for (Eigen::Index m = 0; m < a.cols(); ++m) {
        if (a(i, m) != b[m]) return false;
    }
    return true;
}

}  // namespace

AtomSet::AtomSet(const Matrix& points) {
    if (points.rows() == 0) {
        throw InvalidArgument("AtomSet: no atoms");
    }
    if (points.cols() < 1) {
        throw InvalidArgument("AtomSet: atoms must have dimension >= 1");
    }
    if (!points.allFinite()) {
        throw InvalidArgument("AtomSet: non-finite atom coordinate");
    }

    // Stable lexicographic sort so that the first occurrence of each duplicate wins.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(points.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return row_less(points, a, points.row(b));
    });

    std::vector<Eigen::Index> keep;  // raw row index of each merged atom's first occurrence
    merged_index_.assign(order.size(), 0);
    std::vector<Eigen::Index> representative(order.size());
    for (std::size_t s = 0; s < order.size(); ++s) {
        const Eigen::Index raw = order[s];
        if (s > 0 && row_equal(points, order[s - 1], points.row(raw))) {
            representative[static_cast<std::size_t>(raw)] =
                representative[static_cast<std::size_t>(order[s - 1])];
        } else {
            representative[static_cast<std::size_t>(raw)] = raw;
        }
    }
    // Assign merged positions in first-occurrence order.
    std::vector<Eigen::Index> position(order.size(), -1);
    for (Eigen::Index raw = 0; raw < points.rows(); ++raw) {
        const auto rep = static_cast<std::size_t>(representative[static_cast<std::size_t>(raw)]);
        if (position[rep] < 0) {
            position[rep] = static_cast<Eigen::Index>(keep.size());
            keep.push_back(raw);
        }
        merged_index_[static_cast<std::size_t>(raw)] = position[rep];
    }

    points_.resize(static_cast<Eigen::Index>(keep.size()), points.cols());
    for (std::size_t r = 0; r < keep.size(); ++r) {
        points_.row(static_cast<Eigen::Index>(r)) = points.row(keep[r]);
    }
    sorted_.resize(keep.size());
    std::iota(sorted_.begin(), sorted_.end(), Eigen::Index{0});
    std::sort(sorted_.begin(), sorted_.end(), [&](Eigen::Index a, Eigen::Index b) {
        return row_less(points_, a, points_.row(b));
    });
}

std::optional<Eigen::Index> AtomSet::find(const Eigen::Ref<const Eigen::RowVectorXd>& point) const {
    if (point.size() != dimension()) return std::nullopt;
    auto it = std::lower_bound(sorted_.begin(), sorted_.end(), point,
                               [&](Eigen::Index a, const Eigen::Ref<const Eigen::RowVectorXd>& p) {
                                   return row_less(points_, a, p);
                               });
    if (it != sorted_.end() && row_equal(points_, *it, point)) return *it;
    return std::nullopt;
}

DiscreteDistribution::DiscreteDistribution(AtomSetPtr atoms, Vector probs)
    : atoms_(std::move(atoms)), probs_(std::move(probs)) {
    if (!atoms_) {
        throw InvalidArgument("DiscreteDistribution: null atom set");
    }
    if (probs_.size() != atoms_->size()) {
        throw InvalidArgument("DiscreteDistribution: " + std::to_string(probs_.size()) +
                              " masses for " + std::to_string(atoms_->size()) + " atoms");
    }
    for (Eigen::Index i = 0; i < probs_.size(); ++i) {
        if (!std::isfinite(probs_[i]) || probs_[i] < 0.0) {
            throw InvalidArgument("DiscreteDistribution: mass " + std::to_string(i) +
                                  " is negative or non-finite");
        }
    }
    const double total = probs_.sum();
    if (!(total > 0.0)) {
        throw InvalidArgument("DiscreteDistribution: total mass is zero");
    }
    if (total != 1.0) probs_ /= total;
}

DiscreteDistribution DiscreteDistribution::from_points(const Matrix& points, const Vector& masses) {
    if (points.rows() != masses.size()) {
        throw InvalidArgument("DiscreteDistribution::from_points: " + std::to_string(masses.size()) +
                              " masses for " + std::to_string(points.rows()) + " points");
    }
    auto atoms = make_atom_set(points);
    Vector probs = Vector::Zero(atoms->size());
    for (Eigen::Index raw = 0; raw < points.rows(); ++raw) {
        probs[atoms->merged_index()[static_cast<std::size_t>(raw)]] += masses[raw];
    }
    return {std::move(atoms), std::move(probs)};
}

DiscreteDistribution DiscreteDistribution::reindexed(const AtomSetPtr& superset) const {
    if (superset == atoms_) return *this;
    if (superset->dimension() != dimension()) {
        throw InvalidArgument("DiscreteDistribution::reindexed: dimension mismatch");
    }
    Vector probs = Vector::Zero(superset->size());
    for (Eigen::Index i = 0; i < size(); ++i) {
        auto k = superset->find(atoms_->atom(i));
        if (!k) {
            throw InvalidArgument("DiscreteDistribution::reindexed: atom " + std::to_string(i) +
                                  " is not in the target atom set");
        }
        probs[*k] += probs_[i];
    }
    return {superset, std::move(probs)};
}

AtomSetPtr union_atoms(std::span<const DiscreteDistribution> dists) {
    if (dists.empty()) {
        throw InvalidArgument("union_atoms: no distributions");
    }
    const auto& first = dists.front().atoms();
    const bool shared = std::all_of(dists.begin(), dists.end(), [&](const DiscreteDistribution& d) {
        return d.atoms() == first || *d.atoms() == *first;
    });
    if (shared) return first;

    Eigen::Index rows = 0;
    for (const auto& d : dists) {
        if (d.dimension() != first->dimension()) {
            throw InvalidArgument("union_atoms: atom dimensions differ (" +
                                  std::to_string(first->dimension()) + " vs " +
                                  std::to_string(d.dimension()) + ")");
        }
        rows += d.size();
    }
    Matrix stacked(rows, first->dimension());
    Eigen::Index offset = 0;
    for (const auto& d : dists) {
        stacked.middleRows(offset, d.size()) = d.atoms()->points();
        offset += d.size();
    }
    return make_atom_set(stacked);
}

Matrix donor_matrix(std::span<const DiscreteDistribution> donors) {
    if (donors.empty()) {
        throw InvalidArgument("donor_matrix: no donors");
    }
    const auto& atoms = donors.front().atoms();
    Matrix probs(atoms->size(), static_cast<Eigen::Index>(donors.size()));
    for (std::size_t j = 0; j < donors.size(); ++j) {
        if (donors[j].atoms() != atoms && !(*donors[j].atoms() == *atoms)) {
            throw InvalidArgument("donor_matrix: donor " + std::to_string(j) +
                                  " is on a different atom set");
        }
        probs.col(static_cast<Eigen::Index>(j)) = donors[j].probs();
    }
    return probs;
}

DiscreteDistribution mixture(std::span<const DiscreteDistribution> donors, const Weights& w) {
    if (static_cast<Eigen::Index>(donors.size()) != w.size()) {
        throw InvalidArgument("mixture: " + std::to_string(w.size()) + " weights for " +
                              std::to_string(donors.size()) + " donors");
    }
    const Matrix probs = donor_matrix(donors);
    return {donors.front().atoms(), mixture_probs(probs, w.values())};
}

}  // namespace mbsc
