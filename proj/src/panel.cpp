#include "mbsc/panel.hpp"

#include <algorithm>

#include "mbsc/error.hpp"

namespace mbsc {

void PanelData::validate() const {
    if (static_cast<Eigen::Index>(unit_ids.size()) != outcomes.rows()) {
        throw InvalidArgument("panel: " + std::to_string(unit_ids.size()) + " unit ids for " +
                              std::to_string(outcomes.rows()) + " outcome rows");
    }
    if (static_cast<Eigen::Index>(period_labels.size()) != outcomes.cols()) {
        throw InvalidArgument("panel: " + std::to_string(period_labels.size()) +
                              " period labels for " + std::to_string(outcomes.cols()) + " periods");
    }
    if (outcomes.cols() < 2) {
        throw InvalidArgument("panel: need at least 2 periods");
    }
    if (outcomes.rows() < 2) {
        throw InvalidArgument("panel: need a target and at least one donor");
    }
    if (target_index < 0 || target_index >= outcomes.rows()) {
        throw InvalidArgument("panel: target index out of range");
    }
    if (t0 < 0 || t0 >= outcomes.cols()) {
        throw InvalidArgument("panel: intervention period index " + std::to_string(t0) +
                              " outside [0, " + std::to_string(outcomes.cols()) + ")");
    }
    if (!outcomes.allFinite()) {
        throw InvalidArgument("panel: non-finite outcome");
    }
}

std::vector<Eigen::Index> PanelData::donor_indices() const {
    std::vector<Eigen::Index> out;
    out.reserve(static_cast<std::size_t>(std::max<Eigen::Index>(0, outcomes.rows() - 1)));
    for (Eigen::Index j = 0; j < outcomes.rows(); ++j) {
        if (j != target_index) out.push_back(j);
    }
    return out;
}

std::vector<std::string> PanelData::donor_ids() const {
    std::vector<std::string> out;
    for (auto j : donor_indices()) out.push_back(unit_ids[static_cast<std::size_t>(j)]);
    return out;
}

Matrix PanelData::donor_outcomes() const {
    const auto donors = donor_indices();
    Matrix out(static_cast<Eigen::Index>(donors.size()), outcomes.cols());
    for (std::size_t r = 0; r < donors.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) = outcomes.row(donors[r]);
    }
    return out;
}

Eigen::Index PanelData::unit_index(const std::string& unit) const {
    auto it = std::find(unit_ids.begin(), unit_ids.end(), unit);
    if (it == unit_ids.end()) {
        throw InvalidArgument("panel: unknown unit '" + unit + "'");
    }
    return static_cast<Eigen::Index>(it - unit_ids.begin());
}

PanelData PanelData::subpanel(const std::vector<Eigen::Index>& units, Eigen::Index target) const {
    PanelData out;
    out.period_labels = period_labels;
    out.t0 = t0;
    out.outcomes.resize(static_cast<Eigen::Index>(units.size()), outcomes.cols());
    out.target_index = -1;
    for (std::size_t r = 0; r < units.size(); ++r) {
        out.unit_ids.push_back(unit_ids[static_cast<std::size_t>(units[r])]);
        out.outcomes.row(static_cast<Eigen::Index>(r)) = outcomes.row(units[r]);
        if (units[r] == target) out.target_index = static_cast<Eigen::Index>(r);
    }
    if (out.target_index < 0) {
        throw InvalidArgument("panel: subpanel target is not among the selected units");
    }
    return out;
}

}  // namespace mbsc
