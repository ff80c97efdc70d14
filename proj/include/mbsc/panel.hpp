#pragma once

#include <string>
#include <vector>

#include "mbsc/linalg.hpp"

namespace mbsc {

/// Outcomes y(j, t) for every unit j and period t, with one target unit and the index of
/// the first intervention period.
struct PanelData {
    std::vector<std::string> unit_ids;
    Matrix outcomes;  // units x periods
    Eigen::Index target_index = 0;
    Eigen::Index t0 = 0;
    std::vector<std::string> period_labels;

    /// Throws InvalidArgument on inconsistent shapes, non-finite outcomes, T < 2,
    /// t0 outside [0, T) or no donors.
    void validate() const;

    [[nodiscard]] Eigen::Index unit_count() const noexcept { return outcomes.rows(); }
    [[nodiscard]] Eigen::Index periods() const noexcept { return outcomes.cols(); }
    [[nodiscard]] Eigen::Index donor_count() const noexcept { return outcomes.rows() - 1; }
    [[nodiscard]] const std::string& target_id() const {
        return unit_ids[static_cast<std::size_t>(target_index)];
    }

    /// Donor unit indices in panel order.
    [[nodiscard]] std::vector<Eigen::Index> donor_indices() const;
    [[nodiscard]] std::vector<std::string> donor_ids() const;
    /// Donors x periods.
    [[nodiscard]] Matrix donor_outcomes() const;
    [[nodiscard]] Vector target_outcomes() const { return outcomes.row(target_index).transpose(); }

    /// Index of `unit`, throwing InvalidArgument if absent.
    [[nodiscard]] Eigen::Index unit_index(const std::string& unit) const;

    /// Sub-panel over the listed units (in that order) with `target` as the target.
    [[nodiscard]] PanelData subpanel(const std::vector<Eigen::Index>& units, Eigen::Index target) const;
};

}  // namespace mbsc
