#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mbsc/atoms.hpp"
#include "mbsc/causes.hpp"
#include "mbsc/estimators.hpp"
#include "mbsc/panel.hpp"

namespace mbsc {

/// Synthetic experiment: one scalar cause, six groups with normal cause distributions, and
/// a closed-form conditional outcome that changes over time.
struct DgpConfig {
    std::vector<double> unit_means{20.0, 45.0, 50.0, 60.0, 65.0, 70.0};
    double sigma = 5.0;
    Eigen::Index atom_count = 200;
    double atom_max = 90.0;
    Eigen::Index periods = 50;  // t = 0 .. periods - 1
    Eigen::Index t0 = 15;
    double target_mean = 45.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Conditional expected outcome E_t[Y | x].
double f_xt(double x, double t);

/// Atoms atom_max * k / (atom_count - 1), k = 0 .. atom_count - 1, as a one-column AtomSet.
AtomSetPtr dgp_atoms(const DgpConfig& config);

/// Masses proportional to the normal density N(x_k; mean, sigma^2) on the grid atoms.
DiscreteDistribution unit_distribution(double mean, const DgpConfig& config);
DiscreteDistribution unit_distribution(double mean, const DgpConfig& config, const AtomSetPtr& atoms);

/// "g20" for mean 20.
std::string dgp_unit_name(double mean);

/// f evaluated on atoms x periods.
Matrix dgp_outcome_grid(const DgpConfig& config);

struct SyntheticExperiment {
    PanelData panel;
    DistributionTable distributions;
    Vector truth;  // target's expected outcomes, all periods
    AtomSetPtr atoms;
};

/// y_jt = sum_k f(x_k, t) p_j(x_k), plus optional Gaussian noise (truth stays noiseless).
SyntheticExperiment generate_panel(const DgpConfig& config);

/// Lipschitz constant of f over the grid atoms and all periods.
LipschitzEstimate dgp_lipschitz(const DgpConfig& config);

}  // namespace mbsc
