#include "mbsc/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "mbsc/error.hpp"

namespace mbsc {

void DgpConfig::validate() const {
    if (unit_means.size() < 2) {
        throw InvalidArgument("dgp: need at least 2 units");
    }
    if (!(sigma > 0.0)) throw InvalidArgument("dgp: sigma must be positive");
    if (atom_count < 2) throw InvalidArgument("dgp: atom_count must be >= 2");
    if (!(atom_max > 0.0)) throw InvalidArgument("dgp: atom_max must be positive");
    if (periods < 2) throw InvalidArgument("dgp: need at least 2 periods");
    if (t0 <= 0 || t0 >= periods) throw InvalidArgument("dgp: t0 must satisfy 0 < t0 < periods");
    if (!(noise_sigma >= 0.0)) throw InvalidArgument("dgp: noise_sigma must be non-negative");
    std::vector<double> sorted = unit_means;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw InvalidArgument("dgp: unit means must be distinct");
    }
}

namespace {

struct Rational {
    long long num;
    long long den;
    [[nodiscard]] constexpr double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// Coefficients of f. The four softplus coefficients are printed as 15-digit decimals;
// these are the rationals they round from.
constexpr Rational kT2X4{-13, 2100000000};
constexpr Rational kT2X3{71, 78750000};
constexpr Rational kT2X2{-10141, 252000000};
constexpr Rational kT2X1{12521, 12600000};
constexpr Rational kSX4{57, 14000000};
constexpr Rational kX4{-43, 13300000};
constexpr Rational kSX3{-128, 175000};
constexpr Rational kX3{1313, 1496250};
constexpr Rational kSX2{106415, 2800000};
constexpr Rational kX2{-359953, 4788000};
constexpr Rational kSX1{-14003, 28000};
constexpr Rational kX1{401813, 239400};

double softplus(double z) { return z > 30.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

double f_xt(double x, double t) {
    static const double c_t2x4 = kT2X4.value(), c_t2x3 = kT2X3.value(), c_t2x2 = kT2X2.value(),
                        c_t2x1 = kT2X1.value(), c_sx4 = kSX4.value(), c_x4 = kX4.value(),
                        c_sx3 = kSX3.value(), c_x3 = kX3.value(), c_sx2 = kSX2.value(),
                        c_x2 = kX2.value(), c_sx1 = kSX1.value(), c_x1 = kX1.value();
    const double s = softplus(t / 3.0 - 20.0 / 3.0);
    const double t2 = t * t;
    const double x2 = x * x;
    const double x3 = x2 * x;
    const double x4 = x3 * x;
    return c_t2x4 * t2 * x4 + c_t2x3 * t2 * x3 + c_t2x2 * t2 * x2 + c_t2x1 * t2 * x + t +
           c_sx4 * x4 * s + c_x4 * x4 + c_sx3 * x3 * s + c_x3 * x3 + c_sx2 * x2 * s + c_x2 * x2 +
           c_sx1 * x * s + c_x1 * x + 40.0;
}

AtomSetPtr dgp_atoms(const DgpConfig& config) {
    config.validate();
    Matrix points(config.atom_count, 1);
    const double denom = static_cast<double>(config.atom_count - 1);
    for (Eigen::Index k = 0; k < config.atom_count; ++k) {
        points(k, 0) = config.atom_max * static_cast<double>(k) / denom;
    }
    return make_atom_set(points);
}

DiscreteDistribution unit_distribution(double mean, const DgpConfig& config, const AtomSetPtr& atoms) {
    Vector probs(atoms->size());
    for (Eigen::Index k = 0; k < atoms->size(); ++k) {
        const double z = (atoms->points()(k, 0) - mean) / config.sigma;
        probs[k] = std::exp(-0.5 * z * z);
    }
    return {atoms, std::move(probs)};
}

DiscreteDistribution unit_distribution(double mean, const DgpConfig& config) {
    return unit_distribution(mean, config, dgp_atoms(config));
}

std::string dgp_unit_name(double mean) {
    std::ostringstream os;
    os << 'g' << mean;
    return os.str();
}

Matrix dgp_outcome_grid(const DgpConfig& config) {
    const AtomSetPtr atoms = dgp_atoms(config);
    Matrix grid(atoms->size(), config.periods);
    for (Eigen::Index t = 0; t < config.periods; ++t) {
        for (Eigen::Index k = 0; k < atoms->size(); ++k) {
            grid(k, t) = f_xt(atoms->points()(k, 0), static_cast<double>(t));
        }
    }
    return grid;
}

SyntheticExperiment generate_panel(const DgpConfig& config) {
    config.validate();
    const auto target_it = std::find(config.unit_means.begin(), config.unit_means.end(), config.target_mean);
    if (target_it == config.unit_means.end()) {
        throw InvalidArgument("dgp: target mean is not among the unit means");
    }
    SyntheticExperiment out;
    out.atoms = dgp_atoms(config);
    const Matrix grid = dgp_outcome_grid(config);

    const auto units = static_cast<Eigen::Index>(config.unit_means.size());
    out.panel.outcomes.resize(units, config.periods);
    for (Eigen::Index j = 0; j < units; ++j) {
        const double mean = config.unit_means[static_cast<std::size_t>(j)];
        DiscreteDistribution dist = unit_distribution(mean, config, out.atoms);
        out.panel.outcomes.row(j) = (grid.transpose() * dist.probs()).transpose();
        out.panel.unit_ids.push_back(dgp_unit_name(mean));
        out.distributions.emplace(out.panel.unit_ids.back(), std::move(dist));
    }
    out.panel.target_index = target_it - config.unit_means.begin();
    out.panel.t0 = config.t0;
    for (Eigen::Index t = 0; t < config.periods; ++t) out.panel.period_labels.push_back(std::to_string(t));
    out.truth = out.panel.target_outcomes();

    if (config.noise_sigma > 0.0) {
        std::mt19937_64 rng(config.seed);
        std::normal_distribution<double> noise(0.0, config.noise_sigma);
        for (Eigen::Index j = 0; j < units; ++j) {
            for (Eigen::Index t = 0; t < config.periods; ++t) out.panel.outcomes(j, t) += noise(rng);
        }
    }
    out.panel.validate();
    return out;
}

LipschitzEstimate dgp_lipschitz(const DgpConfig& config) {
    return estimate_lipschitz_grid(dgp_atoms(config)->points(), dgp_outcome_grid(config));
}

}  // namespace mbsc
