#include "mbsc/causes.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>

#include "mbsc/error.hpp"

namespace mbsc {

Eigen::Index CauseVariable::width() const {
    return kind == CauseKind::categorical ? static_cast<Eigen::Index>(levels.size()) : 1;
}

void CausesSchema::validate() const {
    if (variables.empty()) {
        throw InvalidArgument("schema: no variables");
    }
    std::set<std::string> names;
    for (const auto& v : variables) {
        if (v.name.empty()) throw InvalidArgument("schema: variable with empty name");
        if (!names.insert(v.name).second) {
            throw InvalidArgument("schema: duplicate variable '" + v.name + "'");
        }
        if (v.kind == CauseKind::categorical) {
            if (v.levels.empty()) {
                throw InvalidArgument("schema: categorical variable '" + v.name + "' has no levels");
            }
            std::set<std::string> seen(v.levels.begin(), v.levels.end());
            if (seen.size() != v.levels.size()) {
                throw InvalidArgument("schema: categorical variable '" + v.name + "' repeats a level");
            }
        }
        if (v.kind == CauseKind::binned_numeric) {
            if (v.bin_edges.size() < 2) {
                throw InvalidArgument("schema: binned variable '" + v.name + "' needs at least 2 edges");
            }
            for (std::size_t e = 1; e < v.bin_edges.size(); ++e) {
                if (!(v.bin_edges[e] > v.bin_edges[e - 1])) {
                    throw InvalidArgument("schema: bin edges of '" + v.name + "' are not strictly increasing");
                }
            }
        }
    }
    if (scale.size() != 0) {
        if (scale.size() != dimension()) {
            throw InvalidArgument("schema: scale has " + std::to_string(scale.size()) +
                                  " entries, encoding has " + std::to_string(dimension()) + " coordinates");
        }
        if (!((scale.array() > 0.0).all() && scale.allFinite())) {
            throw InvalidArgument("schema: scale factors must be positive");
        }
    }
}

Eigen::Index CausesSchema::dimension() const {
    Eigen::Index d = 0;
    for (const auto& v : variables) d += v.width();
    return d;
}

Vector CausesSchema::effective_scale() const {
    return scale.size() == 0 ? Vector::Ones(dimension()) : scale;
}

Vector one_half_hot(Eigen::Index r, Eigen::Index k) {
    if (k < 1 || r < 0 || r >= k) {
        throw InvalidArgument("one_half_hot: level index " + std::to_string(r) + " outside [0, " +
                              std::to_string(k) + ")");
    }
    Vector out = Vector::Zero(k);
    out[r] = 0.5;
    return out;
}

namespace {

double parse_number(const std::string& text, const std::string& variable) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    while (first < last && *first == ' ') ++first;
    while (last > first && last[-1] == ' ') --last;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
        throw InvalidArgument("variable '" + variable + "': '" + text + "' is not a number");
    }
    return value;
}

}  // namespace

Vector encode_cause_point(std::span<const std::string> values, const CausesSchema& schema) {
    if (values.size() != schema.variables.size()) {
        throw InvalidArgument("encode_cause_point: " + std::to_string(values.size()) +
                              " values for " + std::to_string(schema.variables.size()) + " variables");
    }
    Vector out(schema.dimension());
    Eigen::Index offset = 0;
    for (std::size_t v = 0; v < values.size(); ++v) {
        const CauseVariable& var = schema.variables[v];
        switch (var.kind) {
            case CauseKind::numeric:
                out[offset] = parse_number(values[v], var.name);
                break;
            case CauseKind::binned_numeric: {
                const double x = parse_number(values[v], var.name);
                const auto& e = var.bin_edges;
                if (x < e.front() || x > e.back()) {
                    throw InvalidArgument("variable '" + var.name + "': value " + values[v] +
                                          " is outside the bin range");
                }
                // Bins are [e_b, e_{b+1}); the last bin also includes its upper edge.
                auto it = std::upper_bound(e.begin(), e.end(), x);
                auto b = static_cast<std::size_t>(it - e.begin()) - 1;
                if (b >= e.size() - 1) b = e.size() - 2;
                out[offset] = 0.5 * (e[b] + e[b + 1]);
                break;
            }
            case CauseKind::categorical: {
                auto it = std::find(var.levels.begin(), var.levels.end(), values[v]);
                if (it == var.levels.end()) {
                    throw InvalidArgument("variable '" + var.name + "': unknown level '" + values[v] + "'");
                }
                const auto r = static_cast<Eigen::Index>(it - var.levels.begin());
                out.segment(offset, var.width()) = one_half_hot(r, var.width());
                break;
            }
        }
        offset += var.width();
    }
    return out.cwiseProduct(schema.effective_scale());
}

namespace {

std::vector<double> key_of(const Vector& x) { return {x.data(), x.data() + x.size()}; }

}  // namespace

DistributionSet build_distributions(std::span<const CauseRow> rows, const CausesSchema& schema) {
    schema.validate();
    if (rows.empty()) {
        throw InvalidArgument("build_distributions: empty table");
    }
    std::map<std::vector<double>, Eigen::Index> atom_index;
    std::vector<Vector> encoded;
    encoded.reserve(rows.size());
    for (const auto& row : rows) {
        if (!std::isfinite(row.weight) || row.weight < 0.0) {
            throw InvalidArgument("build_distributions: unit '" + row.unit + "' has a negative or non-finite weight");
        }
        encoded.push_back(encode_cause_point(row.values, schema));
        atom_index.emplace(key_of(encoded.back()), 0);
    }
    Matrix points(static_cast<Eigen::Index>(atom_index.size()), schema.dimension());
    Eigen::Index next = 0;
    for (auto& [key, idx] : atom_index) {
        idx = next;
        points.row(next) = Eigen::Map<const Eigen::RowVectorXd>(key.data(), static_cast<Eigen::Index>(key.size()));
        ++next;
    }

    std::map<std::string, Vector> masses;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        auto [it, fresh] = masses.try_emplace(rows[r].unit);
        if (fresh) it->second = Vector::Zero(points.rows());
        it->second[atom_index.at(key_of(encoded[r]))] += rows[r].weight;
    }

    DistributionSet out;
    out.atoms = make_atom_set(points);
    for (auto& [unit, m] : masses) {
        if (!(m.sum() > 0.0)) {
            throw InvalidArgument("build_distributions: unit '" + unit + "' has zero total mass");
        }
        out.units.emplace(unit, DiscreteDistribution(out.atoms, std::move(m)));
    }
    return out;
}

namespace {

LipschitzEstimate scan_pairs(const Matrix& points, const Matrix& values) {
    const Eigen::Index n = points.rows();
    LipschitzEstimate est;
    est.argmax_first = points.row(0).transpose();
    est.argmax_second = points.row(std::min<Eigen::Index>(1, n - 1)).transpose();
    double best = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = i + 1; k < n; ++k) {
            const double dist = (points.row(i) - points.row(k)).cwiseAbs().sum();
            if (!(dist > 0.0)) {
                throw InvalidArgument("estimate_lipschitz: cause points " + std::to_string(i) + " and " +
                                      std::to_string(k) + " coincide");
            }
            ++est.n_pairs;
            for (Eigen::Index t = 0; t < values.cols(); ++t) {
                const double ratio = std::abs(values(i, t) - values(k, t)) / dist;
                if (ratio > best) {
                    best = ratio;
                    est.argmax_first = points.row(i).transpose();
                    est.argmax_second = points.row(k).transpose();
                    est.argmax_period = t;
                }
            }
        }
    }
    est.ell = std::max(0.0, best);
    return est;
}

}  // namespace

LipschitzEstimate estimate_lipschitz(std::span<const SurveyRow> rows, const CausesSchema& schema) {
    schema.validate();
    struct Cell {
        double weighted_sum = 0.0;
        double weight = 0.0;
    };
    std::map<std::vector<double>, Cell> cells;
    for (const auto& row : rows) {
        if (!std::isfinite(row.outcome)) {
            throw InvalidArgument("estimate_lipschitz: non-finite outcome");
        }
        const double w = row.weight.value_or(1.0);
        if (!std::isfinite(w) || w < 0.0) {
            throw InvalidArgument("estimate_lipschitz: negative or non-finite survey weight");
        }
        Cell& c = cells[key_of(encode_cause_point(row.values, schema))];
        c.weighted_sum += w * row.outcome;
        c.weight += w;
    }
    std::erase_if(cells, [](const auto& kv) { return !(kv.second.weight > 0.0); });
    if (cells.size() < 2) {
        throw InvalidArgument("estimate_lipschitz: need at least 2 distinct cause points, got " +
                              std::to_string(cells.size()));
    }
    Matrix points(static_cast<Eigen::Index>(cells.size()), schema.dimension());
    Matrix means(static_cast<Eigen::Index>(cells.size()), 1);
    Eigen::Index r = 0;
    for (const auto& [key, cell] : cells) {
        points.row(r) = Eigen::Map<const Eigen::RowVectorXd>(key.data(), static_cast<Eigen::Index>(key.size()));
        means(r, 0) = cell.weighted_sum / cell.weight;
        ++r;
    }
    LipschitzEstimate est = scan_pairs(points, means);
    est.argmax_period.reset();
    return est;
}

LipschitzEstimate estimate_lipschitz_grid(const Matrix& points, const Matrix& values) {
    if (points.rows() != values.rows()) {
        throw InvalidArgument("estimate_lipschitz_grid: " + std::to_string(values.rows()) +
                              " value rows for " + std::to_string(points.rows()) + " points");
    }
    if (points.rows() < 2) {
        throw InvalidArgument("estimate_lipschitz: need at least 2 distinct cause points");
    }
    if (values.cols() < 1 || !values.allFinite() || !points.allFinite()) {
        throw InvalidArgument("estimate_lipschitz_grid: need finite values for at least one period");
    }
    return scan_pairs(points, values);
}

}  // namespace mbsc
