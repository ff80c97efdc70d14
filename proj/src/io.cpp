#include "mbsc/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "mbsc/error.hpp"

namespace mbsc::io {

namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line);
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), "cannot open file");
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError(path.string(), "cannot open file for writing");
    return out;
}

std::string trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return std::string(s);
}

/// Comma-separated fields; double quotes may wrap a field (with "" as an escaped quote).
std::vector<std::string> split_csv(const std::string& line, const std::string& loc) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
            was_quoted = true;
        } else if (c == ',') {
            fields.push_back(was_quoted ? cur : trim(cur));
            cur.clear();
            was_quoted = false;
        } else {
            cur += c;
        }
    }
    if (quoted) throw ParseError(loc, "unterminated quoted field");
    fields.push_back(was_quoted ? cur : trim(cur));
    return fields;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;
};

CsvTable read_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    CsvTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
        if (trim(line).empty()) continue;
        auto fields = split_csv(line, where(path, lineno));
        if (table.header.empty()) {
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw ParseError(where(path, lineno), "expected " + std::to_string(table.header.size()) +
                                                      " fields, found " + std::to_string(fields.size()));
        }
        table.rows.push_back(std::move(fields));
        table.lines.push_back(lineno);
    }
    if (table.header.empty()) throw ParseError(path.string(), "empty file");
    return table;
}

std::size_t column(const CsvTable& t, const std::string& name, const std::filesystem::path& path) {
    auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) throw ParseError(where(path, 1), "missing column '" + name + "'");
    return static_cast<std::size_t>(it - t.header.begin());
}

std::optional<std::size_t> optional_column(const CsvTable& t, const std::string& name) {
    auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - t.header.begin());
}

double parse_double(const std::string& text, const std::string& loc, const std::string& what) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || text.empty() || !std::isfinite(v)) {
        throw ParseError(loc, what + " '" + text + "' is not a finite number");
    }
    return v;
}

long long parse_int(const std::string& text, const std::string& loc, const std::string& what) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw ParseError(loc, what + " '" + text + "' is not an integer");
    }
    return v;
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc()) throw NumericalError("format_double: conversion failed");
    return {buf, ptr};
}

// ---------------------------------------------------------------------------
// Panel

PanelData read_panel_csv(const std::filesystem::path& path, const std::string& target,
                         const std::string& t0_label) {
    const CsvTable table = read_csv(path);
    const std::size_t cu = column(table, "unit", path);
    const std::size_t cp = column(table, "period", path);
    const std::size_t co = column(table, "outcome", path);

    std::vector<std::string> units;
    std::map<std::string, std::size_t> unit_pos;
    std::map<std::pair<std::size_t, long long>, std::pair<double, std::size_t>> cells;
    long long lo = 0;
    long long hi = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string loc = where(path, table.lines[r]);
        if (row[cu].empty()) throw ParseError(loc, "empty unit label");
        const long long period = parse_int(row[cp], loc, "period");
        const double y = parse_double(row[co], loc, "outcome");
        auto [it, fresh] = unit_pos.try_emplace(row[cu], units.size());
        if (fresh) units.push_back(row[cu]);
        if (!cells.emplace(std::make_pair(it->second, period), std::make_pair(y, table.lines[r])).second) {
            throw ParseError(loc, "duplicate row for unit '" + row[cu] + "' period " + row[cp]);
        }
        if (r == 0) lo = hi = period;
        lo = std::min(lo, period);
        hi = std::max(hi, period);
    }
    if (units.empty()) throw ParseError(path.string(), "no data rows");

    const long long count = hi - lo + 1;
    PanelData panel;
    panel.unit_ids = units;
    panel.outcomes.resize(static_cast<Eigen::Index>(units.size()), static_cast<Eigen::Index>(count));
    for (long long p = lo; p <= hi; ++p) panel.period_labels.push_back(std::to_string(p));
    for (std::size_t j = 0; j < units.size(); ++j) {
        for (long long p = lo; p <= hi; ++p) {
            auto it = cells.find({j, p});
            if (it == cells.end()) {
                throw ParseError(path.string(), "unit '" + units[j] + "' has no row for period " +
                                                    std::to_string(p) + " (periods must be dense)");
            }
            panel.outcomes(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(p - lo)) = it->second.first;
        }
    }
    auto tit = unit_pos.find(target);
    if (tit == unit_pos.end()) throw InvalidArgument("unknown target unit '" + target + "'");
    panel.target_index = static_cast<Eigen::Index>(tit->second);

    long long t0 = 0;
    auto [ptr, ec] = std::from_chars(t0_label.data(), t0_label.data() + t0_label.size(), t0);
    if (ec != std::errc() || ptr != t0_label.data() + t0_label.size() || t0 < lo || t0 > hi) {
        throw InvalidArgument("intervention period '" + t0_label + "' is not a panel period");
    }
    panel.t0 = static_cast<Eigen::Index>(t0 - lo);
    panel.validate();
    return panel;
}

void write_panel_csv(const std::filesystem::path& path, const PanelData& panel) {
    auto out = open_out(path);
    out << "unit,period,outcome\n";
    for (Eigen::Index j = 0; j < panel.unit_count(); ++j) {
        for (Eigen::Index t = 0; t < panel.periods(); ++t) {
            out << panel.unit_ids[static_cast<std::size_t>(j)] << ','
                << panel.period_labels[static_cast<std::size_t>(t)] << ','
                << format_double(panel.outcomes(j, t)) << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Distributions

LoadedDistributions parse_distributions(const Json& doc, const std::string& origin) {
    auto fail = [&](const std::string& msg) { return ParseError(origin, msg); };
    if (!doc.is_object()) throw fail("expected a JSON object");
    if (!doc.contains("dimension") || !doc["dimension"].is_number_integer()) {
        throw fail("missing integer 'dimension'");
    }
    const auto d = doc["dimension"].get<long long>();
    if (d < 1) throw fail("'dimension' must be >= 1");
    if (!doc.contains("atoms") || !doc["atoms"].is_array() || doc["atoms"].empty()) {
        throw fail("missing non-empty 'atoms' array");
    }
    const auto& atoms = doc["atoms"];
    Matrix points(static_cast<Eigen::Index>(atoms.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const auto& a = atoms[i];
        if (!a.is_array() || static_cast<long long>(a.size()) != d) {
            throw fail("atom " + std::to_string(i) + " does not have " + std::to_string(d) + " coordinates");
        }
        for (std::size_t m = 0; m < a.size(); ++m) {
            if (!a[m].is_number()) throw fail("atom " + std::to_string(i) + " has a non-numeric coordinate");
            points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) = a[m].get<double>();
        }
    }
    if (!doc.contains("units") || !doc["units"].is_object() || doc["units"].empty()) {
        throw fail("missing non-empty 'units' object");
    }
    LoadedDistributions out;
    out.set.atoms = make_atom_set(points);
    const auto& merged = out.set.atoms->merged_index();
    for (const auto& [unit, probs] : doc["units"].items()) {
        if (!probs.is_array() || probs.size() != atoms.size()) {
            throw fail("unit '" + unit + "' must list " + std::to_string(atoms.size()) + " masses");
        }
        Vector p = Vector::Zero(out.set.atoms->size());
        double total = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (!probs[i].is_number()) throw fail("unit '" + unit + "' has a non-numeric mass");
            const double v = probs[i].get<double>();
            if (!std::isfinite(v) || v < 0.0) throw fail("unit '" + unit + "' has a negative or non-finite mass");
            p[merged[i]] += v;
            total += v;
        }
        if (!(total > 0.0)) throw fail("unit '" + unit + "' has zero total mass");
        if (std::abs(total - 1.0) > 1e-6) {
            out.warnings.push_back(origin + ": masses of unit '" + unit + "' sum to " + format_double(total) +
                                   "; renormalized");
        }
        out.set.units.emplace(unit, DiscreteDistribution(out.set.atoms, std::move(p)));
    }
    return out;
}

Json read_json(const std::filesystem::path& path) {
    auto in = open_in(path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string(), std::string("invalid JSON: ") + e.what());
    }
}

void write_json(const std::filesystem::path& path, const Json& doc) {
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
}

LoadedDistributions read_distributions_json(const std::filesystem::path& path) {
    return parse_distributions(read_json(path), path.string());
}

Json distributions_json(const AtomSetPtr& atoms, const DistributionTable& units) {
    Json doc;
    doc["dimension"] = atoms->dimension();
    Json pts = Json::array();
    for (Eigen::Index i = 0; i < atoms->size(); ++i) {
        Json row = Json::array();
        for (Eigen::Index m = 0; m < atoms->dimension(); ++m) row.push_back(atoms->points()(i, m));
        pts.push_back(std::move(row));
    }
    doc["atoms"] = std::move(pts);
    Json us = Json::object();
    for (const auto& [unit, dist] : units) {
        const DiscreteDistribution on = dist.reindexed(atoms);
        us[unit] = std::vector<double>(on.probs().data(), on.probs().data() + on.size());
    }
    doc["units"] = std::move(us);
    return doc;
}

void write_distributions_json(const std::filesystem::path& path, const AtomSetPtr& atoms,
                              const DistributionTable& units) {
    write_json(path, distributions_json(atoms, units));
}

// ---------------------------------------------------------------------------
// Schema and tables

CausesSchema parse_schema(const Json& doc, const std::string& origin) {
    auto fail = [&](const std::string& msg) { return ParseError(origin, msg); };
    if (!doc.is_object() || !doc.contains("variables") || !doc["variables"].is_array()) {
        throw fail("schema needs a 'variables' array");
    }
    CausesSchema schema;
    for (const auto& v : doc["variables"]) {
        if (!v.is_object() || !v.contains("name") || !v["name"].is_string() || !v.contains("kind") ||
            !v["kind"].is_string()) {
            throw fail("each variable needs string 'name' and 'kind'");
        }
        CauseVariable var;
        var.name = v["name"].get<std::string>();
        const auto kind = v["kind"].get<std::string>();
        try {
            if (kind == "numeric") {
                var.kind = CauseKind::numeric;
            } else if (kind == "categorical") {
                var.kind = CauseKind::categorical;
                var.levels = v.at("levels").get<std::vector<std::string>>();
            } else if (kind == "binned_numeric") {
                var.kind = CauseKind::binned_numeric;
                var.bin_edges = v.at("bin_edges").get<std::vector<double>>();
            } else {
                throw fail("variable '" + var.name + "' has unknown kind '" + kind + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw fail("variable '" + var.name + "': " + e.what());
        }
        schema.variables.push_back(std::move(var));
    }
    if (doc.contains("scale")) {
        try {
            const auto s = doc["scale"].get<std::vector<double>>();
            schema.scale = Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
        } catch (const nlohmann::json::exception& e) {
            throw fail(std::string("'scale': ") + e.what());
        }
    }
    try {
        schema.validate();
    } catch (const InvalidArgument& e) {
        throw fail(e.what());
    }
    return schema;
}

CausesSchema read_schema_json(const std::filesystem::path& path) {
    return parse_schema(read_json(path), path.string());
}

namespace {

std::vector<std::size_t> variable_columns(const CsvTable& t, const CausesSchema& schema,
                                          const std::filesystem::path& path) {
    std::vector<std::size_t> cols;
    for (const auto& v : schema.variables) cols.push_back(column(t, v.name, path));
    return cols;
}

template <typename Fn>
auto with_location(const std::string& loc, Fn&& fn) {
    try {
        return fn();
    } catch (const InvalidArgument& e) {
        throw ParseError(loc, e.what());
    }
}

}  // namespace

std::vector<CauseRow> read_cause_table_csv(const std::filesystem::path& path, const CausesSchema& schema) {
    const CsvTable table = read_csv(path);
    const std::size_t cu = column(table, "unit", path);
    auto cw = optional_column(table, "weight");
    if (!cw) cw = optional_column(table, "count");
    if (!cw) throw ParseError(where(path, 1), "missing column 'weight' or 'count'");
    const auto cols = variable_columns(table, schema, path);
    std::vector<CauseRow> rows;
    rows.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string loc = where(path, table.lines[r]);
        CauseRow out;
        out.unit = row[cu];
        for (auto c : cols) out.values.push_back(row[c]);
        out.weight = parse_double(row[*cw], loc, "weight");
        if (out.weight < 0.0) throw ParseError(loc, "negative weight");
        with_location(loc, [&] { return encode_cause_point(out.values, schema); });
        rows.push_back(std::move(out));
    }
    return rows;
}

std::vector<SurveyRow> read_survey_csv(const std::filesystem::path& path, const CausesSchema& schema) {
    const CsvTable table = read_csv(path);
    const std::size_t co = column(table, "outcome", path);
    const auto cw = optional_column(table, "weight");
    const auto cols = variable_columns(table, schema, path);
    std::vector<SurveyRow> rows;
    rows.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string loc = where(path, table.lines[r]);
        SurveyRow out;
        for (auto c : cols) out.values.push_back(row[c]);
        out.outcome = parse_double(row[co], loc, "outcome");
        if (cw) out.weight = parse_double(row[*cw], loc, "weight");
        with_location(loc, [&] { return encode_cause_point(out.values, schema); });
        rows.push_back(std::move(out));
    }
    return rows;
}

void write_series_csv(const std::filesystem::path& path, const std::vector<std::string>& labels,
                      const Vector& values, const std::string& column_name) {
    if (static_cast<Eigen::Index>(labels.size()) != values.size()) {
        throw InvalidArgument("write_series_csv: label/value count mismatch");
    }
    auto out = open_out(path);
    out << "period," << column_name << '\n';
    for (std::size_t t = 0; t < labels.size(); ++t) {
        out << labels[t] << ',' << format_double(values[static_cast<Eigen::Index>(t)]) << '\n';
    }
}

}  // namespace mbsc::io
