#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mbsc/causes.hpp"
#include "mbsc/dgp.hpp"
#include "mbsc/estimators.hpp"
#include "mbsc/panel.hpp"

namespace mbsc::io {

using Json = nlohmann::ordered_json;

/// Long-format panel CSV with header `unit,period,outcome`. Periods are integers and must be
/// dense (consecutive) and complete for every unit. Units keep first-appearance order.
/// ParseError (with file:line) on malformed content; InvalidArgument for an unknown target
/// or t0 label.
PanelData read_panel_csv(const std::filesystem::path& path, const std::string& target,
                         const std::string& t0_label);
void write_panel_csv(const std::filesystem::path& path, const PanelData& panel);

struct LoadedDistributions {
    DistributionSet set;
    std::vector<std::string> warnings;
};

/// `{ "dimension": d, "atoms": [[...]...], "units": { "<unit>": [probs...] } }`.
/// Masses are renormalized; a warning is recorded when a unit's total is off by > 1e-6.
LoadedDistributions read_distributions_json(const std::filesystem::path& path);
LoadedDistributions parse_distributions(const Json& doc, const std::string& origin);
Json distributions_json(const AtomSetPtr& atoms, const DistributionTable& units);
void write_distributions_json(const std::filesystem::path& path, const AtomSetPtr& atoms,
                              const DistributionTable& units);

/// `{ "variables": [ {"name", "kind": "numeric"|"categorical"|"binned_numeric",
///                    "levels": [...], "bin_edges": [...]} ... ], "scale": [...] }`
CausesSchema read_schema_json(const std::filesystem::path& path);
CausesSchema parse_schema(const Json& doc, const std::string& origin);

/// Census-style table: `unit`, one column per schema variable, and `weight` or `count`.
std::vector<CauseRow> read_cause_table_csv(const std::filesystem::path& path, const CausesSchema& schema);

/// Survey microdata: one column per schema variable, `outcome`, optional `weight`.
std::vector<SurveyRow> read_survey_csv(const std::filesystem::path& path, const CausesSchema& schema);

/// `period,truth`.
void write_series_csv(const std::filesystem::path& path, const std::vector<std::string>& labels,
                      const Vector& values, const std::string& column);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& doc);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

}  // namespace mbsc::io
