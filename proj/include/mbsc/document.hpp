#pragma once

#include <optional>
#include <string>

#include "mbsc/causes.hpp"
#include "mbsc/estimators.hpp"
#include "mbsc/io.hpp"

namespace mbsc {

inline constexpr const char* kToolName = "mbsc";
inline constexpr const char* kToolVersion = "0.1.0";

struct DocumentContext {
    FitOptions options;
    std::optional<double> ell;
    std::string panel_path;
    std::string dists_path;
    bool timestamp = true;
};

/// JSON record of a fit: weights by unit, objective components, W1, per-period
/// observed/synthetic values and a config echo. Interval fields stay null until a bound is
/// applied.
io::Json make_result_document(const FitResult& fit, const PanelData& panel, const DocumentContext& ctx);

/// Adds intervals of half-width ell * w1 (M bound; also used for standard fits that carry
/// W1) or ell * w1 + pre-fit max error (James bound) and per-period coverage flags.
/// Throws InvalidArgument when the document has no W1.
void apply_bound(io::Json& doc, double ell);

/// Throws ParseError describing the first schema violation.
void validate_result_document(const io::Json& doc);

io::Json lipschitz_document(const LipschitzEstimate& est, const std::optional<Vector>& scale);

std::string utc_timestamp();

}  // namespace mbsc
