#include "mbsc/document.hpp"

#include <chrono>
#include <ctime>
#include <set>

#include "mbsc/error.hpp"

namespace mbsc {

using io::Json;

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json weights_by_unit(const Weights& w, const std::vector<std::string>& donors) {
    Json out = Json::object();
    for (std::size_t j = 0; j < donors.size(); ++j) out[donors[j]] = w[static_cast<Eigen::Index>(j)];
    return out;
}

Json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Json make_result_document(const FitResult& fit, const PanelData& panel, const DocumentContext& ctx) {
    const auto donors = panel.donor_ids();
    const Vector synthetic = synthetic_series(panel, fit.weights);
    const Vector observed = panel.target_outcomes();

    Json doc;
    doc["tool"] = kToolName;
    doc["version"] = kToolVersion;
    doc["method"] = to_string(fit.method);
    doc["target"] = panel.target_id();
    doc["t0_label"] = panel.period_labels[static_cast<std::size_t>(panel.t0)];
    doc["t0_index"] = panel.t0;
    doc["weights"] = weights_by_unit(fit.weights, donors);
    doc["objective"] = {{"total", fit.objective_value},
                        {"fit_term", optional_number(fit.fit_term)},
                        {"w1_term", optional_number(fit.w1_term)}};
    doc["w1"] = optional_number(fit.w1_at_solution);
    doc["pre_fit_max_abs_error"] = optional_number(fit.pre_fit_max_abs_error);
    doc["ell"] = optional_number(ctx.ell);
    doc["lambda"] = optional_number(fit.lambda);
    doc["best_iterate"] = {{"weights", weights_by_unit(fit.best_weights, donors)},
                           {"objective", fit.best_objective}};
    doc["bound"] = nullptr;
    doc["coverage"] = nullptr;

    Json periods = Json::array();
    for (Eigen::Index t = 0; t < panel.periods(); ++t) {
        periods.push_back({{"period_label", panel.period_labels[static_cast<std::size_t>(t)]},
                           {"pre_intervention", t < panel.t0},
                           {"observed_target", observed[t]},
                           {"synthetic", synthetic[t]},
                           {"lower", nullptr},
                           {"upper", nullptr},
                           {"inside", nullptr}});
    }
    doc["periods"] = std::move(periods);

    const auto& o = ctx.options;
    Json config;
    config["learning_rate"] = o.config.learning_rate;
    config["epochs"] = o.config.epochs;
    config["tolerance"] = optional_number(o.config.tolerance);
    config["solver"] = o.solver.kind == SolverKind::exact ? "exact" : "entropic";
    config["epsilon"] = o.solver.kind == SolverKind::exact ? Json(nullptr) : Json(o.solver.epsilon);
    config["scale"] = o.scale ? vector_json(*o.scale) : Json(nullptr);
    config["epochs_run"] = fit.epochs_run;
    config["stopped_early"] = fit.stopped_early;
    config["initialization"] = "uniform";
    doc["config"] = std::move(config);
    doc["inputs"] = {{"panel", ctx.panel_path}, {"dists", ctx.dists_path.empty() ? Json(nullptr) : Json(ctx.dists_path)}};

    Json trace = Json::array();
    for (const auto& tp : fit.trace) trace.push_back({tp.epoch, tp.value});
    doc["trace"] = std::move(trace);
    doc["timestamp"] = ctx.timestamp ? Json(utc_timestamp()) : Json(nullptr);
    return doc;
}

void apply_bound(Json& doc, double ell) {
    validate_result_document(doc);
    if (!(ell >= 0.0)) throw InvalidArgument("Lipschitz constant must be non-negative");
    if (doc["w1"].is_null()) {
        throw InvalidArgument("the fit has no W1 (a standard fit needs --dists to support intervals)");
    }
    const double w1 = doc["w1"].get<double>();
    const std::string method = doc["method"].get<std::string>();
    double half = m_bound_value(ell, w1);
    std::string kind = "m";
    if (method == "james_bound") {
        if (doc["pre_fit_max_abs_error"].is_null()) {
            throw InvalidArgument("James interval needs the pre-intervention fit error");
        }
        half += doc["pre_fit_max_abs_error"].get<double>();
        kind = "james";
    }
    auto& periods = doc["periods"];
    const auto T = static_cast<Eigen::Index>(periods.size());
    Vector synthetic(T);
    Vector observed(T);
    for (Eigen::Index t = 0; t < T; ++t) {
        synthetic[t] = periods[static_cast<std::size_t>(t)]["synthetic"].get<double>();
        observed[t] = periods[static_cast<std::size_t>(t)]["observed_target"].get<double>();
    }
    const auto intervals = constant_intervals(synthetic, half);
    const auto report = coverage_report(observed, doc["t0_index"].get<Eigen::Index>(), intervals);
    for (Eigen::Index t = 0; t < T; ++t) {
        auto& rec = periods[static_cast<std::size_t>(t)];
        rec["lower"] = intervals[static_cast<std::size_t>(t)].lower;
        rec["upper"] = intervals[static_cast<std::size_t>(t)].upper;
        rec["inside"] = static_cast<bool>(report.inside[static_cast<std::size_t>(t)]);
    }
    doc["ell"] = ell;
    doc["bound"] = {{"kind", kind}, {"half_width", half}};
    doc["coverage"] = {{"pre_inside", report.pre_inside},
                       {"pre_total", report.pre_total},
                       {"post_inside", report.post_inside},
                       {"post_total", report.post_total}};
}

void validate_result_document(const Json& doc) {
    auto fail = [](const std::string& msg) { return ParseError("result document: " + msg); };
    auto need = [&](const char* key, auto pred, const char* what) {
        if (!doc.contains(key) || !pred(doc[key])) throw fail(std::string("'") + key + "' must be " + what);
    };
    auto is_num = [](const Json& j) { return j.is_number(); };
    auto is_num_or_null = [](const Json& j) { return j.is_number() || j.is_null(); };
    auto is_str = [](const Json& j) { return j.is_string(); };
    auto is_obj = [](const Json& j) { return j.is_object(); };
    if (!doc.is_object()) throw fail("not a JSON object");
    need("tool", is_str, "a string");
    need("version", is_str, "a string");
    need("method", [](const Json& j) {
        return j.is_string() && (j == "standard" || j == "m_bound" || j == "james_bound");
    }, "one of standard, m_bound, james_bound");
    need("target", is_str, "a string");
    need("t0_index", [](const Json& j) { return j.is_number_integer(); }, "an integer");
    need("weights", is_obj, "an object");
    need("objective", is_obj, "an object");
    need("w1", is_num_or_null, "a number or null");
    need("pre_fit_max_abs_error", is_num_or_null, "a number or null");
    need("ell", is_num_or_null, "a number or null");
    need("lambda", is_num_or_null, "a number or null");
    need("config", is_obj, "an object");
    need("periods", [](const Json& j) { return j.is_array() && !j.empty(); }, "a non-empty array");

    double total = 0.0;
    for (const auto& [unit, w] : doc["weights"].items()) {
        if (!w.is_number() || w.get<double>() < 0.0) throw fail("weight of '" + unit + "' must be a non-negative number");
        total += w.get<double>();
    }
    if (doc["weights"].empty() || std::abs(total - 1.0) > 1e-9) throw fail("weights must sum to 1");
    if (!doc["objective"].contains("total") || !is_num(doc["objective"]["total"])) {
        throw fail("'objective.total' must be a number");
    }
    if (doc["w1"].is_number() && doc["w1"].get<double>() < 0.0) throw fail("'w1' must be non-negative");

    const auto& periods = doc["periods"];
    const auto t0 = doc["t0_index"].get<long long>();
    if (t0 < 0 || t0 >= static_cast<long long>(periods.size())) throw fail("'t0_index' out of range");
    std::set<std::string> labels;
    const bool bounded = doc.contains("bound") && doc["bound"].is_object();
    for (std::size_t t = 0; t < periods.size(); ++t) {
        const auto& rec = periods[t];
        const std::string at = "period record " + std::to_string(t);
        if (!rec.is_object() || !rec.contains("period_label") || !rec["period_label"].is_string()) {
            throw fail(at + " needs a string 'period_label'");
        }
        if (!labels.insert(rec["period_label"].get<std::string>()).second) {
            throw fail(at + " repeats period '" + rec["period_label"].get<std::string>() + "'");
        }
        for (const char* key : {"observed_target", "synthetic"}) {
            if (!rec.contains(key) || !rec[key].is_number()) throw fail(at + " needs numeric '" + key + "'");
        }
        for (const char* key : {"lower", "upper"}) {
            if (!rec.contains(key) || !(bounded ? rec[key].is_number() : rec[key].is_null())) {
                throw fail(at + (bounded ? " needs numeric '" : " must have null '") + key + "'");
            }
        }
        if (!rec.contains("inside") || !(bounded ? rec["inside"].is_boolean() : rec["inside"].is_null())) {
            throw fail(at + " has an invalid 'inside' flag");
        }
        if (bounded && rec["lower"].get<double>() > rec["upper"].get<double>()) {
            throw fail(at + " has lower > upper");
        }
    }
    if (bounded) {
        const auto& b = doc["bound"];
        if (!b.contains("half_width") || !b["half_width"].is_number() || b["half_width"].get<double>() < 0.0) {
            throw fail("'bound.half_width' must be a non-negative number");
        }
        if (!b.contains("kind") || !(b["kind"] == "m" || b["kind"] == "james")) {
            throw fail("'bound.kind' must be m or james");
        }
    }
}

Json lipschitz_document(const LipschitzEstimate& est, const std::optional<Vector>& scale) {
    Json doc;
    doc["tool"] = kToolName;
    doc["version"] = kToolVersion;
    doc["ell"] = est.ell;
    doc["n_pairs"] = est.n_pairs;
    doc["argmax_pair"] = {std::vector<double>(est.argmax_first.data(), est.argmax_first.data() + est.argmax_first.size()),
                          std::vector<double>(est.argmax_second.data(), est.argmax_second.data() + est.argmax_second.size())};
    doc["argmax_period_index"] = est.argmax_period ? Json(*est.argmax_period) : Json(nullptr);
    doc["scale"] = scale ? Json(std::vector<double>(scale->data(), scale->data() + scale->size())) : Json(nullptr);
    return doc;
}

}  // namespace mbsc
