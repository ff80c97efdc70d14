#include "mbsc/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "mbsc/causes.hpp"
#include "mbsc/dgp.hpp"
#include "mbsc/document.hpp"
#include "mbsc/error.hpp"
#include "mbsc/estimators.hpp"
#include "mbsc/io.hpp"

namespace mbsc::cli {

namespace fs = std::filesystem;
using io::Json;

namespace {

/// Flag combination the parser cannot express (e.g. james without lambda).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DescentFlags {
    double lr = 5e-6;
    std::int64_t epochs = 200000;
    std::optional<double> tolerance;
    std::int64_t trace_every = 0;
    std::string solver = "exact";
    double epsilon = 0.01;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--lr", lr, "Learning rate")->capture_default_str();
        cmd.add_option("--epochs", epochs, "Descent epochs")->capture_default_str();
        cmd.add_option("--tolerance", tolerance,
                       "Early stop when the weight change stays below this for 100 epochs");
        cmd.add_option("--trace-every", trace_every, "Record the objective every N epochs (0 = off)");
        cmd.add_option("--solver", solver, "Transport solver")
            ->check(CLI::IsMember({"exact", "entropic"}))
            ->capture_default_str();
        cmd.add_option("--epsilon", epsilon, "Entropic regularization, in units of the median cost")
            ->capture_default_str();
    }

    [[nodiscard]] PgdConfig config() const {
        PgdConfig c;
        c.learning_rate = lr;
        c.epochs = epochs;
        c.tolerance = tolerance;
        c.trace_every = trace_every;
        return c;
    }

    [[nodiscard]] SolverOptions solver_options() const {
        SolverOptions s;
        s.kind = solver == "entropic" ? SolverKind::entropic : SolverKind::exact;
        s.epsilon = epsilon;
        return s;
    }
};

struct FitFlags {
    std::string panel;
    std::string target;
    std::string t0;
    std::string method;
    std::string dists;
    std::optional<double> lambda;
    std::optional<double> lipschitz;
    std::vector<double> scale;
    DescentFlags descent;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--panel", panel, "Long-format panel CSV (unit,period,outcome)")->required();
        cmd.add_option("--target", target, "Target unit")->required();
        cmd.add_option("--t0", t0, "First intervention period label")->required();
        cmd.add_option("--method", method, "Estimator")
            ->required()
            ->check(CLI::IsMember({"standard", "m", "james"}));
        cmd.add_option("--dists", dists, "Cause distributions JSON");
        cmd.add_option("--lambda", lambda, "James-bound trade-off parameter");
        cmd.add_option("--lipschitz", lipschitz, "Lipschitz constant (also the default lambda)");
        cmd.add_option("--scale", scale, "Per-coordinate multipliers for the L1 cause metric");
        descent.add_to(cmd);
    }
};

void emit_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
    for (const auto& w : warnings) err << "warning: " << w << '\n';
}

void write_or_print(const Json& doc, const std::string& path, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << doc.dump(2) << '\n';
    } else {
        io::write_json(path, doc);
    }
}

struct PreparedFit {
    PanelData panel;
    std::optional<DistributionTable> dists;
    Method method = Method::standard;
    DocumentContext ctx;
};

PreparedFit prepare_fit(const FitFlags& f, std::ostream& err) {
    PreparedFit prep;
    prep.method = parse_method(f.method);
    if (prep.method != Method::standard && f.dists.empty()) {
        throw UsageError("--method " + f.method + " requires --dists");
    }
    if (prep.method == Method::james_bound && !f.lambda && !f.lipschitz) {
        throw UsageError("--method james requires --lambda or --lipschitz");
    }
    if (f.lipschitz && !(*f.lipschitz >= 0.0)) throw UsageError("--lipschitz must be non-negative");
    if (f.lambda && !(*f.lambda >= 0.0)) throw UsageError("--lambda must be non-negative");

    prep.panel = io::read_panel_csv(f.panel, f.target, f.t0);
    if (!f.dists.empty()) {
        auto loaded = io::read_distributions_json(f.dists);
        emit_warnings(loaded.warnings, err);
        prep.dists = std::move(loaded.set.units);
    }
    auto& o = prep.ctx.options;
    o.config = f.descent.config();
    o.config.validate();
    o.solver = f.descent.solver_options();
    if (prep.method == Method::james_bound) o.lambda = f.lambda ? f.lambda : f.lipschitz;
    if (!f.scale.empty()) o.scale = Eigen::Map<const Vector>(f.scale.data(), static_cast<Eigen::Index>(f.scale.size()));
    prep.ctx.ell = f.lipschitz;
    prep.ctx.panel_path = f.panel;
    prep.ctx.dists_path = f.dists;
    return prep;
}

int cmd_fit(const FitFlags& f, const std::string& out_path, std::ostream& out, std::ostream& err) {
    PreparedFit prep = prepare_fit(f, err);
    const FitResult result =
        fit(prep.method, prep.panel, prep.dists ? &*prep.dists : nullptr, prep.ctx.options);
    write_or_print(make_result_document(result, prep.panel, prep.ctx), out_path, out);
    return kOk;
}

int cmd_bound(const std::string& fit_path, double ell, const std::string& out_path, std::ostream& out) {
    if (!(ell >= 0.0)) throw UsageError("--lipschitz must be non-negative");
    Json doc = io::read_json(fit_path);
    apply_bound(doc, ell);
    write_or_print(doc, out_path, out);
    return kOk;
}

std::string file_stem_for(const std::string& unit) {
    std::string s;
    for (char c : unit) s += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return s;
}

int cmd_placebo(const FitFlags& f, const std::string& out_dir, unsigned threads, std::ostream& out,
                std::ostream& err) {
    if (!f.lipschitz) throw UsageError("placebo requires --lipschitz for the intervals");
    if (f.dists.empty()) throw UsageError("placebo requires --dists");
    PreparedFit prep = prepare_fit(f, err);

    PlaceboParams params;
    params.method = prep.method;
    params.options = prep.ctx.options;
    params.ell = *f.lipschitz;
    params.threads = threads;
    const auto results = placebo_study(prep.panel, *prep.dists, params);

    fs::create_directories(out_dir);
    std::ofstream summary(fs::path(out_dir) / "summary.csv", std::ios::binary | std::ios::trunc);
    if (!summary) throw ParseError(out_dir, "cannot write summary.csv");
    summary << "unit,method,w1,half_width,pre_inside,pre_total,post_inside,post_total,document\n";
    for (const auto& r : results) {
        Json doc = make_result_document(r.fit, r.panel, prep.ctx);
        apply_bound(doc, params.ell);
        doc["placebo_of"] = prep.panel.target_id();
        const std::string name = "placebo_" + file_stem_for(r.unit) + ".json";
        io::write_json(fs::path(out_dir) / name, doc);
        summary << r.unit << ',' << to_string(r.fit.method) << ',' << io::format_double(*r.fit.w1_at_solution)
                << ',' << io::format_double(doc["bound"]["half_width"].get<double>()) << ','
                << r.coverage.pre_inside << ',' << r.coverage.pre_total << ',' << r.coverage.post_inside << ','
                << r.coverage.post_total << ',' << name << '\n';
    }
    out << "placebo: " << results.size() << " documents written to " << out_dir << '\n';
    return kOk;
}

struct DemoFlags {
    std::string out_dir;
    double noise = 0.0;
    std::uint64_t seed = 0;
    Eigen::Index periods = 50;
    Eigen::Index t0 = 15;
    DescentFlags descent;
};

int cmd_synth_demo(const DemoFlags& f, std::ostream& out) {
    DgpConfig cfg;
    cfg.noise_sigma = f.noise;
    cfg.seed = f.seed;
    cfg.periods = f.periods;
    cfg.t0 = f.t0;
    try {
        cfg.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    const SyntheticExperiment exp = generate_panel(cfg);
    const LipschitzEstimate lip = dgp_lipschitz(cfg);

    const fs::path dir(f.out_dir);
    fs::create_directories(dir);
    io::write_panel_csv(dir / "panel.csv", exp.panel);
    io::write_distributions_json(dir / "dists.json", exp.atoms, exp.distributions);
    io::write_series_csv(dir / "truth.csv", exp.panel.period_labels, exp.truth, "truth");
    io::write_json(dir / "lipschitz.json", lipschitz_document(lip, std::nullopt));

    // Fits run on re-ingested files, exactly as they would for external data.
    const std::string t0_label = exp.panel.period_labels[static_cast<std::size_t>(exp.panel.t0)];
    const PanelData panel = io::read_panel_csv(dir / "panel.csv", exp.panel.target_id(), t0_label);
    const DistributionTable dists = io::read_distributions_json(dir / "dists.json").set.units;

    DocumentContext ctx;
    ctx.options.config = f.descent.config();
    ctx.options.config.validate();
    ctx.options.solver = f.descent.solver_options();
    ctx.ell = lip.ell;
    ctx.panel_path = (dir / "panel.csv").string();
    ctx.dists_path = (dir / "dists.json").string();

    Json report;
    report["tool"] = kToolName;
    report["version"] = kToolVersion;
    report["target"] = panel.target_id();
    report["ell"] = lip.ell;
    report["lambda"] = lip.ell;
    Json methods = Json::object();
    const std::vector<std::pair<Method, std::string>> runs{
        {Method::standard, "standard"}, {Method::m_bound, "m"}, {Method::james_bound, "james"}};
    for (const auto& [method, tag] : runs) {
        FitOptions opts = ctx.options;
        if (method == Method::james_bound) opts.lambda = lip.ell;
        const FitResult result = fit(method, panel, &dists, opts);
        Json doc = make_result_document(result, panel, ctx);
        apply_bound(doc, lip.ell);
        io::write_json(dir / ("fit_" + tag + ".json"), doc);

        const auto intervals = intervals_for(result, panel, lip.ell);
        const CoverageReport truth_cov = coverage_report(exp.truth, panel.t0, intervals);
        Json entry;
        entry["weights"] = doc["weights"];
        entry["w1"] = doc["w1"];
        entry["pre_fit_max_abs_error"] = doc["pre_fit_max_abs_error"];
        entry["half_width"] = doc["bound"]["half_width"];
        entry["coverage_observed"] = doc["coverage"];
        entry["truth_inside_all_periods"] = truth_cov.all_inside();
        entry["document"] = "fit_" + tag + ".json";
        methods[tag] = std::move(entry);

        out << tag << ": ";
        for (const auto& [unit, w] : doc["weights"].items()) out << unit << '=' << w.get<double>() << ' ';
        out << "| W1=" << *result.w1_at_solution << " half-width=" << doc["bound"]["half_width"].get<double>()
            << " truth covered: " << (truth_cov.all_inside() ? "yes" : "no") << '\n';
    }
    report["methods"] = std::move(methods);
    io::write_json(dir / "report.json", report);
    out << "ell=" << lip.ell << "; outputs in " << dir.string() << '\n';
    return kOk;
}

int cmd_lipschitz(const std::string& survey, const std::string& schema_path, bool from_dgp,
                  const std::string& out_path, std::ostream& out) {
    if (from_dgp) {
        if (!survey.empty() || !schema_path.empty()) throw UsageError("--from-dgp excludes --survey/--schema");
        write_or_print(lipschitz_document(dgp_lipschitz(DgpConfig{}), std::nullopt), out_path, out);
        return kOk;
    }
    if (survey.empty() || schema_path.empty()) throw UsageError("lipschitz needs --survey and --schema, or --from-dgp");
    const CausesSchema schema = io::read_schema_json(schema_path);
    const auto rows = io::read_survey_csv(survey, schema);
    const LipschitzEstimate est = estimate_lipschitz(rows, schema);
    std::optional<Vector> scale;
    if (schema.scale.size() != 0) scale = schema.scale;
    write_or_print(lipschitz_document(est, scale), out_path, out);
    return kOk;
}

int cmd_dists(const std::string& table, const std::string& schema_path, const std::string& out_path,
              std::ostream& out) {
    const CausesSchema schema = io::read_schema_json(schema_path);
    const auto rows = io::read_cause_table_csv(table, schema);
    const DistributionSet set = build_distributions(rows, schema);
    write_or_print(io::distributions_json(set.atoms, set.units), out_path, out);
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Misspecification-robust synthetic control: M-bound and James-bound estimators"};
    app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
    app.require_subcommand(1);

    FitFlags fit_flags;
    std::string fit_out;
    auto* fit_cmd = app.add_subcommand("fit", "Fit synthetic-control weights");
    fit_flags.add_to(*fit_cmd);
    fit_cmd->add_option("--out", fit_out, "Result document path (default: stdout)");

    std::string bound_fit;
    double bound_ell = 0.0;
    std::string bound_out;
    auto* bound_cmd = app.add_subcommand("bound", "Add misspecification intervals to a fit");
    bound_cmd->add_option("--fit", bound_fit, "Result document from `fit`")->required();
    bound_cmd->add_option("--lipschitz", bound_ell, "Lipschitz constant")->required();
    bound_cmd->add_option("--out", bound_out, "Output path (default: stdout)");

    FitFlags placebo_flags;
    std::string placebo_dir;
    unsigned placebo_threads = 0;
    auto* placebo_cmd = app.add_subcommand("placebo", "Placebo study: refit with each donor as target");
    placebo_flags.add_to(*placebo_cmd);
    placebo_cmd->add_option("--out-dir", placebo_dir, "Output directory")->required();
    placebo_cmd->add_option("--threads", placebo_threads, "Worker threads (0 = all cores)");

    DemoFlags demo;
    auto* demo_cmd = app.add_subcommand("synth-demo", "Generate the synthetic experiment and fit all estimators");
    demo_cmd->add_option("--out-dir", demo.out_dir, "Output directory")->required();
    demo_cmd->add_option("--noise", demo.noise, "Std. dev. of additive outcome noise");
    demo_cmd->add_option("--seed", demo.seed, "Noise seed");
    demo_cmd->add_option("--periods", demo.periods, "Number of periods")->capture_default_str();
    demo_cmd->add_option("--t0", demo.t0, "Intervention period index")->capture_default_str();
    demo.descent.add_to(*demo_cmd);

    std::string lip_survey;
    std::string lip_schema;
    bool lip_dgp = false;
    std::string lip_out;
    auto* lip_cmd = app.add_subcommand("lipschitz", "Estimate the Lipschitz constant of the conditional outcome");
    lip_cmd->add_option("--survey", lip_survey, "Survey microdata CSV");
    lip_cmd->add_option("--schema", lip_schema, "Cause schema JSON");
    lip_cmd->add_flag("--from-dgp", lip_dgp, "Use the synthetic experiment's outcome function");
    lip_cmd->add_option("--out", lip_out, "Output path (default: stdout)");

    std::string dists_table;
    std::string dists_schema;
    std::string dists_out;
    auto* dists_cmd = app.add_subcommand("dists", "Build cause distributions from a census-style table");
    dists_cmd->add_option("--table", dists_table, "CSV with unit, cause columns and weight/count")->required();
    dists_cmd->add_option("--schema", dists_schema, "Cause schema JSON")->required();
    dists_cmd->add_option("--out", dists_out, "Output path (default: stdout)");

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());

    auto usage_failure = [&](const std::string& msg, CLI::App* cmd) {
        err << "error[usage]: " << msg << '\n';
        err << (cmd ? cmd->help() : app.help());
        return kUsage;
    };

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        CLI::App* active = nullptr;
        for (auto* sub : app.get_subcommands()) active = sub;
        return usage_failure(e.what(), active);
    }

    CLI::App* active = app.get_subcommands().front();
    try {
        if (active == fit_cmd) return cmd_fit(fit_flags, fit_out, out, err);
        if (active == bound_cmd) return cmd_bound(bound_fit, bound_ell, bound_out, out);
        if (active == placebo_cmd) return cmd_placebo(placebo_flags, placebo_dir, placebo_threads, out, err);
        if (active == demo_cmd) return cmd_synth_demo(demo, out);
        if (active == lip_cmd) return cmd_lipschitz(lip_survey, lip_schema, lip_dgp, lip_out, out);
        if (active == dists_cmd) return cmd_dists(dists_table, dists_schema, dists_out, out);
    } catch (const UsageError& e) {
        return usage_failure(e.what(), active);
    } catch (const ParseError& e) {
        err << "error[input]: " << e.what() << '\n';
        return kUsage;
    } catch (const fs::filesystem_error& e) {
        err << "error[input]: " << e.what() << '\n';
        return kUsage;
    } catch (const InvalidArgument& e) {
        err << "error[schema]: " << e.what() << '\n';
        return kSchema;
    } catch (const NumericalError& e) {
        err << "error[numerical]: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        err << "error[internal]: " << e.what() << '\n';
        return kNumerical;
    }
    return usage_failure("no command", nullptr);
}

}  // namespace mbsc::cli
