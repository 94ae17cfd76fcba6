#include "kscope/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kscope/error.hpp"
#include "kscope/estimate.hpp"
#include "kscope/gof.hpp"
#include "kscope/json_io.hpp"
#include "kscope/mcharness.hpp"
#include "kscope/pattern.hpp"
#include "kscope/simulate.hpp"

namespace kscope {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::Io, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorCode::Config, path + ": " + e.what());
    }
}

fs::path sidecar_path(const fs::path& artifact) {
    fs::path p = artifact;
    return p.replace_extension(".json");
}

void write_text(const std::string& path, const std::string& text, std::ostream& fallback) {
    if (path.empty()) {
        fallback << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    require(f.good(), ErrorCode::Io, "cannot write " + path);
    f << text;
    require(f.good(), ErrorCode::Io, "failed writing " + path);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// --window accepts an inline spec or a JSON file. Without it, the window is
// taken from the sidecar written next to the pattern by `simulate`.
ObservationWindow resolve_window(const std::string& spec, const std::string& pattern_path) {
    if (!spec.empty()) {
        if (spec.size() > 5 && spec.ends_with(".json")) return window_from_json(read_json_file(spec));
        return parse_window_spec(spec);
    }
    const fs::path side = sidecar_path(pattern_path);
    require(!pattern_path.empty() && fs::exists(side), ErrorCode::Config,
            "--window is required (no sidecar " + side.string() + " found)");
    const json j = read_json_file(side.string());
    require(j.contains("window"), ErrorCode::Config, side.string() + " has no window");
    return window_from_json(j.at("window"));
}

struct PatternInput {
    std::string path;
    std::string window;
};

PointPattern load_input(const PatternInput& in) {
    require(!in.path.empty(), ErrorCode::Config, "a pattern file is required");
    return load_pattern(in.path, resolve_window(in.window, in.path));
}

WeightV parse_weight_V(const std::string& s) {
    if (s == "lebesgue") return WeightV::lebesgue();
    if (s.starts_with("exp_density:")) return WeightV::exp_density(std::stod(s.substr(12)));
    fail(ErrorCode::Config, "--weight-V must be lebesgue or exp_density:<b>");
}

Weightv parse_weight_v(const std::string& s) {
    if (s == "const_one") return Weightv::const_one();
    if (s.starts_with("exp_decay:")) return Weightv::exp_decay(std::stod(s.substr(10)));
    fail(ErrorCode::Config, "--weight-v must be const_one or exp_decay:<a>");
}

// Flags shared by gof and twosample.
struct TestFlags {
    std::string stat = "ks";
    std::string ball = "l2";
    double alpha = 0.5;
    double R = 1.0;
    double gamma = 0.05;
    std::string weight_V = "lebesgue";
    std::string weight_v = "const_one";
    int chi2_k = 5;
    std::vector<double> chi2_radii;
    std::string kernel = "indicator";
    double bandwidth = 0.0;
    std::string estimator = "ht";
    std::string estimation_window;
    bool clamp = false;
    bool fail_on_reject = false;
    std::string out;

    void attach(CLI::App* cmd) {
        cmd->add_option("--ball", ball, "Structuring body l1|l2|linf[:scale]")->capture_default_str();
        cmd->add_option("--alpha", alpha, "Scaling exponent in (0, 1/2]")->capture_default_str();
        cmd->add_option("--R", R, "Upper end of the scaled radius range")->capture_default_str();
        cmd->add_option("--gamma", gamma, "Significance level")->capture_default_str();
        cmd->add_option("--weight-V", weight_V, "lebesgue | exp_density:<b>")->capture_default_str();
        cmd->add_option("--weight-v", weight_v, "const_one | exp_decay:<a>")->capture_default_str();
        cmd->add_option("--chi2-k", chi2_k, "Number of chi2 cells")->capture_default_str();
        cmd->add_option("--chi2-radii", chi2_radii, "Explicit chi2 radii r_1 < ... < r_k")->delimiter(',');
        cmd->add_option("--kernel", kernel, "Variance kernel indicator|triangular")->capture_default_str();
        cmd->add_option("--bandwidth", bandwidth, "Variance bandwidth (0: default)")->capture_default_str();
        cmd->add_flag("--clamp", clamp, "Substitute fallbacks for degenerate variance estimates");
        cmd->add_flag("--fail-on-reject", fail_on_reject, "Exit with code 2 on REJECT");
        cmd->add_option("--out", out, "Report JSON path (default stdout)");
    }

    TestOptions options(int dim) const {
        TestOptions o;
        o.body = parse_body_spec(ball, dim);
        o.alpha = alpha;
        o.R = R;
        o.gamma = gamma;
        o.V = parse_weight_V(weight_V);
        o.v = parse_weight_v(weight_v);
        o.chi2_k = chi2_k;
        o.chi2_radii = chi2_radii;
        o.kernel = parse_kernel(kernel);
        o.bandwidth = bandwidth;
        o.estimator = parse_estimator_kind(estimator);
        if (!estimation_window.empty()) o.estimation_window = resolve_window(estimation_window, "");
        o.clamp = clamp;
        return o;
    }
};

void validate_common(const TestFlags& f) {
    require(f.gamma > 0.0 && f.gamma < 1.0, ErrorCode::Config, "gamma must lie in (0, 1)");
    check_alpha(f.alpha);
}

int finish_report(const TestReport& report, json input, const TestFlags& f, std::ostream& out,
                  std::ostream& err) {
    json j = to_json(report);
    j["config"]["input"] = std::move(input);
    write_text(f.out, dump(j), out);
    if (report.decision == Decision::Undetermined) {
        err << "error: " << report.error.value_or("undetermined") << " (rerun with --clamp to substitute fallbacks)\n";
        return kExitConfig;
    }
    if (report.decision == Decision::Reject && f.fail_on_reject) return kExitReject;
    return kExitOk;
}

json input_json(const PointPattern& p, const std::string& path) {
    return {{"pattern", path}, {"window", window_to_json(p.window())}, {"n_points", p.size()}};
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Edge-corrected K-function estimation and goodness-of-fit tests for point patterns", "kscope"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "kscope 0.1.0");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Simulate a point pattern");
    std::string model_name_flag = "poisson", model_config, sim_window, sim_out;
    std::optional<double> lambda, kappa, mu, sigma_c, r_c;
    std::uint64_t seed = 0, stream_index = 0;
    sim->add_option("--model", model_name_flag, "poisson|thomas|matern_cluster")->capture_default_str();
    sim->add_option("--model-config", model_config, "Model JSON file (instead of inline flags)");
    sim->add_option("--lambda", lambda, "Poisson intensity");
    sim->add_option("--kappa", kappa, "Parent intensity");
    sim->add_option("--mu", mu, "Mean cluster size");
    sim->add_option("--sigma-c", sigma_c, "Thomas dispersion");
    sim->add_option("--r-c", r_c, "Matern cluster radius");
    sim->add_option("--window", sim_window, "box:x0,y0,x1,y1 | disk:cx,cy,r | window JSON file")->required();
    sim->add_option("--seed", seed, "Master seed")->capture_default_str();
    sim->add_option("--stream", stream_index, "Stream index")->capture_default_str();
    sim->add_option("--out", sim_out, "Pattern CSV path (default stdout; a sidecar .json is written next to it)");

    // kfun
    auto* kf = app.add_subcommand("kfun", "Estimate the K-function");
    PatternInput kf_in;
    std::string kf_ball = "l2", kf_estimator = "ht", kf_estimation_window, kf_out;
    double kf_rmax = 0.0;
    kf->add_option("--pattern", kf_in.path, "Pattern CSV")->required();
    kf->add_option("--window", kf_in.window, "Window of the pattern (default: the simulate sidecar)");
    kf->add_option("--ball", kf_ball, "Structuring body l1|l2|linf[:scale]")->capture_default_str();
    kf->add_option("--rmax", kf_rmax, "Largest radius")->required();
    kf->add_option("--estimator", kf_estimator, "ht|naive|border")->capture_default_str();
    kf->add_option("--estimation-window", kf_estimation_window, "naive: window W inside the plus-sampled pattern");
    kf->add_option("--out", kf_out, "K table CSV path (default stdout)");

    // gof
    auto* gof = app.add_subcommand("gof", "One-sample goodness-of-fit test");
    PatternInput gof_in;
    TestFlags gof_flags;
    std::string null_kind = "poisson", null_k_file, null_model_file;
    std::optional<double> lambda0;
    gof->add_option("--pattern", gof_in.path, "Pattern CSV")->required();
    gof->add_option("--window", gof_in.window, "Window of the pattern (default: the simulate sidecar)");
    gof->add_option("--null", null_kind, "Null hypothesis: poisson")->capture_default_str();
    gof->add_option("--lambda0", lambda0, "Null intensity");
    gof->add_option("--null-k", null_k_file, "CSV of (r, K0(r)) knots, interpolated linearly");
    gof->add_option("--null-model", null_model_file, "Model JSON file whose K-function is the null");
    gof->add_option("--stat", gof_flags.stat, "ks|cvm|chi2")->capture_default_str();
    gof->add_option("--estimator", gof_flags.estimator, "ht|naive|border")->capture_default_str();
    gof->add_option("--estimation-window", gof_flags.estimation_window, "naive: window W inside the pattern");
    gof_flags.attach(gof);

    // twosample
    auto* two = app.add_subcommand("twosample", "Two-sample test");
    PatternInput in_a, in_b;
    TestFlags two_flags;
    two->add_option("--pattern-a", in_a.path, "First pattern CSV")->required();
    two->add_option("--pattern-b", in_b.path, "Second pattern CSV")->required();
    two->add_option("--window-a", in_a.window, "Window of the first pattern");
    two->add_option("--window-b", in_b.window, "Window of the second pattern");
    two->add_option("--stat", two_flags.stat, "ks|cvm")->capture_default_str();
    two->add_option("--estimator", two_flags.estimator, "ht|border")->capture_default_str();
    two_flags.attach(two);

    // mc
    auto* mc = app.add_subcommand("mc", "Run a Monte-Carlo study");
    std::string mc_config, mc_out, mc_csv;
    std::optional<unsigned> mc_workers;
    mc->add_option("config", mc_config, "Study config JSON")->required();
    mc->add_option("--out", mc_out, "Report JSON path (default stdout)");
    mc->add_option("--csv", mc_csv, "Summary CSV path");
    mc->add_option("--workers", mc_workers, "Worker threads (KSCOPE_THREADS takes precedence)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << "kscope 0.1.0\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        if (sim->parsed()) {
            ModelSpec model;
            if (!model_config.empty()) {
                model = model_from_json(read_json_file(model_config));
            } else {
                auto need = [](const std::optional<double>& v, const char* flag) {
                    require(v.has_value(), ErrorCode::Config, std::string(flag) + " is required for this model");
                    return *v;
                };
                if (model_name_flag == "poisson") {
                    model = PoissonModel{need(lambda, "--lambda")};
                } else if (model_name_flag == "thomas") {
                    model = ThomasModel{need(kappa, "--kappa"), need(mu, "--mu"), need(sigma_c, "--sigma-c")};
                } else if (model_name_flag == "matern_cluster") {
                    model = MaternClusterModel{need(kappa, "--kappa"), need(mu, "--mu"), need(r_c, "--r-c")};
                } else {
                    fail(ErrorCode::Config, "unknown model '" + model_name_flag + "'");
                }
            }
            validate_model(model);
            const ObservationWindow window = resolve_window(sim_window, "");
            const PointPattern p = simulate(model, window, {seed, stream_index});
            std::ostringstream csv;
            write_pattern_csv(p, csv);
            write_text(sim_out, csv.str(), out);
            if (!sim_out.empty()) {
                const json side{{"schema_version", kSchemaVersion},
                                {"command", "simulate"},
                                {"model", model_to_json(model)},
                                {"window", window_to_json(window)},
                                {"seed", {{"master_seed", seed}, {"stream_index", stream_index}}},
                                {"n_points", p.size()}};
                write_text(sidecar_path(sim_out).string(), dump(side), out);
            }
            return kExitOk;
        }

        if (kf->parsed()) {
            const PointPattern p = load_input(kf_in);
            const StructuringBody body = parse_body_spec(kf_ball, p.dim());
            const EstimatorKind kind = parse_estimator_kind(kf_estimator);
            std::optional<ObservationWindow> est;
            if (!kf_estimation_window.empty()) est = resolve_window(kf_estimation_window, "");
            require(kind == EstimatorKind::Naive || !est || *est == p.window(), ErrorCode::Config,
                    "--estimation-window applies to the naive estimator only");
            const ObservationWindow& W = est ? *est : p.window();
            require(kf_rmax > 0.0, ErrorCode::Config, "--rmax must be positive");
            require(kf_rmax * body.circumradius() <= 0.5 * W.inball_radius(), ErrorCode::GuardViolation,
                    "--rmax too large: rmax * circumradius(B) must not exceed half the inball radius of the "
                    "window (" + std::to_string(0.5 * W.inball_radius()) + ")");
            const KEstimate k = k_hat(p, body, kf_rmax, kind, est);
            std::ostringstream csv;
            write_k_csv(k, csv);
            write_text(kf_out, csv.str(), out);
            if (!kf_out.empty()) {
                json side{{"schema_version", kSchemaVersion},
                          {"command", "kfun"},
                          {"input", input_json(p, kf_in.path)},
                          {"body", body_to_json(body)},
                          {"r_max", kf_rmax},
                          {"estimator", to_string(kind)},
                          {"estimation_window", window_to_json(W)},
                          {"window_volume", k.window_volume},
                          {"pair_count", k.pair_count()}};
                write_text(sidecar_path(kf_out).string(), dump(side), out);
            }
            return kExitOk;
        }

        if (gof->parsed()) {
            validate_common(gof_flags);
            const PointPattern p = load_input(gof_in);
            const TestOptions opt = gof_flags.options(p.dim());
            std::optional<NullHypothesis> h0;
            const int sources = int(!null_k_file.empty()) + int(!null_model_file.empty());
            require(sources <= 1, ErrorCode::Config, "give at most one of --null-k and --null-model");
            if (!null_model_file.empty()) {
                const ModelSpec m = model_from_json(read_json_file(null_model_file));
                h0 = NullHypothesis{lambda0.value_or(model_intensity(m)), NullK::from_model(m, opt.body)};
            } else {
                require(lambda0.has_value(), ErrorCode::Config, "--lambda0 is required");
                if (!null_k_file.empty()) {
                    h0 = NullHypothesis{*lambda0, NullK::load_csv(null_k_file)};
                } else {
                    require(null_kind == "poisson", ErrorCode::Config,
                            "--null must be poisson (use --null-k or --null-model for other hypotheses)");
                    h0 = NullHypothesis{*lambda0, NullK::poisson(opt.body)};
                }
            }
            const auto reports = one_sample_reports(p, *h0, opt, {gof_flags.stat});
            return finish_report(reports.front(), input_json(p, gof_in.path), gof_flags, out, err);
        }

        if (two->parsed()) {
            validate_common(two_flags);
            const PointPattern a = load_input(in_a);
            const PointPattern b = load_input(in_b);
            require(a.dim() == b.dim(), ErrorCode::DimensionMismatch, "patterns differ in dimension");
            const TestOptions opt = two_flags.options(a.dim());
            const TestReport report = two_sample_report(a, b, opt, two_flags.stat);
            return finish_report(report, {{"a", input_json(a, in_a.path)}, {"b", input_json(b, in_b.path)}},
                                 two_flags, out, err);
        }

        if (mc->parsed()) {
            StudyConfig cfg = study_config_from_json(read_json_file(mc_config));
            if (mc_workers) cfg.workers = *mc_workers;
            const StudyReport report = run_study(cfg);
            write_text(mc_out, dump(to_json(report)), out);
            if (!mc_csv.empty()) {
                std::ostringstream csv;
                write_summary_csv(report, csv);
                write_text(mc_csv, csv.str(), out);
            }
            for (const auto& v : report.verdicts) {
                if (!v.passed) err << "verdict failed: " << v.name << " (" << v.rule << "; observed " << v.observed
                                   << ")\n";
            }
            return report.passed ? kExitOk : kExitVerdictFailure;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        err << "error: malformed number (" << e.what() << ")\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}

}  // namespace kscope
