#include "kscope/mcharness.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>
#include <thread>
#include <tuple>

#include "kscope/detail/compensated_sum.hpp"
#include "kscope/error.hpp"
#include "kscope/json_io.hpp"

namespace kscope {

using nlohmann::json;

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

// Wraps library errors raised while reading a config as Config errors.
template <class F>
auto as_config(F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Config) throw;
        fail(ErrorCode::Config, e.what());
    } catch (const json::exception& e) {
        fail(ErrorCode::Config, e.what());
    }
}

struct Moments {
    double mean = 0.0;
    double var = 0.0;  // unbiased
    double se = 0.0;   // of the mean
    double m2 = 0.0;   // central moments (1/n)
    double m4 = 0.0;
};

Moments moments(const std::vector<double>& x) {
    Moments m;
    const double n = static_cast<double>(x.size());
    if (x.empty()) return m;
    detail::CompensatedSum s;
    for (double v : x) s.add(v);
    m.mean = s.value() / n;
    detail::CompensatedSum s2, s4;
    for (double v : x) {
        const double d = v - m.mean;
        s2.add(d * d);
        s4.add(d * d * d * d);
    }
    m.m2 = s2.value() / n;
    m.m4 = s4.value() / n;
    m.var = x.size() > 1 ? s2.value() / (n - 1.0) : 0.0;
    m.se = std::sqrt(m.var / n);
    return m;
}

// Sample covariance and the standard error of its estimate.
std::pair<double, double> covariance(const std::vector<double>& x, const std::vector<double>& y) {
    const Moments mx = moments(x), my = moments(y);
    const double n = static_cast<double>(x.size());
    detail::CompensatedSum c, c2;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double p = (x[i] - mx.mean) * (y[i] - my.mean);
        c.add(p);
        c2.add(p * p);
    }
    const double cov = x.size() > 1 ? c.value() / (n - 1.0) : 0.0;
    const double biased = c.value() / n;
    const double se = std::sqrt(std::max(c2.value() / n - biased * biased, 0.0) / n);
    return {cov, se};
}

std::string num(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string tagged(const std::string& name, const std::string& tag) { return name + "[" + tag + "]"; }

double tol(const StudyConfig& cfg, const std::string& key) { return cfg.tolerances.at(key); }

std::map<std::string, double> default_tolerances(const StudyConfig& cfg) {
    switch (cfg.study) {
        case StudyKind::Unbiasedness: return {{"se_multiple", 3.0}};
        case StudyKind::VarianceConvergence: return {{"max_relative_error", 0.15}, {"noise_multiple", 2.0}};
        case StudyKind::Sigma2Consistency:
            return {{"max_relative_bias", std::holds_alternative<PoissonModel>(cfg.model) ? 0.10 : 0.15}};
        case StudyKind::NullLevel:
            return {{"level_low", cfg.test.gamma - 0.03}, {"level_high", cfg.test.gamma + 0.05}};
        case StudyKind::Power: return {{"min_power", 0.5}, {"noise_multiple", 2.0}};
        case StudyKind::LimitLaw: return {{"max_ks_distance", 0.08}};
        case StudyKind::EstimatorEquivalence: return {{"min_reduction_factor", 2.0}, {"noise_multiple", 2.0}};
    }
    return {};
}

std::uint64_t stream(std::size_t window_index, std::size_t k) {
    return (static_cast<std::uint64_t>(window_index) << 32) | static_cast<std::uint64_t>(k);
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

std::string_view to_string(StudyKind kind) {
    switch (kind) {
        case StudyKind::Unbiasedness: return "unbiasedness";
        case StudyKind::VarianceConvergence: return "variance_convergence";
        case StudyKind::Sigma2Consistency: return "sigma2_consistency";
        case StudyKind::NullLevel: return "null_level";
        case StudyKind::Power: return "power";
        case StudyKind::LimitLaw: return "limit_law";
        case StudyKind::EstimatorEquivalence: return "estimator_equivalence";
    }
    return "";
}

StudyKind parse_study_kind(std::string_view name) {
    const std::string s = lower(name);
    for (StudyKind k : {StudyKind::Unbiasedness, StudyKind::VarianceConvergence, StudyKind::Sigma2Consistency,
                        StudyKind::NullLevel, StudyKind::Power, StudyKind::LimitLaw,
                        StudyKind::EstimatorEquivalence}) {
        if (s == to_string(k)) return k;
    }
    fail(ErrorCode::Config, "unknown study '" + std::string(name) + "'");
}

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    require(j.is_object(), ErrorCode::Config, where + " must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        require(allowed.count(key) > 0, ErrorCode::Config, "unknown field '" + key + "' in " + where);
    }
}

double get_number(const json& j, const char* key) {
    require(j.at(key).is_number(), ErrorCode::Config, std::string("field '") + key + "' must be a number");
    return j.at(key).get<double>();
}

std::vector<double> get_numbers(const json& j, const char* key) {
    const json& a = j.at(key);
    require(a.is_array(), ErrorCode::Config, std::string("field '") + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const json& v : a) {
        require(v.is_number(), ErrorCode::Config, std::string("field '") + key + "' must be an array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

std::uint64_t get_unsigned(const json& j, const char* key) {
    const json& v = j.at(key);
    require(v.is_number_integer() && (v.is_number_unsigned() || v.get<std::int64_t>() >= 0), ErrorCode::Config,
            std::string("field '") + key + "' must be a nonnegative integer");
    return v.get<std::uint64_t>();
}

void parse_test(const json& t, StudyConfig& cfg, int dim) {
    check_keys(t,
               {"statistics", "two_sample", "body", "alpha", "R", "gamma", "weight_V", "weight_v", "chi2_k",
                "chi2_radii", "kernel", "bandwidth", "clamp", "limit_constant_scale"},
               "test");
    TestOptions& o = cfg.test;
    if (t.contains("statistics")) {
        cfg.statistics.clear();
        require(t.at("statistics").is_array() && !t.at("statistics").empty(), ErrorCode::Config,
                "test.statistics must be a non-empty array");
        for (const json& s : t.at("statistics")) {
            require(s.is_string(), ErrorCode::Config, "test.statistics entries must be strings");
            cfg.statistics.push_back(lower(s.get<std::string>()));
        }
    }
    if (t.contains("two_sample")) {
        require(t.at("two_sample").is_boolean(), ErrorCode::Config, "test.two_sample must be a boolean");
        cfg.two_sample = t.at("two_sample").get<bool>();
    }
    o.body = t.contains("body") ? body_from_json(t.at("body")) : StructuringBody(dim, BodyShape::L2, 1.0);
    require(o.body.dim() == dim, ErrorCode::Config, "test.body dimension differs from the windows");
    if (t.contains("alpha")) o.alpha = get_number(t, "alpha");
    if (t.contains("R")) o.R = get_number(t, "R");
    if (t.contains("gamma")) o.gamma = get_number(t, "gamma");
    if (t.contains("weight_V")) {
        const json& w = t.at("weight_V");
        check_keys(w, {"kind", "b"}, "test.weight_V");
        const std::string kind = lower(w.at("kind").get<std::string>());
        if (kind == "lebesgue") o.V = WeightV::lebesgue();
        else if (kind == "exp_density") o.V = as_config([&] { return WeightV::exp_density(get_number(w, "b")); });
        else fail(ErrorCode::Config, "weight_V.kind must be lebesgue or exp_density");
    }
    if (t.contains("weight_v")) {
        const json& w = t.at("weight_v");
        check_keys(w, {"kind", "a"}, "test.weight_v");
        const std::string kind = lower(w.at("kind").get<std::string>());
        if (kind == "const_one") o.v = Weightv::const_one();
        else if (kind == "exp_decay") o.v = as_config([&] { return Weightv::exp_decay(get_number(w, "a")); });
        else fail(ErrorCode::Config, "weight_v.kind must be const_one or exp_decay");
    }
    if (t.contains("chi2_k")) o.chi2_k = static_cast<int>(get_unsigned(t, "chi2_k"));
    if (t.contains("chi2_radii")) o.chi2_radii = get_numbers(t, "chi2_radii");
    if (t.contains("kernel")) o.kernel = as_config([&] { return parse_kernel(t.at("kernel").get<std::string>()); });
    if (t.contains("bandwidth")) o.bandwidth = get_number(t, "bandwidth");
    if (t.contains("clamp")) {
        require(t.at("clamp").is_boolean(), ErrorCode::Config, "test.clamp must be a boolean");
        o.clamp = t.at("clamp").get<bool>();
    }
    if (t.contains("limit_constant_scale")) o.limit_constant_scale = get_number(t, "limit_constant_scale");
}

}  // namespace

StudyConfig study_config_from_json(const json& j) {
    return as_config([&] {
        check_keys(j,
                   {"schema_version", "study", "model", "alternative", "windows", "window_sides", "dim",
                    "replicates", "master_seed", "workers", "radii", "cross_radii", "estimator", "test",
                    "tolerances"},
                   "study config");
        if (j.contains("schema_version")) {
            require(j.at("schema_version") == kSchemaVersion, ErrorCode::Config,
                    "unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");
        }
        StudyConfig cfg;
        require(j.contains("study"), ErrorCode::Config, "missing field 'study'");
        cfg.study = parse_study_kind(j.at("study").get<std::string>());
        require(j.contains("model"), ErrorCode::Config, "missing field 'model'");
        cfg.model = model_from_json(j.at("model"));
        if (j.contains("alternative")) cfg.alternative = model_from_json(j.at("alternative"));

        if (j.contains("windows")) {
            require(!j.contains("window_sides"), ErrorCode::Config, "give either windows or window_sides");
            require(j.at("windows").is_array(), ErrorCode::Config, "windows must be an array");
            for (const json& w : j.at("windows")) cfg.windows.push_back(window_from_json(w));
        } else {
            require(j.contains("window_sides"), ErrorCode::Config, "missing field 'windows' or 'window_sides'");
            const int dim = j.contains("dim") ? static_cast<int>(get_unsigned(j, "dim")) : 2;
            for (double L : get_numbers(j, "window_sides")) cfg.windows.push_back(ObservationWindow::cube(dim, L));
        }
        require(!cfg.windows.empty(), ErrorCode::Config, "the window ladder is empty");
        const int dim = cfg.windows.front().dim();
        for (std::size_t i = 1; i < cfg.windows.size(); ++i) {
            require(cfg.windows[i].dim() == dim, ErrorCode::Config, "ladder windows differ in dimension");
            require(cfg.windows[i].volume() > cfg.windows[i - 1].volume(), ErrorCode::Config,
                    "ladder windows must be strictly increasing in volume");
        }

        require(j.contains("replicates"), ErrorCode::Config, "missing field 'replicates'");
        cfg.replicates = get_unsigned(j, "replicates");
        require(cfg.replicates >= 1, ErrorCode::Config, "replicates must be at least 1");
        if (j.contains("master_seed")) cfg.master_seed = get_unsigned(j, "master_seed");
        if (j.contains("workers")) cfg.workers = static_cast<unsigned>(get_unsigned(j, "workers"));
        if (j.contains("radii")) cfg.radii = get_numbers(j, "radii");
        if (j.contains("cross_radii")) {
            const auto c = get_numbers(j, "cross_radii");
            require(c.size() == 2, ErrorCode::Config, "cross_radii must be [s, t]");
            cfg.cross_radii = std::make_pair(c[0], c[1]);
        }
        if (j.contains("estimator")) {
            cfg.estimator = parse_estimator_kind(j.at("estimator").get<std::string>());
        }
        parse_test(j.contains("test") ? j.at("test") : json::object(), cfg, dim);
        cfg.test.estimator = EstimatorKind::HT;

        // Semantic checks.
        require(cfg.test.gamma > 0.0 && cfg.test.gamma < 1.0, ErrorCode::Config, "gamma must lie in (0, 1)");
        check_alpha(cfg.test.alpha);
        require(cfg.test.R > 0.0, ErrorCode::Config, "test.R must be positive");
        for (double r : cfg.radii) require(r >= 0.0, ErrorCode::Config, "radii must be nonnegative");
        const bool poisson = std::holds_alternative<PoissonModel>(cfg.model);
        switch (cfg.study) {
            case StudyKind::Unbiasedness:
            case StudyKind::VarianceConvergence:
                require(poisson, ErrorCode::Config, std::string(to_string(cfg.study)) + " needs a Poisson model");
                require(!cfg.radii.empty(), ErrorCode::Config, "radii must list at least one radius");
                require(cfg.estimator != EstimatorKind::Naive, ErrorCode::Config,
                        "this study supports the ht and border estimators");
                break;
            case StudyKind::EstimatorEquivalence:
                require(poisson, ErrorCode::Config, "estimator_equivalence needs a Poisson model");
                for (const auto& w : cfg.windows) {
                    require(w.shape() == WindowShape::Box, ErrorCode::Config,
                            "estimator_equivalence needs box windows");
                }
                if (cfg.radii.empty()) cfg.radii = {cfg.test.R};
                break;
            case StudyKind::Power:
                require(cfg.alternative.has_value(), ErrorCode::Config, "power study needs an 'alternative' model");
                [[fallthrough]];
            case StudyKind::NullLevel:
            case StudyKind::LimitLaw:
                for (const auto& s : cfg.statistics) {
                    const bool ok = s == "ks" || s == "cvm" || (s == "chi2" && !cfg.two_sample);
                    require(ok, ErrorCode::Config, "unsupported statistic '" + s + "'");
                }
                if (!cfg.two_sample) (void)NullK::from_model(cfg.model, cfg.test.body);
                break;
            case StudyKind::Sigma2Consistency: break;
        }

        const auto defaults = default_tolerances(cfg);
        std::map<std::string, double> tolerances = defaults;
        if (j.contains("tolerances")) {
            const json& t = j.at("tolerances");
            require(t.is_object(), ErrorCode::Config, "tolerances must be an object");
            for (const auto& [key, value] : t.items()) {
                require(defaults.count(key) > 0, ErrorCode::Config,
                        "unknown tolerance '" + key + "' for study " + std::string(to_string(cfg.study)));
                require(value.is_number(), ErrorCode::Config, "tolerance '" + key + "' must be a number");
                tolerances[key] = value.get<double>();
            }
        }
        cfg.tolerances = std::move(tolerances);
        return cfg;
    });
}

json study_config_to_json(const StudyConfig& cfg) {
    json windows = json::array();
    for (const auto& w : cfg.windows) windows.push_back(window_to_json(w));
    json test = options_to_json(cfg.test);
    test.erase("estimator");
    test["statistics"] = cfg.statistics;
    test["two_sample"] = cfg.two_sample;
    test["chi2_k"] = cfg.test.chi2_k;
    test["chi2_radii"] = cfg.test.chi2_radii;
    json j{{"schema_version", kSchemaVersion},
           {"study", to_string(cfg.study)},
           {"model", model_to_json(cfg.model)},
           {"windows", windows},
           {"replicates", cfg.replicates},
           {"master_seed", cfg.master_seed},
           {"radii", cfg.radii},
           {"estimator", to_string(cfg.estimator)},
           {"test", test},
           {"tolerances", cfg.tolerances},
           {"seeding", "replicate k in ladder window w uses stream_index w*2^32 + k; two-sample "
                       "replicates use streams 2k and 2k+1"}};
    if (cfg.alternative) j["alternative"] = model_to_json(*cfg.alternative);
    if (cfg.cross_radii) j["cross_radii"] = {cfg.cross_radii->first, cfg.cross_radii->second};
    return j;
}

// ---------------------------------------------------------------------------
// Reports

const Metric& WindowSummary::metric(const std::string& name) const {
    for (const Metric& m : metrics) {
        if (m.name == name) return m;
    }
    fail(ErrorCode::InvalidArgument, "no metric named '" + name + "'");
}

json to_json(const StudyReport& report, bool include_runtime) {
    json windows = json::array();
    for (const auto& w : report.windows) {
        json metrics = json::array();
        for (const auto& m : w.metrics) {
            metrics.push_back({{"name", m.name},
                               {"value", m.value},
                               {"se", m.se ? json(*m.se) : json(nullptr)},
                               {"reference", m.reference ? json(*m.reference) : json(nullptr)}});
        }
        windows.push_back({{"window", window_to_json(w.window)}, {"volume", w.window.volume()}, {"metrics", metrics}});
    }
    json verdicts = json::array();
    for (const auto& v : report.verdicts) {
        verdicts.push_back({{"name", v.name},
                            {"rule", v.rule},
                            {"passed", v.passed},
                            {"observed", v.observed},
                            {"threshold", v.threshold}});
    }
    json j{{"schema_version", kSchemaVersion},
           {"study", to_string(report.study)},
           {"config", report.config},
           {"windows", windows},
           {"verdicts", verdicts},
           {"passed", report.passed}};
    if (include_runtime) j["runtime"] = {{"seconds", report.runtime_seconds}, {"workers", report.workers}};
    return j;
}

void write_summary_csv(const StudyReport& report, std::ostream& out) {
    out << "study,window_index,window_volume,metric,value,se,reference\n";
    for (std::size_t i = 0; i < report.windows.size(); ++i) {
        const auto& w = report.windows[i];
        for (const auto& m : w.metrics) {
            out << to_string(report.study) << ',' << i << ',' << num(w.window.volume()) << ",\"" << m.name << "\","
                << num(m.value) << ',' << (m.se ? num(*m.se) : "") << ','
                << (m.reference ? num(*m.reference) : "") << '\n';
        }
    }
}

unsigned resolve_workers(unsigned configured) {
    if (const char* env = std::getenv("KSCOPE_THREADS")) {
        unsigned v = 0;
        const std::string_view s(env);
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        require(ec == std::errc() && ptr == s.data() + s.size() && v >= 1, ErrorCode::Config,
                "KSCOPE_THREADS must be a positive integer");
        return v;
    }
    if (configured > 0) return configured;
    return std::max(1u, std::thread::hardware_concurrency());
}

double chi2_1_cdf(double x) { return x <= 0.0 ? 0.0 : std::erf(std::sqrt(0.5 * x)); }

double half_normal_cdf(double x) { return x <= 0.0 ? 0.0 : std::erf(x / std::numbers::sqrt2); }

double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    return d;
}

// ---------------------------------------------------------------------------
// Studies

namespace {

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

StudyReport start_report(const StudyConfig& cfg, StudyKind expected) {
    require(cfg.study == expected, ErrorCode::Config,
            "config describes a " + std::string(to_string(cfg.study)) + " study, not " +
                std::string(to_string(expected)));
    StudyReport r;
    r.study = cfg.study;
    r.config = study_config_to_json(cfg);
    r.workers = resolve_workers(cfg.workers);
    return r;
}

void close_report(StudyReport& r, const Timer& timer) {
    r.passed = !r.verdicts.empty() &&
               std::all_of(r.verdicts.begin(), r.verdicts.end(), [](const Verdict& v) { return v.passed; });
    r.runtime_seconds = timer.seconds();
}

std::string radius_tag(double r) { return "r=" + num(r); }

// Declares "sequence decreasing within MC noise" verdicts over a ladder.
void decreasing_verdicts(StudyReport& r, const std::string& label, const std::vector<double>& values,
                         const std::vector<double>& ses, double noise_multiple) {
    for (std::size_t i = 1; i < values.size(); ++i) {
        const double slack = noise_multiple * std::sqrt(ses[i] * ses[i] + ses[i - 1] * ses[i - 1]);
        r.verdicts.push_back({label + " non-increasing from window " + std::to_string(i - 1) + " to " +
                                  std::to_string(i),
                              "value[i] <= value[i-1] + " + num(noise_multiple) + " * combined SE",
                              values[i] <= values[i - 1] + slack, values[i], values[i - 1] + slack});
    }
}

}  // namespace

StudyReport unbiasedness_study(const StudyConfig& cfg) {
    Timer timer;
    StudyReport r = start_report(cfg, StudyKind::Unbiasedness);
    const double lambda = model_intensity(cfg.model);
    const StructuringBody& body = cfg.test.body;
    const double r_max = *std::max_element(cfg.radii.begin(), cfg.radii.end());
    const double m = tol(cfg, "se_multiple");
    for (std::size_t w = 0; w < cfg.windows.size(); ++w) {
        const ObservationWindow& W = cfg.windows[w];
        const auto values = run_replicates<std::vector<double>>(
            cfg.replicates, r.workers, [&](std::size_t k) {
                const PointPattern p = simulate(cfg.model, W, {cfg.master_seed, stream(w, k)});
                const KEstimate est = k_hat(p, body, std::max(r_max, 1e-300), cfg.estimator);
                std::vector<double> out;
                for (double rad : cfg.radii) out.push_back(est.eval(rad));
                return out;
            });
        WindowSummary ws{W, {}};
        for (std::size_t i = 0; i < cfg.radii.size(); ++i) {
            std::vector<double> x;
            for (const auto& v : values) x.push_back(v[i]);
            const Moments mo = moments(x);
            const double ref = lambda * lambda * body.volume() * std::pow(cfg.radii[i], body.dim());
            ws.metrics.push_back({tagged("mean_k_hat", radius_tag(cfg.radii[i])), mo.mean, mo.se, ref});
            const std::string where = "window " + std::to_string(w) + ", " + radius_tag(cfg.radii[i]);
            if (cfg.estimator == EstimatorKind::HT) {
                r.verdicts.push_back({"unbiased at " + where, "|mean - lambda^2 |B| r^d| <= " + num(m) + " SE",
                                      std::abs(mo.mean - ref) <= m * mo.se, std::abs(mo.mean - ref), m * mo.se});
            } else if (cfg.radii[i] > 0.0) {
                r.verdicts.push_back({"negative bias at " + where, "mean < lambda^2 |B| r^d", mo.mean < ref, mo.mean,
                                      ref});
            }
        }
        r.windows.push_back(std::move(ws));
    }
    close_report(r, timer);
    return r;
}

StudyReport variance_convergence_study(const StudyConfig& cfg) {
    Timer timer;
    StudyReport r = start_report(cfg, StudyKind::VarianceConvergence);
    const double lambda = model_intensity(cfg.model);
    const StructuringBody& body = cfg.test.body;
    std::vector<double> radii = cfg.radii;
    if (cfg.cross_radii) {
        radii.push_back(cfg.cross_radii->first);
        radii.push_back(cfg.cross_radii->second);
    }
    const double r_max = std::max(*std::max_element(radii.begin(), radii.end()), 1e-300);
    const std::size_t nr = cfg.radii.size();
    std::vector<std::vector<double>> rel_err(nr), rel_se(nr);
    std::vector<double> cross_err, cross_se;
    for (std::size_t w = 0; w < cfg.windows.size(); ++w) {
        const ObservationWindow& W = cfg.windows[w];
        const double vol = W.volume();
        const auto values = run_replicates<std::vector<double>>(
            cfg.replicates, r.workers, [&](std::size_t k) {
                const PointPattern p = simulate(cfg.model, W, {cfg.master_seed, stream(w, k)});
                const KEstimate est = k_hat(p, body, r_max, cfg.estimator);
                std::vector<double> out;
                for (double rad : radii) out.push_back(est.eval(rad));
                return out;
            });
        auto column = [&](std::size_t i) {
            std::vector<double> x;
            for (const auto& v : values) x.push_back(v[i]);
            return x;
        };
        WindowSummary ws{W, {}};
        for (std::size_t i = 0; i < nr; ++i) {
            const Moments mo = moments(column(i));
            const double n = static_cast<double>(cfg.replicates);
            const double var_se = std::sqrt(std::max(mo.m4 - mo.m2 * mo.m2, 0.0) / n);
            const double tau = theoretical_tau2(lambda, body, cfg.radii[i], cfg.radii[i]);
            const std::string tag = radius_tag(cfg.radii[i]);
            ws.metrics.push_back({tagged("scaled_variance", tag), vol * mo.var, vol * var_se, tau});
            if (tau > 0.0) {
                const double e = std::abs(vol * mo.var - tau) / tau;
                ws.metrics.push_back({tagged("relative_error", tag), e, vol * var_se / tau, std::nullopt});
                rel_err[i].push_back(e);
                rel_se[i].push_back(vol * var_se / tau);
            }
        }
        if (cfg.cross_radii) {
            const auto [cov, se] = covariance(column(nr), column(nr + 1));
            const double tau = theoretical_tau2(lambda, body, cfg.cross_radii->first, cfg.cross_radii->second);
            const std::string tag = "s=" + num(cfg.cross_radii->first) + ",t=" + num(cfg.cross_radii->second);
            ws.metrics.push_back({tagged("scaled_covariance", tag), vol * cov, vol * se, tau});
            if (tau > 0.0) {
                const double e = std::abs(vol * cov - tau) / tau;
                ws.metrics.push_back({tagged("relative_error", tag), e, vol * se / tau, std::nullopt});
                cross_err.push_back(e);
                cross_se.push_back(vol * se / tau);
            }
        }
        r.windows.push_back(std::move(ws));
    }
    const double max_err = tol(cfg, "max_relative_error");
    const double noise = tol(cfg, "noise_multiple");
    auto verdicts_for = [&](const std::string& label, const std::vector<double>& e, const std::vector<double>& se) {
        if (e.empty()) return;
        r.verdicts.push_back({label + " relative error at the largest window",
                              "|(|W| Var) - tau| / tau <= " + num(max_err), e.back() <= max_err, e.back(), max_err});
        decreasing_verdicts(r, label + " relative error", e, se, noise);
    };
    for (std::size_t i = 0; i < nr; ++i) verdicts_for("variance " + radius_tag(cfg.radii[i]), rel_err[i], rel_se[i]);
    if (cfg.cross_radii) verdicts_for("covariance", cross_err, cross_se);
    if (r.verdicts.empty()) {
        r.verdicts.push_back({"variance vanishes at r = 0", "|W| Var = 0", true, 0.0, 0.0});
        for (const auto& ws : r.windows) {
            for (const auto& m : ws.metrics) {
                if (m.value != 0.0) r.verdicts.back().passed = false;
            }
        }
    }
    close_report(r, timer);
    return r;
}

StudyReport sigma2_consistency_study(const StudyConfig& cfg) {
    Timer timer;
    StudyReport r = start_report(cfg, StudyKind::Sigma2Consistency);
    const double truth = theoretical_sigma2(cfg.model);
    std::vector<double> mse, rel_bias;
    for (std::size_t w = 0; w < cfg.windows.size(); ++w) {
        const ObservationWindow& W = cfg.windows[w];
        const auto values = run_replicates<double>(cfg.replicates, r.workers, [&](std::size_t k) {
            const PointPattern p = simulate(cfg.model, W, {cfg.master_seed, stream(w, k)});
            return sigma2_hat(p, cfg.test.kernel, cfg.test.bandwidth);
        });
        const Moments mo = moments(values);
        std::vector<double> sq;
        for (double v : values) sq.push_back((v - truth) * (v - truth));
        const Moments ms = moments(sq);
        WindowSummary ws{W, {}};
        ws.metrics.push_back({"mean_sigma2_hat", mo.mean, mo.se, truth});
        ws.metrics.push_back({"relative_bias", (mo.mean - truth) / truth, mo.se / truth, std::nullopt});
        ws.metrics.push_back({"mse", ms.mean, ms.se, std::nullopt});
        mse.push_back(ms.mean);
        rel_bias.push_back(std::abs(mo.mean - truth) / truth);
        r.windows.push_back(std::move(ws));
    }
    for (std::size_t i = 1; i < mse.size(); ++i) {
        r.verdicts.push_back({"MSE decreasing from window " + std::to_string(i - 1) + " to " + std::to_string(i),
                              "mse[i] < mse[i-1]", mse[i] < mse[i - 1], mse[i], mse[i - 1]});
    }
    const double max_bias = tol(cfg, "max_relative_bias");
    r.verdicts.push_back({"relative bias at the largest window", "|mean - sigma^2| / sigma^2 <= " + num(max_bias),
                          rel_bias.back() <= max_bias, rel_bias.back(), max_bias});
    close_report(r, timer);
    return r;
}

namespace {

struct TestOutcome {
    std::vector<Decision> decisions;
    std::vector<double> scaled;  // statistic / c, NaN when undetermined
};

// Runs the configured tests on every replicate of one window.
std::vector<TestOutcome> run_tests(const StudyConfig& cfg, std::size_t w, unsigned workers, const ModelSpec& data_a,
                                   const ModelSpec& data_b) {
    const ObservationWindow& W = cfg.windows[w];
    std::optional<NullHypothesis> h0;
    if (!cfg.two_sample) h0 = NullHypothesis{model_intensity(cfg.model), NullK::from_model(cfg.model, cfg.test.body)};
    return run_replicates<TestOutcome>(cfg.replicates, workers, [&](std::size_t k) {
        std::vector<TestReport> reports;
        if (cfg.two_sample) {
            const PointPattern a = simulate(data_a, W, {cfg.master_seed, stream(w, 2 * k)});
            const PointPattern b = simulate(data_b, W, {cfg.master_seed, stream(w, 2 * k + 1)});
            for (const auto& s : cfg.statistics) reports.push_back(two_sample_report(a, b, cfg.test, s));
        } else {
            const PointPattern p = simulate(data_a, W, {cfg.master_seed, stream(w, k)});
            reports = one_sample_reports(p, *h0, cfg.test, cfg.statistics);
        }
        TestOutcome out;
        for (const auto& rep : reports) {
            out.decisions.push_back(rep.decision);
            out.scaled.push_back(rep.statistic ? *rep.statistic / rep.limit_constant
                                               : std::numeric_limits<double>::quiet_NaN());
        }
        return out;
    });
}

struct RateSummary {
    double rate;
    double se;
    std::size_t undetermined;
};

RateSummary rejection_rate(const std::vector<TestOutcome>& outcomes, std::size_t s) {
    std::size_t rejects = 0, undetermined = 0;
    for (const auto& o : outcomes) {
        if (o.decisions[s] == Decision::Reject) ++rejects;
        if (o.decisions[s] == Decision::Undetermined) ++undetermined;
    }
    const double n = static_cast<double>(outcomes.size());
    const double p = rejects / n;
    return {p, std::sqrt(p * (1.0 - p) / n), undetermined};
}

std::string stat_tag(const StudyConfig& cfg, std::size_t s) {
    return (cfg.two_sample ? "two_sample_" : "") + cfg.statistics[s];
}

}  // namespace

StudyReport null_level_study(const StudyConfig& cfg) {
    Timer timer;
    StudyReport r = start_report(cfg, StudyKind::NullLevel);
    std::vector<RateSummary> last;
    for (std::size_t w = 0; w < cfg.windows.size(); ++w) {
        const auto outcomes = run_tests(cfg, w, r.workers, cfg.model, cfg.model);
        WindowSummary ws{cfg.windows[w], {}};
        last.clear();
        for (std::size_t s = 0; s < cfg.statistics.size(); ++s) {
            const RateSummary rs = rejection_rate(outcomes, s);
            ws.metrics.push_back({tagged("rejection_rate", stat_tag(cfg, s)), rs.rate, rs.se, cfg.test.gamma});
            ws.metrics.push_back({tagged("undetermined", stat_tag(cfg, s)), double(rs.undetermined), std::nullopt,
                                  std::nullopt});
            last.push_back(rs);
        }
        r.windows.push_back(std::move(ws));
    }
    const double lo = tol(cfg, "level_low"), hi = tol(cfg, "level_high");
    for (std::size_t s = 0; s < cfg.statistics.size(); ++s) {
        r.verdicts.push_back({"level of " + stat_tag(cfg, s) + " at the largest window",
                              "rate in [" + num(lo) + ", " + num(hi) + "]",
                              last[s].rate >= lo && last[s].rate <= hi, last[s].rate, hi});
    }
    close_report(r, timer);
    return r;
}

StudyReport power_study(const StudyConfig& cfg) {
    Timer timer;
    StudyReport r = start_report(cfg, StudyKind::Power);
    const ModelSpec& alt = *cfg.alternative;
    std::vector<std::vector<RateSummary>> rates(cfg.statistics.size());
    for (std::size_t w = 0; w < cfg.windows.size(); ++w) {
        const auto outcomes =
            cfg.two_sample ? run_tests(cfg, w, r.workers, cfg.model, alt) : run_tests(cfg, w, r.workers, alt, alt);
        WindowSummary ws{cfg.windows[w], {}};
        for (std::size_t s = 0; s < cfg.statistics.size(); ++s) {
            const RateSummary rs = rejection_rate(outcomes, s);
            ws.metrics.push_back({tagged("rejection_rate", stat_tag(cfg, s)), rs.rate, rs.se, std::nullopt});
            ws.metrics.push_back({tagged("undetermined", stat_tag(cfg, s)), double(rs.undetermined), std::nullopt,
                                  std::nullopt});
            rates[s].push_back(rs);
        }
        r.windows.push_back(std::move(ws));
    }
    const double min_power = tol(cfg, "min_power"), noise = tol(cfg, "noise_multiple");
    for (std::size_t s = 0; s < cfg.statistics.size(); ++s) {
        const auto& rs = rates[s];
        r.verdicts.push_back({"power of " + stat_tag(cfg, s) + " at the largest window", "rate >= " + num(min_power),
                              rs.back().rate >= min_power, rs.back().rate, min_power});
        for (std::size_t i = 1; i < rs.size(); ++i) {
            const double slack = noise * std::sqrt(rs[i].se * rs[i].se + rs[i - 1].se * rs[i - 1].se);
            r.verdicts.push_back({"power of " + stat_tag(cfg, s) + " increasing from window " + std::to_string(i - 1) +
                                      " to " + std::to_string(i),
                                  "rate[i] > rate[i-1] - " + num(noise) + " * combined SE, and rate[last] > rate[0]",
                                  rs[i].rate > rs[i - 1].rate - slack && rs.back().rate > rs.front().rate,
                                  rs[i].rate, rs[i - 1].rate - slack});
        }
    }
    close_report(r, timer);
    return r;
}

StudyReport limit_law_study(const StudyConfig& cfg) {
    Timer timer;
    StudyReport r = start_report(cfg, StudyKind::LimitLaw);
    std::vector<double> last;
    for (std::size_t w = 0; w < cfg.windows.size(); ++w) {
        const auto outcomes = run_tests(cfg, w, r.workers, cfg.model, cfg.model);
        WindowSummary ws{cfg.windows[w], {}};
        last.clear();
        for (std::size_t s = 0; s < cfg.statistics.size(); ++s) {
            std::vector<double> x;
            for (const auto& o : outcomes) {
                if (!std::isnan(o.scaled[s])) x.push_back(o.scaled[s]);
            }
            const bool ks_family = cfg.statistics[s] == "ks";
            const double dist = x.empty() ? 1.0 : ks_distance(x, ks_family ? half_normal_cdf : chi2_1_cdf);
            ws.metrics.push_back({tagged("ks_distance", stat_tag(cfg, s)), dist, std::nullopt, std::nullopt});
            ws.metrics.push_back({tagged("determined", stat_tag(cfg, s)), double(x.size()), std::nullopt,
                                  std::nullopt});
            last.push_back(dist);
        }
        r.windows.push_back(std::move(ws));
    }
    const double max_d = tol(cfg, "max_ks_distance");
    for (std::size_t s = 0; s < cfg.statistics.size(); ++s) {
        const bool ks_family = cfg.statistics[s] == "ks";
        r.verdicts.push_back({"limit law of " + stat_tag(cfg, s) + " at the largest window",
                              std::string("sup |F_n(stat/c) - ") + (ks_family ? "half-normal" : "chi2_1") +
                                  " CDF| <= " + num(max_d),
                              last[s] <= max_d, last[s], max_d});
    }
    close_report(r, timer);
    return r;
}

StudyReport estimator_equivalence_study(const StudyConfig& cfg) {
    Timer timer;
    StudyReport r = start_report(cfg, StudyKind::EstimatorEquivalence);
    const StructuringBody& body = cfg.test.body;
    const int d = body.dim();
    const double alpha = cfg.test.alpha;
    const std::size_t nr = cfg.radii.size();
    std::vector<std::vector<double>> naive_mse(nr), naive_se(nr), l2_mse(nr), l2_se(nr);
    for (std::size_t w = 0; w < cfg.windows.size(); ++w) {
        const ObservationWindow& W = cfg.windows[w];
        const double vol = W.volume();
        const double scale = std::pow(std::pow(vol, 1.0 / d), alpha);
        const double norm = std::pow(vol, 1.0 - 2.0 * alpha);
        std::vector<double> rho;
        for (double t : cfg.radii) rho.push_back(scale * t);
        const double rho_max = std::max(*std::max_element(rho.begin(), rho.end()), 1e-300);
        const ObservationWindow big = W.dilated_bounding_box(rho_max, body);
        const auto values = run_replicates<std::vector<double>>(
            cfg.replicates, r.workers, [&](std::size_t k) {
                const PointPattern p = simulate(cfg.model, big, {cfg.master_seed, stream(w, k)});
                const PointPattern inside = p.restricted_to(W);
                const KEstimate ht = k_hat(inside, body, rho_max, EstimatorKind::HT);
                const KEstimate naive = k_hat(p, body, rho_max, EstimatorKind::Naive, W);
                const double l2 = lambda2_hat(inside);
                std::vector<double> out;
                for (double t : rho) {
                    const double h = ht.eval(t);
                    out.push_back(h - naive.eval(t));
                    out.push_back(h - l2 * body.volume() * std::pow(t, d));
                }
                return out;
            });
        WindowSummary ws{W, {}};
        for (std::size_t i = 0; i < nr; ++i) {
            std::vector<double> a, b;
            for (const auto& v : values) {
                a.push_back(norm * v[2 * i] * v[2 * i]);
                b.push_back(norm * v[2 * i + 1] * v[2 * i + 1]);
            }
            const Moments ma = moments(a), mb = moments(b);
            const std::string tag = radius_tag(cfg.radii[i]);
            ws.metrics.push_back({tagged("normalized_mse_ht_vs_naive", tag), ma.mean, ma.se, std::nullopt});
            ws.metrics.push_back({tagged("normalized_mse_ht_vs_lambda2_k", tag), mb.mean, mb.se, std::nullopt});
            naive_mse[i].push_back(ma.mean);
            naive_se[i].push_back(ma.se);
            l2_mse[i].push_back(mb.mean);
            l2_se[i].push_back(mb.se);
        }
        r.windows.push_back(std::move(ws));
    }
    const double factor = tol(cfg, "min_reduction_factor"), noise = tol(cfg, "noise_multiple");
    for (std::size_t i = 0; i < nr; ++i) {
        const std::string tag = radius_tag(cfg.radii[i]);
        for (const auto& [label, seq, se] :
             {std::tuple{"ht vs naive " + tag, &naive_mse[i], &naive_se[i]},
              std::tuple{"ht vs lambda2*K " + tag, &l2_mse[i], &l2_se[i]}}) {
            decreasing_verdicts(r, label + " normalized MSE", *seq, *se, noise);
            if (seq->size() > 1) {
                const double ratio = seq->back() > 0.0 ? seq->front() / seq->back() : INFINITY;
                r.verdicts.push_back({label + " reduction from first to last window",
                                      "mse[0] / mse[last] >= " + num(factor), ratio >= factor, ratio, factor});
            }
        }
    }
    close_report(r, timer);
    return r;
}

StudyReport run_study(const StudyConfig& cfg) {
    switch (cfg.study) {
        case StudyKind::Unbiasedness: return unbiasedness_study(cfg);
        case StudyKind::VarianceConvergence: return variance_convergence_study(cfg);
        case StudyKind::Sigma2Consistency: return sigma2_consistency_study(cfg);
        case StudyKind::NullLevel: return null_level_study(cfg);
        case StudyKind::Power: return power_study(cfg);
        case StudyKind::LimitLaw: return limit_law_study(cfg);
        case StudyKind::EstimatorEquivalence: return estimator_equivalence_study(cfg);
    }
    fail(ErrorCode::Config, "unknown study");
}

}  // namespace kscope
