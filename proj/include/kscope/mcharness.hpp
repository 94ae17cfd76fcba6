#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "kscope/gof.hpp"
#include "kscope/simulate.hpp"

namespace kscope {

inline constexpr int kSchemaVersion = 1;

enum class StudyKind {
    Unbiasedness,
    VarianceConvergence,
    Sigma2Consistency,
    NullLevel,
    Power,
    LimitLaw,
    EstimatorEquivalence,
};

std::string_view to_string(StudyKind kind);
StudyKind parse_study_kind(std::string_view name);

struct StudyConfig {
    StudyKind study = StudyKind::NullLevel;
    ModelSpec model = PoissonModel{1.0};
    /// Power studies: the model that generates the data (one-sample) or the
    /// second sample (two-sample).
    std::optional<ModelSpec> alternative;
    std::vector<ObservationWindow> windows;
    std::size_t replicates = 1000;
    std::uint64_t master_seed = 1;
    unsigned workers = 0;  // 0: hardware concurrency
    /// Radii for the unbiasedness / variance studies, or scaled radii for the
    /// equivalence study.
    std::vector<double> radii;
    /// Variance study: optional covariance pair (s, t).
    std::optional<std::pair<double, double>> cross_radii;
    EstimatorKind estimator = EstimatorKind::HT;
    /// Test studies: statistics to evaluate ("ks", "cvm", "chi2").
    std::vector<std::string> statistics{"ks"};
    bool two_sample = false;
    TestOptions test;
    /// Verdict thresholds; missing keys take study defaults.
    std::map<std::string, double> tolerances;
};

/// Parses and validates a StudyConfig. Throws Error(Config).
StudyConfig study_config_from_json(const nlohmann::json& j);
/// Resolved config including defaults and effective tolerances.
nlohmann::json study_config_to_json(const StudyConfig& cfg);

struct Metric {
    std::string name;
    double value = 0.0;
    std::optional<double> se;
    std::optional<double> reference;
};

struct WindowSummary {
    ObservationWindow window;
    std::vector<Metric> metrics;

    const Metric& metric(const std::string& name) const;
};

struct Verdict {
    std::string name;
    std::string rule;
    bool passed = false;
    double observed = 0.0;
    double threshold = 0.0;
};

struct StudyReport {
    StudyKind study = StudyKind::NullLevel;
    nlohmann::json config;
    std::vector<WindowSummary> windows;
    std::vector<Verdict> verdicts;
    bool passed = false;
    double runtime_seconds = 0.0;
    unsigned workers = 0;
};

/// The "runtime" member (wall time, worker count) is the only part that may
/// differ between runs of the same config.
nlohmann::json to_json(const StudyReport& report, bool include_runtime = true);
/// One row per window per metric.
void write_summary_csv(const StudyReport& report, std::ostream& out);

/// Worker count after applying KSCOPE_THREADS and the hardware default.
unsigned resolve_workers(unsigned configured);

/// Runs f(k) for k in [0, n) on `workers` threads. Results are stored by
/// index, so the output does not depend on scheduling.
template <class R>
std::vector<R> run_replicates(std::size_t n, unsigned workers, const std::function<R(std::size_t)>& f);

StudyReport unbiasedness_study(const StudyConfig& cfg);
StudyReport variance_convergence_study(const StudyConfig& cfg);
StudyReport sigma2_consistency_study(const StudyConfig& cfg);
StudyReport null_level_study(const StudyConfig& cfg);
StudyReport power_study(const StudyConfig& cfg);
StudyReport limit_law_study(const StudyConfig& cfg);
StudyReport estimator_equivalence_study(const StudyConfig& cfg);
StudyReport run_study(const StudyConfig& cfg);

/// Sup-distance between the empirical CDF of `sample` and `cdf`.
double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf);
/// CDF of c * N(0,1)^2 / c, i.e. chi-square with one degree of freedom.
double chi2_1_cdf(double x);
/// CDF of |N(0,1)|.
double half_normal_cdf(double x);

}  // namespace kscope

#include "kscope/detail/replicates.hpp"
