#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "kscope/estimate.hpp"

namespace kscope {

double normal_cdf(double x);
/// Inverse of normal_cdf on (0, 1); Wichura's AS241 (PPND16).
double normal_quantile(double p);

/// Integrating weight for the Cramer-von Mises statistics.
struct WeightV {
    enum class Kind { Lebesgue, ExpDensity };
    Kind kind = Kind::Lebesgue;
    double b = 0.0;  // ExpDensity: V'(r) = exp(-b r^{2d+1})

    static WeightV lebesgue() { return {}; }
    static WeightV exp_density(double b);
    /// V'(r) for dimension d.
    double density(double r, int d) const;
    /// V(r) - V(0).
    double cumulative(double r, int d) const;
    nlohmann::json to_json() const;
};

/// Multiplicative weight for the Kolmogorov-Smirnov statistics.
struct Weightv {
    enum class Kind { ConstOne, ExpDecay };
    Kind kind = Kind::ConstOne;
    double a = 0.0;  // ExpDecay: v(r) = exp(-a r)

    static Weightv const_one() { return {}; }
    static Weightv exp_decay(double a);
    double operator()(double r) const;
    nlohmann::json to_json() const;
};

enum class LimitFamily { ScaledChi2_1, ScaledHalfNormal };
enum class Decision { Accept, Reject, Undetermined };
std::string_view to_string(LimitFamily family);
std::string_view to_string(Decision decision);

double chi2_limit_constant(int k, const StructuringBody& body);
/// 4|B|^2 int_0^R r^{2d} dV(r) + 1
double cvm_limit_constant(const StructuringBody& body, double R, const WeightV& V);
/// 2|B| sup_{[0,R]} |r^d v(r)| + 1
double ks_limit_constant(const StructuringBody& body, double R, const Weightv& v);

/// Limit-law tail probability: 2(1 - Phi(sqrt(stat/c))) or 2(1 - Phi(stat/c)).
double p_value(double statistic, double c, LimitFamily family);
/// c z^2_{1-gamma/2} or c z_{1-gamma/2}.
double threshold(double c, LimitFamily family, double gamma);

struct NullHypothesis {
    double lambda0;
    NullK k0;
};

struct TestOptions {
    StructuringBody body{2, BodyShape::L2, 1.0};
    double alpha = 0.5;
    double R = 1.0;
    double gamma = 0.05;
    WeightV V;
    Weightv v;
    int chi2_k = 5;
    /// Explicit chi2 radii 0 < r_1 < ... < r_k; empty selects r_i = iR/k.
    std::vector<double> chi2_radii;
    Kernel kernel = Kernel::Indicator;
    double bandwidth = 0.0;  // <= 0: default c^{-3/4}
    EstimatorKind estimator = EstimatorKind::HT;
    /// NAIVE only: the window W inside the plus-sampled pattern window.
    std::optional<ObservationWindow> estimation_window;
    /// Substitute fallbacks for degenerate variance estimates instead of
    /// reporting an undetermined result.
    bool clamp = false;
    /// Multiplies the limit constant. Only for harness sensitivity checks.
    double limit_constant_scale = 1.0;
};

nlohmann::json options_to_json(const TestOptions& opt);

struct TestReport {
    std::string test;
    std::optional<double> statistic;
    double limit_constant = 0.0;
    LimitFamily family = LimitFamily::ScaledChi2_1;
    std::optional<double> p_value;
    double gamma = 0.05;
    double threshold = 0.0;
    Decision decision = Decision::Undetermined;
    /// "DEGENERATE_PATTERN" or "NONPOSITIVE_VARIANCE" when no statistic
    /// could be formed (or when clamped values were substituted).
    std::optional<std::string> error;
    bool clamped = false;
    /// Functional part and intensity part of the statistic.
    double functional_term = 0.0;
    double intensity_term = 0.0;
    std::vector<SampleSummary> samples;
    std::vector<std::string> warnings;
    nlohmann::json config;
};

nlohmann::json to_json(const TestReport& report);

// Building blocks, exposed for testing.

/// int_0^R Delta(r)^2 dV(r), exact per piece of the step function.
double cvm_integral(const ScaledDelta& delta, const WeightV& V);
/// sup_{[0,R]} |Delta(r) v(r)| over the exact candidate set.
double ks_supremum(const ScaledDelta& delta, const Weightv& v);
/// sum_i ((Delta(r_i) - Delta(r_{i-1})) / (r_i^d - r_{i-1}^d))^2
double chi2_sum(const ScaledDelta& delta, const std::vector<double>& radii);
/// Default chi2 radii iR/k.
std::vector<double> default_chi2_radii(double R, int k);

TestReport chi2_statistic(const PointPattern& pattern, const NullHypothesis& h0,
                          const TestOptions& opt = {});
TestReport cvm_statistic(const PointPattern& pattern, const NullHypothesis& h0,
                         const TestOptions& opt = {});
TestReport ks_statistic(const PointPattern& pattern, const NullHypothesis& h0,
                        const TestOptions& opt = {});

/// Several one-sample statistics ("ks", "cvm", "chi2") from one K estimate.
std::vector<TestReport> one_sample_reports(const PointPattern& pattern, const NullHypothesis& h0,
                                           const TestOptions& opt, const std::vector<std::string>& tests);

/// Window volumes must agree to 1e-9 relative; the mean volume is used.
TestReport two_sample_cvm(const PointPattern& a, const PointPattern& b, const TestOptions& opt = {});
TestReport two_sample_ks(const PointPattern& a, const PointPattern& b, const TestOptions& opt = {});

/// Dispatches on "ks" or "cvm".
TestReport two_sample_report(const PointPattern& a, const PointPattern& b, const TestOptions& opt,
                             const std::string& test);

/// int_0^R (Ka(c^alpha r) - Kb(c^alpha r))^2 dV(r) for two estimates sharing
/// the radius scale c^alpha.
double two_sample_cvm_integral(const KEstimate& a, const KEstimate& b, double radius_scale, double R,
                               const WeightV& V);
/// sup_{[0,R]} |(Ka - Kb)(c^alpha r) v(r)|
double two_sample_ks_supremum(const KEstimate& a, const KEstimate& b, double radius_scale, double R,
                              const Weightv& v);

}  // namespace kscope
