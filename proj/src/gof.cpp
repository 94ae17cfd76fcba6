#include "kscope/gof.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "kscope/detail/compensated_sum.hpp"
#include "kscope/error.hpp"
#include "kscope/json_io.hpp"

namespace kscope {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Normal distribution

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    require(p > 0.0 && p < 1.0, ErrorCode::InvalidArgument, "normal_quantile needs p in (0, 1)");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                     6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                   1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
                 1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
               (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                     3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                   5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
                 4.2313330701600911252e+1) * r + 1.0);
    }
    double r = std::sqrt(-std::log(q < 0.0 ? p : 1.0 - p));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                  3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
                4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                  6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
                2.05319162663775882187e+0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                  2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
                5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                  1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -val : val;
}

// ---------------------------------------------------------------------------
// Weights

WeightV WeightV::exp_density(double b) {
    require(std::isfinite(b) && b > 0.0, ErrorCode::InvalidArgument, "EXP_DENSITY needs b > 0");
    return {Kind::ExpDensity, b};
}

double WeightV::density(double r, int d) const {
    return kind == Kind::Lebesgue ? 1.0 : std::exp(-b * std::pow(r, 2 * d + 1));
}

double WeightV::cumulative(double r, int d) const {
    if (kind == Kind::Lebesgue) return r;
    if (r <= 0.0) return 0.0;
    // int_0^r exp(-b u^m) du = b^{-1/m} / m * gamma_lower(1/m, b r^m)
    const double m = 2.0 * d + 1.0;
    return std::pow(b, -1.0 / m) / m * boost::math::tgamma_lower(1.0 / m, b * std::pow(r, m));
}

json WeightV::to_json() const {
    if (kind == Kind::Lebesgue) return {{"kind", "lebesgue"}};
    return {{"kind", "exp_density"}, {"b", b}};
}

Weightv Weightv::exp_decay(double a) {
    require(std::isfinite(a) && a > 0.0, ErrorCode::InvalidArgument, "EXP_DECAY needs a > 0");
    return {Kind::ExpDecay, a};
}

double Weightv::operator()(double r) const { return kind == Kind::ConstOne ? 1.0 : std::exp(-a * r); }

json Weightv::to_json() const {
    if (kind == Kind::ConstOne) return {{"kind", "const_one"}};
    return {{"kind", "exp_decay"}, {"a", a}};
}

std::string_view to_string(LimitFamily family) {
    return family == LimitFamily::ScaledChi2_1 ? "SCALED_CHI2_1" : "SCALED_HALF_NORMAL";
}

std::string_view to_string(Decision decision) {
    switch (decision) {
        case Decision::Accept: return "ACCEPT";
        case Decision::Reject: return "REJECT";
        case Decision::Undetermined: return "UNDETERMINED";
    }
    return "UNDETERMINED";
}

// ---------------------------------------------------------------------------
// Limit laws

double chi2_limit_constant(int k, const StructuringBody& body) {
    require(k >= 1, ErrorCode::InvalidArgument, "chi2 needs k >= 1");
    const double vol = body.volume();
    return 4.0 * k * vol * vol + 1.0;
}

double cvm_limit_constant(const StructuringBody& body, double R, const WeightV& V) {
    require(R > 0.0, ErrorCode::InvalidArgument, "R must be positive");
    const int d = body.dim();
    const double m = 2.0 * d + 1.0;
    const double vol = body.volume();
    const double moment = V.kind == WeightV::Kind::Lebesgue
                              ? std::pow(R, m) / m
                              : -std::expm1(-V.b * std::pow(R, m)) / (m * V.b);
    return 4.0 * vol * vol * moment + 1.0;
}

double ks_limit_constant(const StructuringBody& body, double R, const Weightv& v) {
    require(R > 0.0, ErrorCode::InvalidArgument, "R must be positive");
    const int d = body.dim();
    double sup;
    if (v.kind == Weightv::Kind::ConstOne) {
        sup = std::pow(R, d);
    } else {
        const double r = std::clamp(d / v.a, 0.0, R);
        sup = std::pow(r, d) * std::exp(-v.a * r);
    }
    return 2.0 * body.volume() * sup + 1.0;
}

double p_value(double statistic, double c, LimitFamily family) {
    require(statistic >= 0.0 && c > 0.0, ErrorCode::InvalidArgument,
            "p_value needs statistic >= 0 and c > 0");
    const double z = family == LimitFamily::ScaledChi2_1 ? std::sqrt(statistic / c) : statistic / c;
    return std::clamp(std::erfc(z / std::numbers::sqrt2), 0.0, 1.0);
}

double threshold(double c, LimitFamily family, double gamma) {
    require(gamma > 0.0 && gamma < 1.0, ErrorCode::InvalidArgument, "gamma must lie in (0, 1)");
    const double z = normal_quantile(1.0 - 0.5 * gamma);
    return family == LimitFamily::ScaledChi2_1 ? c * z * z : c * z;
}

// ---------------------------------------------------------------------------
// Functionals of Delta

namespace {

constexpr int kSubdivisions = 64;

double binomial(int n, int k) {
    double b = 1.0;
    for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
    return b;
}

template <class F>
double gauss16(F&& f, double a, double b) {
    return boost::math::quadrature::gauss<double, 16>::integrate(f, a, b);
}

// Splits [lo, hi] at `cuts` and into pieces no longer than `max_len`, then
// calls f(a, b) on each.
template <class F>
void for_each_subinterval(double lo, double hi, const std::vector<double>& cuts, double max_len, F&& f) {
    std::vector<double> pts{lo};
    for (double c : cuts) {
        if (c > lo && c < hi) pts.push_back(c);
    }
    pts.push_back(hi);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double a = pts[i];
        const double b = pts[i + 1];
        const int n = std::max(1, static_cast<int>(std::ceil((b - a) / max_len)));
        for (int s = 0; s < n; ++s) {
            const double x0 = a + (b - a) * s / n;
            const double x1 = s + 1 == n ? b : a + (b - a) * (s + 1) / n;
            f(x0, x1);
        }
    }
}

std::vector<double> knot_cuts(const ScaledDelta& delta) {
    std::vector<double> cuts;
    if (delta.null_k().is_tabulated()) {
        for (double k : delta.null_k().knots()) cuts.push_back(k / delta.radius_scale());
    }
    return cuts;
}

// Maximizes |f| on [lo, hi] by a grid followed by golden-section refinement.
template <class F>
double grid_max_abs(F&& f, double lo, double hi) {
    constexpr int n = 64;
    double best = 0.0;
    int arg = 0;
    for (int i = 0; i <= n; ++i) {
        const double x = lo + (hi - lo) * i / n;
        const double v = std::abs(f(x));
        if (v > best) {
            best = v;
            arg = i;
        }
    }
    double a = lo + (hi - lo) * std::max(arg - 1, 0) / n;
    double b = lo + (hi - lo) * std::min(arg + 1, n) / n;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = std::abs(f(x1)), f2 = std::abs(f(x2));
    for (int it = 0; it < 80 && b - a > 0.0; ++it) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = std::abs(f(x2));
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = std::abs(f(x1));
        }
    }
    return std::max({best, f1, f2});
}

// Root of a monotone function with g(a), g(b) of opposite signs.
template <class G>
double bisect(G&& g, double a, double b) {
    double ga = g(a);
    for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (a + b);
        if (m <= a || m >= b) break;
        const double gm = g(m);
        if ((gm < 0.0) == (ga < 0.0)) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

double cvm_integral(const ScaledDelta& delta, const WeightV& V) {
    const int d = delta.k().body.dim();
    const NullK& k0 = delta.null_k();
    detail::CompensatedSum total;
    const auto pieces = delta.pieces();

    if (V.kind == WeightV::Kind::Lebesgue && k0.is_power_law()) {
        // Delta = p0 + sum_k p_k u^k in u = r - lo; integrate the square exactly.
        const int e = k0.exponent();
        const double Q = delta.normalizer() * delta.lambda0() * delta.lambda0() * k0.coefficient() *
                         std::pow(delta.radius_scale(), e);
        std::vector<double> p(e + 1);
        for (const auto& pc : pieces) {
            const double h = pc.hi - pc.lo;
            if (h <= 0.0) continue;
            p[0] = pc.level - delta.null_term(pc.lo);
            for (int k = 1; k <= e; ++k) p[k] = -Q * binomial(e, k) * std::pow(pc.lo, e - k);
            double s = 0.0;
            for (int i = 0; i <= e; ++i) {
                for (int j = 0; j <= e; ++j) s += p[i] * p[j] * std::pow(h, i + j + 1) / (i + j + 1);
            }
            total.add(s);
        }
        return total.value();
    }

    const std::vector<double> cuts = knot_cuts(delta);
    const double max_len = delta.R() / kSubdivisions;
    for (const auto& pc : pieces) {
        if (pc.hi <= pc.lo) continue;
        auto integrand = [&](double r) {
            const double x = pc.level - delta.null_term(r);
            return x * x * V.density(r, d);
        };
        for_each_subinterval(pc.lo, pc.hi, cuts, max_len,
                             [&](double a, double b) { total.add(gauss16(integrand, a, b)); });
    }
    return total.value();
}

double ks_supremum(const ScaledDelta& delta, const Weightv& v) {
    const NullK& k0 = delta.null_k();
    const auto pieces = delta.pieces();
    const std::vector<double> cuts = knot_cuts(delta);
    double sup = 0.0;
    for (const auto& pc : pieces) {
        auto f = [&](double r) { return (pc.level - delta.null_term(r)) * v(r); };
        sup = std::max({sup, std::abs(f(pc.lo)), std::abs(f(pc.hi))});
        if (v.kind == Weightv::Kind::ConstOne || pc.hi <= pc.lo) continue;
        if (k0.is_power_law()) {
            // f' has the sign of g(r) = aQ r^e - eQ r^{e-1} - a*level, which is
            // monotone on either side of (e-1)/a.
            const int e = k0.exponent();
            const double Q = delta.normalizer() * delta.lambda0() * delta.lambda0() * k0.coefficient() *
                             std::pow(delta.radius_scale(), e);
            const double a = v.a;
            auto g = [&](double r) { return a * Q * std::pow(r, e) - e * Q * std::pow(r, e - 1) - a * pc.level; };
            const double split = (e - 1) / a;
            const double segs[3] = {pc.lo, std::clamp(split, pc.lo, pc.hi), pc.hi};
            for (int s = 0; s < 2; ++s) {
                const double x0 = segs[s], x1 = segs[s + 1];
                if (x1 <= x0) continue;
                const double g0 = g(x0), g1 = g(x1);
                if ((g0 < 0.0) != (g1 < 0.0)) sup = std::max(sup, std::abs(f(bisect(g, x0, x1))));
            }
        } else {
            for_each_subinterval(pc.lo, pc.hi, cuts, pc.hi - pc.lo,
                                 [&](double a, double b) { sup = std::max(sup, grid_max_abs(f, a, b)); });
        }
    }
    return sup;
}

std::vector<double> default_chi2_radii(double R, int k) {
    require(R > 0.0 && k >= 1, ErrorCode::InvalidArgument, "chi2 radii need R > 0 and k >= 1");
    std::vector<double> r(k);
    for (int i = 1; i <= k; ++i) r[i - 1] = i == k ? R : R * i / k;
    return r;
}

double chi2_sum(const ScaledDelta& delta, const std::vector<double>& radii) {
    const int d = delta.k().body.dim();
    double prev_r = 0.0;
    double prev_delta = 0.0;
    detail::CompensatedSum s;
    for (double r : radii) {
        const double cur = delta.eval(r);
        const double term = (cur - prev_delta) / (std::pow(r, d) - std::pow(prev_r, d));
        s.add(term * term);
        prev_r = r;
        prev_delta = cur;
    }
    return s.value();
}

// Merged walk over the jumps of two estimates on the scaled axis. Calls
// f(lo, hi, level_a - level_b) for each piece of [0, R].
template <class F>
static void walk_difference(const KEstimate& a, const KEstimate& b, double scale, double R, F&& f) {
    const double limit = scale * R;
    std::size_t ia = 0, ib = 0;
    double la = 0.0, lb = 0.0, lo = 0.0;
    while (true) {
        const double ra = ia < a.jump_radii.size() ? a.jump_radii[ia] : INFINITY;
        const double rb = ib < b.jump_radii.size() ? b.jump_radii[ib] : INFINITY;
        const double rho = std::min(ra, rb);
        if (!(rho <= limit)) break;
        const double t = std::min(rho / scale, R);
        f(lo, t, la - lb);
        if (ra == rho) la = a.cumulative_values[ia++];
        if (rb == rho) lb = b.cumulative_values[ib++];
        lo = t;
    }
    f(lo, R, la - lb);
}

double two_sample_cvm_integral(const KEstimate& a, const KEstimate& b, double radius_scale, double R,
                               const WeightV& V) {
    const int d = a.body.dim();
    detail::CompensatedSum total;
    walk_difference(a, b, radius_scale, R, [&](double lo, double hi, double diff) {
        if (hi > lo) total.add(diff * diff * (V.cumulative(hi, d) - V.cumulative(lo, d)));
    });
    return total.value();
}

double two_sample_ks_supremum(const KEstimate& a, const KEstimate& b, double radius_scale, double R,
                              const Weightv& v) {
    double sup = 0.0;
    // v is non-increasing, so each piece peaks at its left end.
    walk_difference(a, b, radius_scale, R,
                    [&](double lo, double, double diff) { sup = std::max(sup, std::abs(diff) * v(lo)); });
    return sup;
}

// ---------------------------------------------------------------------------
// Reports

json options_to_json(const TestOptions& opt) {
    json j{{"body", body_to_json(opt.body)},
           {"alpha", opt.alpha},
           {"R", opt.R},
           {"gamma", opt.gamma},
           {"weight_V", opt.V.to_json()},
           {"weight_v", opt.v.to_json()},
           {"kernel", to_string(opt.kernel)},
           {"estimator", to_string(opt.estimator)},
           {"clamp", opt.clamp},
           {"limit_constant_scale", opt.limit_constant_scale}};
    if (opt.bandwidth > 0.0) j["bandwidth"] = opt.bandwidth;
    else j["bandwidth"] = "default";
    if (opt.estimation_window) j["estimation_window"] = window_to_json(*opt.estimation_window);
    return j;
}

json to_json(const TestReport& r) {
    json j;
    j["test"] = r.test;
    j["statistic"] = r.statistic ? json(*r.statistic) : json(nullptr);
    j["limit_constant"] = r.limit_constant;
    j["limit_family"] = to_string(r.family);
    j["p_value"] = r.p_value ? json(*r.p_value) : json(nullptr);
    j["gamma"] = r.gamma;
    j["threshold"] = r.threshold;
    j["decision"] = to_string(r.decision);
    j["error"] = r.error ? json(*r.error) : json(nullptr);
    j["clamped"] = r.clamped;
    j["components"] = {{"functional", r.functional_term}, {"intensity", r.intensity_term}};
    json samples = json::array();
    for (const auto& s : r.samples) {
        samples.push_back({{"n", s.n},
                           {"window_volume", s.volume},
                           {"lambda_hat", s.lambda},
                           {"lambda2_hat", s.lambda2},
                           {"sigma2_hat", s.sigma2},
                           {"bandwidth", s.bandwidth}});
    }
    j["samples"] = samples;
    j["config"] = r.config;
    j["warnings"] = r.warnings;
    return j;
}

namespace {

void check_common(const TestOptions& opt) {
    require(opt.gamma > 0.0 && opt.gamma < 1.0, ErrorCode::InvalidArgument, "gamma must lie in (0, 1)");
    check_alpha(opt.alpha);
    require(std::isfinite(opt.R) && opt.R > 0.0, ErrorCode::InvalidArgument, "R must be positive");
    require(opt.limit_constant_scale > 0.0, ErrorCode::InvalidArgument, "limit_constant_scale must be positive");
    if (opt.v.kind == Weightv::Kind::ExpDecay) {
        require(opt.v.a >= opt.body.dim() / opt.R, ErrorCode::InvalidArgument,
                "EXP_DECAY weight needs a >= d/R");
    }
}

std::vector<std::string> alpha_warnings(double alpha) {
    if (alpha <= 0.25) {
        return {"alpha <= 1/4: the limit law additionally needs bounded third- and fourth-order "
                "product densities, which cannot be checked from data"};
    }
    return {};
}

// Estimates entering the normalization of one sample after degeneracy
// handling.
struct Resolved {
    double lambda;
    double lambda2;
    double sigma2;
};

// Fills report.error / clamped / warnings. Returns false when no statistic
// can be formed.
bool resolve(const SampleSummary& s, double fallback_lambda, bool clamp, TestReport& report, Resolved& out,
             const std::string& label) {
    out = {s.lambda, s.lambda2, s.sigma2};
    bool ok = true;
    if (s.n <= 1) {
        if (!report.error) report.error = "DEGENERATE_PATTERN";
        if (clamp && fallback_lambda > 0.0) {
            out.lambda2 = fallback_lambda * fallback_lambda;
            if (out.lambda <= 0.0) out.lambda = fallback_lambda;
            report.warnings.push_back(label + "fewer than two points; lambda^2 estimate replaced by " +
                                      std::to_string(out.lambda2));
        } else {
            ok = false;
        }
    }
    if (!(s.sigma2 > 0.0)) {
        if (!report.error) report.error = "NONPOSITIVE_VARIANCE";
        if (clamp) {
            out.sigma2 = std::max(s.sigma2, s.lambda);
            if (!(out.sigma2 > 0.0)) out.sigma2 = fallback_lambda;
            if (out.sigma2 > 0.0) {
                report.warnings.push_back(label + "sigma^2 estimate " + std::to_string(s.sigma2) +
                                          " replaced by " + std::to_string(out.sigma2));
            } else {
                ok = false;
            }
        } else {
            ok = false;
        }
    }
    if (report.error && ok) report.clamped = true;
    return ok;
}

void finish(TestReport& report, double c, LimitFamily family, const TestOptions& opt) {
    report.limit_constant = c * opt.limit_constant_scale;
    report.family = family;
    report.gamma = opt.gamma;
    report.threshold = threshold(report.limit_constant, family, opt.gamma);
}

void decide(TestReport& report, double functional, double intensity) {
    report.functional_term = functional;
    report.intensity_term = intensity;
    const double stat = functional + intensity;
    report.statistic = stat;
    report.p_value = p_value(stat, report.limit_constant, report.family);
    report.decision = stat > report.threshold ? Decision::Reject : Decision::Accept;
}

struct OneSample {
    ScaledDelta delta;
    SampleSummary summary;
};

OneSample prepare(const PointPattern& pattern, const NullHypothesis& h0, const TestOptions& opt, double R) {
    ScaledDelta delta =
        scaled_delta(pattern, opt.body, h0.lambda0, h0.k0, opt.alpha, R, opt.estimator, opt.estimation_window);
    const PointPattern inside =
        opt.estimation_window && !(*opt.estimation_window == pattern.window())
            ? pattern.restricted_to(*opt.estimation_window)
            : pattern;
    return {std::move(delta), summarize(inside, opt.kernel, opt.bandwidth)};
}

json one_sample_config(const TestOptions& opt, const NullHypothesis& h0) {
    json j = options_to_json(opt);
    j["null"] = {{"lambda0", h0.lambda0}, {"k0", h0.k0.describe()}};
    return j;
}

}  // namespace

namespace {

TestReport chi2_core(const OneSample& s, const NullHypothesis& h0, const TestOptions& opt,
                     const std::vector<double>& radii) {
    TestReport report;
    report.test = "chi2";
    report.warnings = alpha_warnings(opt.alpha);
    report.config = one_sample_config(opt, h0);
    report.config["chi2_radii"] = radii;
    finish(report, chi2_limit_constant(static_cast<int>(radii.size()), opt.body), LimitFamily::ScaledChi2_1, opt);
    report.samples = {s.summary};
    Resolved est;
    if (!resolve(s.summary, h0.lambda0, opt.clamp, report, est, "")) return report;
    const double functional = chi2_sum(s.delta, radii) / (est.lambda2 * est.sigma2);
    const double diff = s.summary.lambda - h0.lambda0;
    decide(report, functional, s.summary.volume * diff * diff / est.sigma2);
    return report;
}

TestReport cvm_core(const OneSample& s, const NullHypothesis& h0, const TestOptions& opt) {
    TestReport report;
    report.test = "cvm";
    report.warnings = alpha_warnings(opt.alpha);
    report.config = one_sample_config(opt, h0);
    finish(report, cvm_limit_constant(opt.body, opt.R, opt.V), LimitFamily::ScaledChi2_1, opt);
    report.samples = {s.summary};
    Resolved est;
    if (!resolve(s.summary, h0.lambda0, opt.clamp, report, est, "")) return report;
    const double functional = cvm_integral(s.delta, opt.V) / (est.lambda2 * est.sigma2);
    const double diff = s.summary.lambda - h0.lambda0;
    decide(report, functional, s.summary.volume * diff * diff / est.sigma2);
    return report;
}

TestReport ks_core(const OneSample& s, const NullHypothesis& h0, const TestOptions& opt) {
    TestReport report;
    report.test = "ks";
    report.warnings = alpha_warnings(opt.alpha);
    report.config = one_sample_config(opt, h0);
    finish(report, ks_limit_constant(opt.body, opt.R, opt.v), LimitFamily::ScaledHalfNormal, opt);
    report.samples = {s.summary};
    Resolved est;
    if (!resolve(s.summary, h0.lambda0, opt.clamp, report, est, "")) return report;
    const double root = std::sqrt(est.sigma2);
    const double functional = ks_supremum(s.delta, opt.v) / (est.lambda * root);
    decide(report, functional, std::sqrt(s.summary.volume) * std::abs(s.summary.lambda - h0.lambda0) / root);
    return report;
}

std::vector<double> chi2_radii_for(const TestOptions& opt) {
    const std::vector<double> radii =
        opt.chi2_radii.empty() ? default_chi2_radii(opt.R, opt.chi2_k) : opt.chi2_radii;
    require(!radii.empty() && radii.front() > 0.0, ErrorCode::InvalidArgument, "chi2 radii must be positive");
    for (std::size_t i = 1; i < radii.size(); ++i) {
        require(radii[i] > radii[i - 1], ErrorCode::InvalidArgument, "chi2 radii must be strictly increasing");
    }
    return radii;
}

}  // namespace

TestReport chi2_statistic(const PointPattern& pattern, const NullHypothesis& h0, const TestOptions& opt) {
    check_common(opt);
    const std::vector<double> radii = chi2_radii_for(opt);
    return chi2_core(prepare(pattern, h0, opt, radii.back()), h0, opt, radii);
}

TestReport cvm_statistic(const PointPattern& pattern, const NullHypothesis& h0, const TestOptions& opt) {
    check_common(opt);
    return cvm_core(prepare(pattern, h0, opt, opt.R), h0, opt);
}

TestReport ks_statistic(const PointPattern& pattern, const NullHypothesis& h0, const TestOptions& opt) {
    check_common(opt);
    return ks_core(prepare(pattern, h0, opt, opt.R), h0, opt);
}

std::vector<TestReport> one_sample_reports(const PointPattern& pattern, const NullHypothesis& h0,
                                           const TestOptions& opt, const std::vector<std::string>& tests) {
    check_common(opt);
    std::vector<double> radii;
    double R = opt.R;
    for (const std::string& t : tests) {
        require(t == "ks" || t == "cvm" || t == "chi2", ErrorCode::InvalidArgument,
                "unknown one-sample statistic '" + t + "' (ks|cvm|chi2)");
        if (t == "chi2") {
            radii = chi2_radii_for(opt);
            R = std::max(R, radii.back());
        }
    }
    const OneSample full = prepare(pattern, h0, opt, R);
    std::optional<OneSample> at_R;
    auto base = [&]() -> const OneSample& {
        if (R == opt.R) return full;
        if (!at_R) at_R = prepare(pattern, h0, opt, opt.R);
        return *at_R;
    };
    std::vector<TestReport> out;
    for (const std::string& t : tests) {
        if (t == "chi2") {
            out.push_back(chi2_core(full, h0, opt, radii));
        } else if (t == "cvm") {
            out.push_back(cvm_core(base(), h0, opt));
        } else {
            out.push_back(ks_core(base(), h0, opt));
        }
    }
    return out;
}

TestReport two_sample_report(const PointPattern& a, const PointPattern& b, const TestOptions& opt,
                             const std::string& test) {
    require(test == "ks" || test == "cvm", ErrorCode::InvalidArgument,
            "unknown two-sample statistic '" + test + "' (ks|cvm)");
    return test == "ks" ? two_sample_ks(a, b, opt) : two_sample_cvm(a, b, opt);
}

namespace {

struct TwoSample {
    double volume;
    double scale;
    KEstimate ka;
    KEstimate kb;
    SampleSummary sa;
    SampleSummary sb;
};

TwoSample prepare_two(const PointPattern& a, const PointPattern& b, const TestOptions& opt) {
    require(a.dim() == b.dim() && a.dim() == opt.body.dim(), ErrorCode::DimensionMismatch,
            "two-sample patterns and body must share the dimension");
    require(opt.estimator != EstimatorKind::Naive, ErrorCode::InvalidArgument,
            "two-sample tests support the ht and border estimators");
    const double va = a.window().volume();
    const double vb = b.window().volume();
    require(std::abs(va - vb) <= 1e-9 * std::max(va, vb), ErrorCode::WindowMismatch,
            "two-sample tests need equal window volumes, got " + std::to_string(va) + " and " +
                std::to_string(vb));
    const double volume = 0.5 * (va + vb);
    const double scale = std::pow(std::pow(volume, 1.0 / a.dim()), opt.alpha);
    const double scaled_r = scale * opt.R;
    const double reach = scaled_r * opt.body.circumradius();
    for (const PointPattern* p : {&a, &b}) {
        require(reach <= 0.5 * p->window().inball_radius(), ErrorCode::GuardViolation,
                "c^alpha * R * circumradius(B) = " + std::to_string(reach) +
                    " exceeds half the window inball radius " +
                    std::to_string(0.5 * p->window().inball_radius()));
    }
    return {volume,
            scale,
            k_hat(a, opt.body, scaled_r, opt.estimator),
            k_hat(b, opt.body, scaled_r, opt.estimator),
            summarize(a, opt.kernel, opt.bandwidth),
            summarize(b, opt.kernel, opt.bandwidth)};
}

bool resolve_two(const TwoSample& t, const TestOptions& opt, TestReport& report, Resolved& ra, Resolved& rb) {
    const double pooled = 0.5 * (t.sa.lambda + t.sb.lambda);
    const bool oka = resolve(t.sa, pooled, opt.clamp, report, ra, "sample a: ");
    const bool okb = resolve(t.sb, pooled, opt.clamp, report, rb, "sample b: ");
    return oka && okb;
}

}  // namespace

TestReport two_sample_cvm(const PointPattern& a, const PointPattern& b, const TestOptions& opt) {
    check_common(opt);
    TestReport report;
    report.test = "two_sample_cvm";
    report.warnings = alpha_warnings(opt.alpha);
    report.config = options_to_json(opt);
    finish(report, cvm_limit_constant(opt.body, opt.R, opt.V), LimitFamily::ScaledChi2_1, opt);

    const TwoSample t = prepare_two(a, b, opt);
    report.samples = {t.sa, t.sb};
    Resolved ra, rb;
    if (!resolve_two(t, opt, report, ra, rb)) return report;
    const double integral = two_sample_cvm_integral(t.ka, t.kb, t.scale, opt.R, opt.V);
    const double functional = std::pow(t.volume, 1.0 - 2.0 * opt.alpha) * integral /
                              (ra.lambda2 * ra.sigma2 + rb.lambda2 * rb.sigma2);
    const double diff = t.sa.lambda - t.sb.lambda;
    decide(report, functional, t.volume * diff * diff / (ra.sigma2 + rb.sigma2));
    return report;
}

TestReport two_sample_ks(const PointPattern& a, const PointPattern& b, const TestOptions& opt) {
    check_common(opt);
    TestReport report;
    report.test = "two_sample_ks";
    report.warnings = alpha_warnings(opt.alpha);
    report.config = options_to_json(opt);
    finish(report, ks_limit_constant(opt.body, opt.R, opt.v), LimitFamily::ScaledHalfNormal, opt);

    const TwoSample t = prepare_two(a, b, opt);
    report.samples = {t.sa, t.sb};
    Resolved ra, rb;
    if (!resolve_two(t, opt, report, ra, rb)) return report;
    const double sup = two_sample_ks_supremum(t.ka, t.kb, t.scale, opt.R, opt.v);
    const double functional = std::pow(t.volume, 0.5 - opt.alpha) * sup /
                              std::sqrt(ra.lambda2 * ra.sigma2 + rb.lambda2 * rb.sigma2);
    decide(report, functional,
           std::sqrt(t.volume) * std::abs(t.sa.lambda - t.sb.lambda) / std::sqrt(ra.sigma2 + rb.sigma2));
    return report;
}

}  // namespace kscope
