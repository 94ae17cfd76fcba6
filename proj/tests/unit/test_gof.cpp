#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "kscope/error.hpp"
#include "kscope/gof.hpp"
#include "kscope/simulate.hpp"
#include "oracles.hpp"

using namespace kscope;
using std::numbers::pi;

namespace {

const StructuringBody kDisk(2, BodyShape::L2);

// Step function of the scaled process, rebuilt from the raw jumps.
struct DeltaOracle {
    oracle::StepFunction k;
    double scale, norm, lambda0;
    NullK null_k;

    double null(double r) const { return norm * lambda0 * lambda0 * null_k(scale * r); }
    double at(double r) const { return norm * k(scale * r) - null(r); }
    double left(double r) const { return norm * k.left(scale * r) - null(r); }
    std::vector<double> breaks() const {
        std::vector<double> b;
        for (double r : k.radii()) b.push_back(r / scale);
        return b;
    }
};

DeltaOracle delta_oracle(const ScaledDelta& d) {
    std::vector<std::pair<double, double>> jumps;
    const auto& k = d.k();
    double prev = 0.0;
    for (std::size_t i = 0; i < k.jump_radii.size(); ++i) {
        jumps.emplace_back(k.jump_radii[i], k.cumulative_values[i] - prev);
        prev = k.cumulative_values[i];
    }
    return {oracle::StepFunction(jumps), d.radius_scale(), d.normalizer(), d.lambda0(), d.null_k()};
}

ScaledDelta make_delta(std::uint64_t seed, double alpha, const NullK& null_k, double lambda0 = 1.0,
                       double L = 40.0) {
    const auto p = simulate(PoissonModel{1.0}, ObservationWindow::cube(2, L), {seed, 0});
    return scaled_delta(p, kDisk, lambda0, null_k, alpha, 1.0);
}

}  // namespace

TEST(Normal, CdfAndQuantile) {
    EXPECT_EQ(normal_cdf(0.0), 0.5);
    EXPECT_NEAR(normal_quantile(0.975), 1.959964, 1e-6);
    const boost::math::normal_distribution<double> N;
    for (int i = 1; i < 1000; ++i) {
        const double p = i / 1000.0;
        EXPECT_NEAR(normal_quantile(p), boost::math::quantile(N, p), 1e-9 * std::max(1.0, std::fabs(boost::math::quantile(N, p))));
        EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-12);
    }
    for (double p : {1e-12, 1e-6, 1 - 1e-9}) {
        EXPECT_NEAR(normal_quantile(p), boost::math::quantile(N, p), 1e-8 * std::fabs(boost::math::quantile(N, p)));
    }
    for (double x : {-8.0, -3.0, -0.5, 1.0, 6.0}) EXPECT_NEAR(normal_cdf(x), boost::math::cdf(N, x), 1e-15);
    EXPECT_THROW(normal_quantile(0.0), Error);
    EXPECT_THROW(normal_quantile(1.0), Error);
}

TEST(LimitConstants, Examples) {
    EXPECT_NEAR(ks_limit_constant(kDisk, 1.0, Weightv::const_one()), 1 + 2 * pi, 1e-12);
    EXPECT_NEAR(cvm_limit_constant(kDisk, 1.0, WeightV::lebesgue()), 1 + 4 * pi * pi / 5, 1e-12);
    EXPECT_NEAR(chi2_limit_constant(1, StructuringBody(2, BodyShape::L2, 1 / std::sqrt(pi))), 5.0, 1e-12);
    EXPECT_NEAR(chi2_limit_constant(5, kDisk), 20 * pi * pi + 1, 1e-12);
}

TEST(LimitConstants, WeightedVariants) {
    // EXP_DENSITY: 4|B|^2 int_0^R r^4 exp(-b r^5) dr + 1 = 4 pi^2 (1 - e^{-b R^5}) / (5b) + 1.
    const double b = 0.7, R = 1.3;
    EXPECT_NEAR(cvm_limit_constant(kDisk, R, WeightV::exp_density(b)),
                4 * pi * pi * (-std::expm1(-b * std::pow(R, 5))) / (5 * b) + 1, 1e-12);
    // EXP_DECAY: sup r^2 e^{-a r} at r = 2/a.
    const double a = 3.0;
    double best = 0.0;
    for (int i = 0; i <= 200000; ++i) {
        const double r = R * i / 200000.0;
        best = std::max(best, r * r * std::exp(-a * r));
    }
    EXPECT_NEAR(ks_limit_constant(kDisk, R, Weightv::exp_decay(a)), 2 * pi * best + 1, 1e-9);
    // The cumulative weight matches numerical integration.
    const auto V = WeightV::exp_density(b);
    const double num = oracle::adaptive_simpson([&](double r) { return V.density(r, 2); }, 0.0, R, 1e-14);
    EXPECT_NEAR(V.cumulative(R, 2), num, 1e-12);
}

TEST(Thresholds, RemarkSixRule) {
    const double z = 1.959963984540054;
    const double c1 = 4 * pi * pi + 1;
    EXPECT_NEAR(threshold(c1, LimitFamily::ScaledChi2_1, 0.05), c1 * z * z, 1e-9);
    EXPECT_NEAR(threshold(1 + 2 * pi, LimitFamily::ScaledHalfNormal, 0.05), (1 + 2 * pi) * z, 1e-9);
    EXPECT_THROW(threshold(1.0, LimitFamily::ScaledHalfNormal, 0.0), Error);
    EXPECT_THROW(threshold(1.0, LimitFamily::ScaledHalfNormal, 1.0), Error);
}

TEST(PValues, Roundtrip) {
    const double c = 3.7;
    const double z = normal_quantile(0.975);
    EXPECT_NEAR(p_value(c * z * z, c, LimitFamily::ScaledChi2_1), 0.05, 1e-12);
    EXPECT_NEAR(p_value(c * z, c, LimitFamily::ScaledHalfNormal), 0.05, 1e-12);
    EXPECT_EQ(p_value(0.0, c, LimitFamily::ScaledChi2_1), 1.0);
    EXPECT_EQ(p_value(0.0, c, LimitFamily::ScaledHalfNormal), 1.0);
}

TEST(CvmIntegral, MatchesQuadratureOracle) {
    const NullK pois = NullK::poisson(kDisk);
    const NullK tab = NullK::tabulated({0.5, 2.0, 10.0}, {1.0, 12.0, 400.0});
    for (double alpha : {0.5, 0.3}) {
        for (const NullK* nk : {&pois, &tab}) {
            const auto d = make_delta(5, alpha, *nk, 0.95);
            const auto o = delta_oracle(d);
            for (const WeightV& V : {WeightV::lebesgue(), WeightV::exp_density(0.8)}) {
                auto breaks = o.breaks();
                if (nk->is_tabulated()) {
                    for (double knot : nk->knots()) breaks.push_back(knot / d.radius_scale());
                }
                const double want = oracle::piecewise_integral(
                    [&](double r) { return o.at(r) * o.at(r) * V.density(r, 2); }, breaks, 1.0, 1e-13);
                EXPECT_NEAR(cvm_integral(d, V), want, 1e-7 * std::max(1.0, want)) << alpha;
            }
        }
    }
}

TEST(KsSupremum, MatchesDenseGridOracle) {
    const NullK pois = NullK::poisson(kDisk);
    for (double alpha : {0.5, 0.35}) {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            const auto d = make_delta(seed, alpha, pois, 1.02);
            const auto o = delta_oracle(d);
            for (const Weightv& v : {Weightv::const_one(), Weightv::exp_decay(2.5)}) {
                const double want = oracle::dense_supremum([&](double r) { return o.at(r) * v(r); },
                                                           [&](double r) { return o.left(r) * v(r); }, o.breaks(), 1.0);
                const double got = ks_supremum(d, v);
                EXPECT_GE(got, want - 1e-9 * std::max(1.0, want));
                EXPECT_NEAR(got, want, 1e-5 * std::max(1.0, want));
            }
        }
    }
}

TEST(Chi2Sum, MatchesDirectFormula) {
    const auto d = make_delta(4, 0.5, NullK::poisson(kDisk));
    const auto o = delta_oracle(d);
    const auto radii = default_chi2_radii(1.0, 5);
    EXPECT_EQ(radii, (std::vector<double>{1.0 / 5, 2.0 / 5, 3.0 / 5, 4.0 / 5, 5.0 / 5}));
    double want = 0.0, prev_r = 0.0, prev_d = 0.0;
    for (double r : radii) {
        const double inc = (o.at(r) - prev_d) / (r * r - prev_r * prev_r);
        want += inc * inc;
        prev_r = r;
        prev_d = o.at(r);
    }
    EXPECT_NEAR(chi2_sum(d, radii), want, 1e-10 * want);
}

TEST(OneSample, ZeroCase) {
    // No pairs in reach, null K vanishing on the scaled range, lambda0 = lambda hat.
    const auto W = ObservationWindow::cube(2, 100.0);
    std::vector<double> c;
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) c.insert(c.end(), {5.0 + 10.5 * i, 5.0 + 10.5 * j});
    const PointPattern p(W, c);
    const NullHypothesis h0{lambda_hat(p), NullK::tabulated({20.0}, {0.0})};
    TestOptions opt;
    opt.clamp = true;  // sigma^2 estimate is positive here; clamp is inert
    for (const auto& r : one_sample_reports(p, h0, opt, {"ks", "cvm", "chi2"})) {
        ASSERT_TRUE(r.statistic.has_value()) << r.test;
        EXPECT_EQ(*r.statistic, 0.0) << r.test;
        EXPECT_EQ(r.decision, Decision::Accept);
        EXPECT_EQ(*r.p_value, 1.0);
        EXPECT_FALSE(r.error.has_value());
    }
}

TEST(OneSample, ReportFieldsAndCoherence) {
    const auto p = simulate(PoissonModel{1.0}, ObservationWindow::cube(2, 30.0), {9, 0});
    const NullHypothesis h0{1.0, NullK::poisson(kDisk)};
    const TestOptions opt;
    const auto reports = one_sample_reports(p, h0, opt, {"ks", "cvm", "chi2"});
    EXPECT_EQ(reports[0].statistic, ks_statistic(p, h0, opt).statistic);
    EXPECT_EQ(reports[1].statistic, cvm_statistic(p, h0, opt).statistic);
    EXPECT_EQ(reports[2].statistic, chi2_statistic(p, h0, opt).statistic);
    for (const auto& r : reports) {
        const auto j = to_json(r);
        for (const char* key : {"statistic", "limit_constant", "limit_family", "p_value", "gamma", "threshold",
                                "decision", "config", "warnings"}) {
            EXPECT_TRUE(j.contains(key)) << key;
        }
        EXPECT_NEAR(*r.statistic, r.functional_term + r.intensity_term, 1e-12 * *r.statistic);
        EXPECT_EQ(r.decision == Decision::Reject, *r.statistic > r.threshold);
        EXPECT_EQ(r.decision == Decision::Reject, *r.p_value < r.gamma);
    }
    EXPECT_EQ(reports[0].family, LimitFamily::ScaledHalfNormal);
    EXPECT_EQ(reports[1].family, LimitFamily::ScaledChi2_1);
}

TEST(OneSample, DegenerateAndClamped) {
    const auto W = ObservationWindow::cube(2, 50.0);
    const PointPattern empty(W, {});
    const NullHypothesis h0{1.0, NullK::poisson(kDisk)};
    TestOptions opt;
    const auto r = cvm_statistic(empty, h0, opt);
    EXPECT_EQ(r.decision, Decision::Undetermined);
    EXPECT_FALSE(r.statistic.has_value());
    EXPECT_EQ(r.error, "DEGENERATE_PATTERN");
    EXPECT_TRUE(to_json(r)["statistic"].is_null());
    EXPECT_GT(r.threshold, 0.0);

    opt.clamp = true;
    const auto c = cvm_statistic(empty, h0, opt);
    ASSERT_TRUE(c.statistic.has_value());
    EXPECT_TRUE(std::isfinite(*c.statistic));
    EXPECT_TRUE(c.clamped);
    EXPECT_EQ(c.decision, Decision::Reject);
    EXPECT_FALSE(c.warnings.empty());
}

TEST(OneSample, NonpositiveVariance) {
    // A sparse lattice with a large bandwidth makes the subtracted term win.
    const auto W = ObservationWindow::cube(2, 40.0);
    std::vector<double> c;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) c.insert(c.end(), {2.5 + 5 * i, 2.5 + 5 * j});
    const PointPattern p(W, c);
    TestOptions opt;
    opt.bandwidth = 0.1;  // h = 4 < lattice spacing: no pairs counted
    ASSERT_LE(sigma2_hat(p, opt.kernel, opt.bandwidth), 0.0);
    const NullHypothesis h0{0.04, NullK::poisson(kDisk)};
    const auto r = ks_statistic(p, h0, opt);
    EXPECT_EQ(r.error, "NONPOSITIVE_VARIANCE");
    EXPECT_EQ(r.decision, Decision::Undetermined);
    opt.clamp = true;
    const auto cl = ks_statistic(p, h0, opt);
    EXPECT_TRUE(cl.clamped);
    ASSERT_TRUE(cl.statistic.has_value());
    EXPECT_DOUBLE_EQ(cl.samples[0].sigma2, sigma2_hat(p, opt.kernel, opt.bandwidth));
}

TEST(OneSample, OptionValidation) {
    const auto p = simulate(PoissonModel{1.0}, ObservationWindow::cube(2, 30.0), {9, 0});
    const NullHypothesis h0{1.0, NullK::poisson(kDisk)};
    TestOptions opt;
    opt.alpha = 0.6;
    EXPECT_THROW(ks_statistic(p, h0, opt), Error);
    opt = {};
    opt.gamma = 0.0;
    EXPECT_THROW(ks_statistic(p, h0, opt), Error);
    opt = {};
    opt.v = Weightv::exp_decay(1.0);  // needs a >= d/R = 2
    EXPECT_THROW(ks_statistic(p, h0, opt), Error);
    opt = {};
    opt.alpha = 0.25;
    EXPECT_FALSE(ks_statistic(p, h0, opt).warnings.empty());
    EXPECT_THROW(one_sample_reports(p, h0, {}, {"ad"}), Error);
}

TEST(OneSample, LimitConstantScaleHook) {
    const auto p = simulate(PoissonModel{1.0}, ObservationWindow::cube(2, 30.0), {9, 0});
    const NullHypothesis h0{1.0, NullK::poisson(kDisk)};
    TestOptions opt;
    opt.limit_constant_scale = 0.01;
    const auto r = ks_statistic(p, h0, opt);
    EXPECT_NEAR(r.limit_constant, 0.01 * (1 + 2 * pi), 1e-12);
}

TEST(TwoSample, IdenticalPatternsGiveZero) {
    const auto p = simulate(PoissonModel{1.0}, ObservationWindow::cube(2, 30.0), {9, 0});
    for (const char* t : {"ks", "cvm"}) {
        const auto r = two_sample_report(p, p, {}, t);
        EXPECT_EQ(*r.statistic, 0.0);
        EXPECT_EQ(r.decision, Decision::Accept);
    }
}

TEST(TwoSample, SymmetricInArguments) {
    const auto W = ObservationWindow::cube(2, 30.0);
    for (std::uint64_t k = 0; k < 5; ++k) {
        const auto a = simulate(PoissonModel{1.0}, W, {4, 2 * k});
        const auto b = simulate(ThomasModel{0.25, 4, 0.5}, W, {4, 2 * k + 1});
        for (const char* t : {"ks", "cvm"}) {
            EXPECT_EQ(*two_sample_report(a, b, {}, t).statistic, *two_sample_report(b, a, {}, t).statistic);
        }
    }
}

TEST(TwoSample, IntegralAndSupremumMatchOracles) {
    const auto W = ObservationWindow::cube(2, 36.0);
    const auto a = simulate(PoissonModel{1.0}, W, {6, 0});
    const auto b = simulate(PoissonModel{1.0}, W, {6, 1});
    const double scale = 6.0;
    const auto ka = k_hat(a, kDisk, scale), kb = k_hat(b, kDisk, scale);
    auto step = [](const KEstimate& k) {
        std::vector<std::pair<double, double>> j;
        double prev = 0.0;
        for (std::size_t i = 0; i < k.jump_radii.size(); ++i) {
            j.emplace_back(k.jump_radii[i], k.cumulative_values[i] - prev);
            prev = k.cumulative_values[i];
        }
        return oracle::StepFunction(j);
    };
    const auto fa = step(ka), fb = step(kb);
    std::vector<double> breaks;
    for (double r : fa.radii()) breaks.push_back(r / scale);
    for (double r : fb.radii()) breaks.push_back(r / scale);
    auto diff = [&](double r) { return fa(scale * r) - fb(scale * r); };
    auto diff_left = [&](double r) { return fa.left(scale * r) - fb.left(scale * r); };
    const auto V = WeightV::exp_density(0.5);
    const double want_i = oracle::piecewise_integral([&](double r) { return diff(r) * diff(r) * V.density(r, 2); },
                                                     breaks, 1.0, 1e-14);
    EXPECT_NEAR(two_sample_cvm_integral(ka, kb, scale, 1.0, V), want_i, 1e-8 * std::max(1.0, want_i));
    const auto v = Weightv::exp_decay(3.0);
    const double want_s = oracle::dense_supremum([&](double r) { return diff(r) * v(r); },
                                                 [&](double r) { return diff_left(r) * v(r); }, breaks, 1.0);
    EXPECT_NEAR(two_sample_ks_supremum(ka, kb, scale, 1.0, v), want_s, 1e-12 * std::max(1.0, want_s));
}

TEST(TwoSample, Preconditions) {
    const auto a = simulate(PoissonModel{1.0}, ObservationWindow::cube(2, 30.0), {1, 0});
    const auto b = simulate(PoissonModel{1.0}, ObservationWindow::cube(2, 31.0), {1, 1});
    try {
        two_sample_ks(a, b, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::WindowMismatch);
    }
    TestOptions naive;
    naive.estimator = EstimatorKind::Naive;
    EXPECT_THROW(two_sample_ks(a, a, naive), Error);
    // Equal volumes, different shapes are allowed.
    const auto c = simulate(PoissonModel{1.0}, ObservationWindow::box({0, 0}, {45, 20}), {1, 2});
    TestOptions small;
    small.R = 0.5;
    EXPECT_NO_THROW(two_sample_cvm(a, c, small));
}

TEST(TwoSample, DegenerateSampleUsesPooledFallback) {
    const auto W = ObservationWindow::cube(2, 30.0);
    const auto a = simulate(PoissonModel{1.0}, W, {1, 0});
    const PointPattern b(W, {});
    TestOptions opt;
    EXPECT_EQ(two_sample_ks(a, b, opt).decision, Decision::Undetermined);
    opt.clamp = true;
    const auto r = two_sample_ks(a, b, opt);
    EXPECT_TRUE(r.clamped);
    EXPECT_EQ(r.decision, Decision::Reject);
}
