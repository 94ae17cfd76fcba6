#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "kscope/error.hpp"
#include "kscope/geometry.hpp"
#include "kscope/json_io.hpp"
#include "oracles.hpp"

using namespace kscope;
using std::numbers::pi;

namespace {

ObservationWindow random_window(std::mt19937_64& rng, int d, bool disk) {
    std::uniform_real_distribution<double> U(0.5, 20.0), C(-10.0, 10.0);
    if (disk) return ObservationWindow::disk({C(rng), C(rng)}, U(rng));
    std::vector<double> lo(d), hi(d);
    for (int k = 0; k < d; ++k) {
        lo[k] = C(rng);
        hi[k] = lo[k] + U(rng);
    }
    return ObservationWindow::box(lo, hi);
}

}  // namespace

TEST(StructuringBody, GaugeExamples) {
    const double x[] = {3.0, 4.0};
    EXPECT_DOUBLE_EQ(StructuringBody(2, BodyShape::L2).gauge_norm(x), 5.0);
    EXPECT_DOUBLE_EQ(StructuringBody(2, BodyShape::Linf).gauge_norm(x), 4.0);
    EXPECT_DOUBLE_EQ(StructuringBody(2, BodyShape::L1).gauge_norm(x), 7.0);
    EXPECT_DOUBLE_EQ(StructuringBody(2, BodyShape::L2, 2.0).gauge_norm(x), 2.5);
}

TEST(StructuringBody, Volumes) {
    EXPECT_DOUBLE_EQ(StructuringBody(2, BodyShape::L2).volume(), pi);
    EXPECT_DOUBLE_EQ(StructuringBody(2, BodyShape::Linf).volume(), 4.0);
    EXPECT_DOUBLE_EQ(StructuringBody(3, BodyShape::L1).volume(), 4.0 / 3.0);
    EXPECT_NEAR(StructuringBody(3, BodyShape::L2, 2.0).volume(), 4.0 / 3.0 * pi * 8.0, 1e-12);
    for (int d = 1; d <= 6; ++d) EXPECT_NEAR(unit_ball_volume(d), oracle::ball_volume(d), 1e-13);
}

TEST(StructuringBody, CircumradiusContainsBody) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (BodyShape s : {BodyShape::L1, BodyShape::L2, BodyShape::Linf}) {
        const StructuringBody b(3, s, 1.7);
        for (int i = 0; i < 200; ++i) {
            double x[3] = {g(rng), g(rng), g(rng)};
            const double gauge = b.gauge_norm(x);
            for (double& v : x) v /= gauge;  // on the boundary of B
            EXPECT_LE(oracle::lp_norm(x, 3, 2), b.circumradius() * (1 + 1e-12));
        }
    }
}

TEST(StructuringBody, RejectsBadInput) {
    EXPECT_THROW(StructuringBody(2, BodyShape::L2, 0.0), Error);
    EXPECT_THROW(StructuringBody(0, BodyShape::L2), Error);
    const double x[] = {1.0, 2.0, 3.0};
    EXPECT_THROW(StructuringBody(2, BodyShape::L2).gauge_norm(x), Error);
}

TEST(ObservationWindow, SetCovarianceExamples) {
    const auto W = ObservationWindow::cube(2, 10.0);
    const double y1[] = {1.0, 2.0}, y0[] = {0.0, 0.0}, far[] = {2.5, 0.0};
    EXPECT_DOUBLE_EQ(W.set_covariance(y1), 72.0);
    EXPECT_DOUBLE_EQ(W.set_covariance(y0), 100.0);
    EXPECT_DOUBLE_EQ(ObservationWindow::disk({0.0, 0.0}, 1.0).set_covariance(far), 0.0);
}

TEST(ObservationWindow, SetCovarianceMatchesOracles) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto box = random_window(rng, 3, false);
        const auto disk = random_window(rng, 2, true);
        std::uniform_real_distribution<double> Y(-25.0, 25.0);
        for (int i = 0; i < 20; ++i) {
            const double y[] = {Y(rng), Y(rng), Y(rng)};
            EXPECT_NEAR(box.set_covariance(y), oracle::box_set_covariance(box.lower(), box.upper(), y),
                        1e-12 * box.volume());
            const double t = std::hypot(y[0], y[1]);
            const double exact = disk.set_covariance(std::span<const double>(y, 2));
            EXPECT_NEAR(exact, oracle::disk_set_covariance(disk.radius(), t), 1e-12 * disk.volume());
        }
    }
    // Closed form against chord integration.
    for (double t : {0.0, 0.3, 1.0, 1.7, 1.99}) {
        const double y[] = {t, 0.0};
        EXPECT_NEAR(ObservationWindow::disk({0, 0}, 1.0).set_covariance(y), oracle::disk_set_covariance_numeric(1.0, t),
                    1e-6);
    }
}

TEST(ObservationWindow, SetCovarianceProperties) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 40; ++trial) {
        const bool disk = trial % 2 == 1;
        const auto W = random_window(rng, 2, disk);
        double u[] = {g(rng), g(rng)};
        const double nu = std::hypot(u[0], u[1]);
        u[0] /= nu;
        u[1] /= nu;
        double prev = W.volume();
        for (int s = 0; s <= 60; ++s) {
            const double t = 0.5 * s;
            const double y[] = {t * u[0], t * u[1]}, ny[] = {-y[0], -y[1]};
            const double v = W.set_covariance(y);
            EXPECT_EQ(v, W.set_covariance(ny));
            EXPECT_LE(v, prev * (1.0 + 1e-13));
            EXPECT_GE(v, 0.0);
            prev = v;
        }
    }
}

TEST(ObservationWindow, InballErosionDilationExamples) {
    EXPECT_DOUBLE_EQ(ObservationWindow::box({0, 0}, {10, 4}).inball_radius(), 2.0);
    EXPECT_DOUBLE_EQ(ObservationWindow::disk({0, 0}, 3.0).inball_radius(), 3.0);
    EXPECT_DOUBLE_EQ(ObservationWindow::cube(3, 1.0).inball_radius(), 0.5);
    const auto W = ObservationWindow::cube(2, 10.0);
    EXPECT_DOUBLE_EQ(W.erosion_volume(1.0), 64.0);
    EXPECT_DOUBLE_EQ(W.erosion_volume(0.0), 100.0);
    EXPECT_DOUBLE_EQ(ObservationWindow::disk({0, 0}, 2.0).erosion_volume(2.0), 0.0);
    EXPECT_NEAR(W.dilation_volume(1.0), 140.0 + pi, 1e-12);
    EXPECT_NEAR(ObservationWindow::disk({0, 0}, 1.0).dilation_volume(1.0), 4.0 * pi, 1e-12);
    EXPECT_DOUBLE_EQ(W.dilation_volume(0.0), 100.0);
}

TEST(ObservationWindow, DilationMatchesFaceSum) {
    std::mt19937_64 rng(8);
    for (int d = 1; d <= 4; ++d) {
        for (int i = 0; i < 10; ++i) {
            const auto W = random_window(rng, d, false);
            std::vector<double> edges(d);
            for (int k = 0; k < d; ++k) edges[k] = W.upper()[k] - W.lower()[k];
            for (double r : {0.0, 0.1, 1.0, 3.7}) {
                EXPECT_NEAR(W.dilation_volume(r), oracle::box_dilation_volume(edges, r),
                            1e-12 * oracle::box_dilation_volume(edges, r));
            }
        }
    }
}

TEST(ObservationWindow, VolumeInequalities) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        const bool disk = trial % 2 == 0;
        const int d = disk ? 2 : 2 + trial % 3;
        const auto W = random_window(rng, d, disk);
        const double rho = W.inball_radius(), vol = W.volume();
        for (int i = 0; i < 50; ++i) {
            const double r = rho * i / 49.0;
            const double loss = 1.0 - W.erosion_volume(r) / vol;
            const double gain = W.dilation_volume(r) / vol - 1.0;
            EXPECT_GE(loss, -1e-9);
            EXPECT_LE(loss, d * r / rho + 1e-9);
            EXPECT_GE(gain, r / rho - 1e-9);
            EXPECT_LE(gain, (std::pow(2.0, d) - 1.0) * r / rho + 1e-9);
            const double shell = W.dilation_volume(r) - W.erosion_volume(r);
            EXPECT_LE(shell, (std::pow(2.0, d) - 1.0 + d) * r * W.surface_area() * (1 + 1e-12) + 1e-9);
        }
    }
}

TEST(ObservationWindow, SetCovarianceRatioBound) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> ang(0.0, 2.0 * pi);
    for (int trial = 0; trial < 60; ++trial) {
        const auto W = random_window(rng, 2, trial % 2 == 0);
        for (BodyShape s : {BodyShape::L1, BodyShape::L2, BodyShape::Linf}) {
            const StructuringBody B(2, s);
            const double r = 0.5 * W.inball_radius();
            for (int i = 0; i < 50; ++i) {
                const double a = ang(rng);
                double x[] = {std::cos(a), std::sin(a)};
                const double gauge = B.gauge_norm(x);
                x[0] *= r / gauge;
                x[1] *= r / gauge;
                const double lhs = (W.volume() - W.set_covariance(x)) / W.volume();
                EXPECT_LE(lhs, 2.0 * B.circumradius() * r / W.inball_radius() + 1e-12);
            }
        }
    }
}

TEST(ObservationWindow, ContainsAndInside) {
    const auto W = ObservationWindow::cube(2, 10.0);
    const double in[] = {10.0, 0.0}, out[] = {10.0000001, 5.0};
    EXPECT_TRUE(W.contains(in));
    EXPECT_FALSE(W.contains(out));
    const auto D = ObservationWindow::disk({5, 5}, 5.0);
    EXPECT_TRUE(D.is_inside(W));
    EXPECT_FALSE(W.is_inside(D));
    const auto big = W.dilated_bounding_box(1.0, StructuringBody(2, BodyShape::Linf));
    EXPECT_DOUBLE_EQ(big.lower()[0], -1.0);
    EXPECT_DOUBLE_EQ(big.upper()[1], 11.0);
    EXPECT_TRUE(W.is_inside(big));
}

TEST(ObservationWindow, TranslateAndScale) {
    const auto W = ObservationWindow::box({0, 1}, {4, 3});
    const double shift[] = {1.0, -1.0};
    const auto T = W.translated(shift);
    EXPECT_EQ(T.lower(), (std::vector<double>{1.0, 0.0}));
    EXPECT_DOUBLE_EQ(W.scaled(2.0).volume(), 4.0 * W.volume());
    EXPECT_DOUBLE_EQ(ObservationWindow::disk({1, 1}, 2.0).scaled(3.0).radius(), 6.0);
}

TEST(ObservationWindow, RejectsDegenerate) {
    EXPECT_THROW(ObservationWindow::box({0, 0}, {0, 1}), Error);
    EXPECT_THROW(ObservationWindow::disk({0, 0}, -1.0), Error);
    EXPECT_THROW(ObservationWindow::box({0}, {1, 2}), Error);
}

TEST(JsonIo, RoundTrips) {
    const auto W = ObservationWindow::box({0, -1, 2}, {1, 1, 5});
    EXPECT_EQ(window_from_json(window_to_json(W)), W);
    const auto D = ObservationWindow::disk({1.5, -2}, 3);
    EXPECT_EQ(window_from_json(window_to_json(D)), D);
    const StructuringBody B(3, BodyShape::Linf, 0.5);
    EXPECT_EQ(body_from_json(body_to_json(B)), B);
    const ModelSpec m = ThomasModel{0.25, 4.0, 0.5};
    EXPECT_EQ(model_to_json(model_from_json(model_to_json(m))), model_to_json(m));
}

TEST(JsonIo, ParsesSpecs) {
    EXPECT_EQ(parse_window_spec("box:0,0,50,50"), ObservationWindow::cube(2, 50.0));
    EXPECT_EQ(parse_window_spec("disk:1,2,3"), ObservationWindow::disk({1, 2}, 3));
    EXPECT_EQ(parse_body_spec("linf:2", 2), StructuringBody(2, BodyShape::Linf, 2.0));
    EXPECT_EQ(parse_body_spec("l1", 3), StructuringBody(3, BodyShape::L1));
    EXPECT_THROW(parse_window_spec("box:0,0,1"), Error);
    EXPECT_THROW(parse_window_spec("ellipse:1,2"), Error);
    EXPECT_THROW(parse_body_spec("l3", 2), Error);
    EXPECT_THROW(window_from_json(nlohmann::json::parse(R"({"shape":"box","dim":2})")), Error);
}
