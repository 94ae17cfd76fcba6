#include "kscope/simulate.hpp"

#include <cmath>
#include <numbers>

#include "kscope/error.hpp"

namespace kscope {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

void require_positive(double v, const char* what) {
    require(std::isfinite(v) && v > 0.0, ErrorCode::InvalidArgument,
            std::string(what) + " must be positive");
}

// Uniform point in the window, appended to `out`.
void uniform_point(const ObservationWindow& w, std::mt19937_64& rng, std::vector<double>& out) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int d = w.dim();
    double x[kMaxDim];
    do {
        for (int k = 0; k < d; ++k) x[k] = w.lower()[k] + (w.upper()[k] - w.lower()[k]) * unit(rng);
    } while (!w.contains_unchecked(x));  // rejection only ever fires for disks
    out.insert(out.end(), x, x + d);
}

std::vector<double> poisson_points(double intensity, const ObservationWindow& w,
                                   std::mt19937_64& rng) {
    std::poisson_distribution<long long> count(intensity * w.volume());
    const long long n = count(rng);
    std::vector<double> pts;
    pts.reserve(static_cast<std::size_t>(n) * w.dim());
    for (long long i = 0; i < n; ++i) uniform_point(w, rng, pts);
    return pts;
}

ObservationWindow parent_region(const ObservationWindow& w, double margin) {
    if (w.shape() == WindowShape::Disk) return ObservationWindow::disk(w.center(), w.radius() + margin);
    std::vector<double> lo = w.lower();
    std::vector<double> hi = w.upper();
    for (int k = 0; k < w.dim(); ++k) {
        lo[k] -= margin;
        hi[k] += margin;
    }
    return ObservationWindow::box(std::move(lo), std::move(hi));
}

template <class Displace>
std::vector<double> neyman_scott(double kappa, double mu, double margin, const ObservationWindow& w,
                                 std::mt19937_64& rng, Displace&& displace) {
    const ObservationWindow parents_w = parent_region(w, margin);
    const std::vector<double> parents = poisson_points(kappa, parents_w, rng);
    std::poisson_distribution<int> cluster_size(mu);
    std::vector<double> pts;
    const int d = w.dim();
    for (std::size_t p = 0; p < parents.size(); p += d) {
        const int m = cluster_size(rng);
        for (int c = 0; c < m; ++c) {
            double x[2];
            displace(rng, x);
            x[0] += parents[p];
            x[1] += parents[p + 1];
            if (w.contains_unchecked(x)) pts.insert(pts.end(), x, x + 2);
        }
    }
    return pts;
}

}  // namespace

void validate_model(const ModelSpec& model) {
    std::visit(overloaded{
                   [](const PoissonModel& m) { require_positive(m.lambda, "intensity"); },
                   [](const ThomasModel& m) {
                       require_positive(m.kappa, "parent intensity kappa");
                       require_positive(m.mu, "mean cluster size mu");
                       require_positive(m.sigma_c, "cluster dispersion sigma_c");
                   },
                   [](const MaternClusterModel& m) {
                       require_positive(m.kappa, "parent intensity kappa");
                       require_positive(m.mu, "mean cluster size mu");
                       require_positive(m.r_c, "cluster radius r_c");
                   },
               },
               model);
}

std::string model_name(const ModelSpec& model) {
    return std::visit(overloaded{
                          [](const PoissonModel&) { return std::string("poisson"); },
                          [](const ThomasModel&) { return std::string("thomas"); },
                          [](const MaternClusterModel&) { return std::string("matern_cluster"); },
                      },
                      model);
}

double model_intensity(const ModelSpec& model) {
    return std::visit(overloaded{
                          [](const PoissonModel& m) { return m.lambda; },
                          [](const ThomasModel& m) { return m.kappa * m.mu; },
                          [](const MaternClusterModel& m) { return m.kappa * m.mu; },
                      },
                      model);
}

std::mt19937_64 make_engine(const SeedSpec& seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed.master_seed),
                      static_cast<std::uint32_t>(seed.master_seed >> 32),
                      static_cast<std::uint32_t>(seed.stream_index),
                      static_cast<std::uint32_t>(seed.stream_index >> 32), 0x6b73636fu};
    return std::mt19937_64(seq);
}

PointPattern simulate(const ModelSpec& model, const ObservationWindow& window, const SeedSpec& seed) {
    validate_model(model);
    auto rng = make_engine(seed);
    std::vector<double> pts = std::visit(
        overloaded{
            [&](const PoissonModel& m) { return poisson_points(m.lambda, window, rng); },
            [&](const ThomasModel& m) {
                require(window.dim() == 2, ErrorCode::DimensionMismatch,
                        "Thomas process is only defined for planar windows");
                std::normal_distribution<double> g(0.0, m.sigma_c);
                return neyman_scott(m.kappa, m.mu, kThomasTruncation * m.sigma_c, window, rng,
                                    [&](std::mt19937_64& r, double* x) {
                                        x[0] = g(r);
                                        x[1] = g(r);
                                    });
            },
            [&](const MaternClusterModel& m) {
                require(window.dim() == 2, ErrorCode::DimensionMismatch,
                        "Matern cluster process is only defined for planar windows");
                std::uniform_real_distribution<double> u(-m.r_c, m.r_c);
                return neyman_scott(m.kappa, m.mu, m.r_c, window, rng,
                                    [&](std::mt19937_64& r, double* x) {
                                        do {
                                            x[0] = u(r);
                                            x[1] = u(r);
                                        } while (x[0] * x[0] + x[1] * x[1] > m.r_c * m.r_c);
                                    });
            },
        },
        model);
    return PointPattern(window, std::move(pts));
}

double matern_overlap(double z) {
    if (z <= 0.0) return 0.0;
    if (z >= 1.0) return 1.0;
    const double s = std::sqrt(1.0 - z * z);
    return 2.0 + ((8.0 * z * z - 4.0) * std::acos(z) - 2.0 * std::asin(z) + 4.0 * z * s * s * s -
                  6.0 * z * s) /
                     std::numbers::pi;
}

double theoretical_k(const ModelSpec& model, const StructuringBody& body, double r) {
    validate_model(model);
    require(r >= 0.0, ErrorCode::InvalidArgument, "radius must be nonnegative");
    if (const auto* p = std::get_if<PoissonModel>(&model)) {
        (void)p;
        return body.volume() * std::pow(r, body.dim());
    }
    require(body.dim() == 2 && body.shape() == BodyShape::L2, ErrorCode::UnsupportedModel,
            "closed-form K for cluster models needs a planar Euclidean body");
    // Generalised K_B(r) = K(r * scale) for a scaled Euclidean disk.
    const double rr = r * body.radius_scale();
    const double base = std::numbers::pi * rr * rr;
    if (const auto* t = std::get_if<ThomasModel>(&model)) {
        return base + (1.0 - std::exp(-rr * rr / (4.0 * t->sigma_c * t->sigma_c))) / t->kappa;
    }
    const auto& m = std::get<MaternClusterModel>(model);
    return base + matern_overlap(rr / (2.0 * m.r_c)) / m.kappa;
}

double theoretical_sigma2(const ModelSpec& model) {
    validate_model(model);
    return std::visit(overloaded{
                          [](const PoissonModel& m) { return m.lambda; },
                          [](const ThomasModel& m) { return m.kappa * m.mu * (1.0 + m.mu); },
                          [](const MaternClusterModel& m) { return m.kappa * m.mu * (1.0 + m.mu); },
                      },
                      model);
}

double theoretical_tau2(double lambda, const StructuringBody& body, double s, double t) {
    require(lambda > 0.0, ErrorCode::InvalidArgument, "intensity must be positive");
    require(s >= 0.0 && t >= 0.0, ErrorCode::InvalidArgument, "radii must be nonnegative");
    const int d = body.dim();
    const double vol = body.volume();
    const double lo = std::min(s, t);
    const double hi = std::max(s, t);
    return 2.0 * lambda * lambda * std::pow(lo, d) * vol * (1.0 + 2.0 * lambda * std::pow(hi, d) * vol);
}

}  // namespace kscope
