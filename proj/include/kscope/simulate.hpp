#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <variant>

#include "kscope/geometry.hpp"
#include "kscope/pattern.hpp"

namespace kscope {

struct PoissonModel {
    double lambda;
};

/// Neyman-Scott process with Gaussian offspring displacement (planar).
struct ThomasModel {
    double kappa;    // parent intensity
    double mu;       // mean cluster size
    double sigma_c;  // per-axis displacement std
};

/// Neyman-Scott process with offspring uniform in a disk (planar).
struct MaternClusterModel {
    double kappa;
    double mu;
    double r_c;  // cluster radius
};

using ModelSpec = std::variant<PoissonModel, ThomasModel, MaternClusterModel>;

/// Throws Error(InvalidArgument) unless every rate/scale parameter is > 0.
void validate_model(const ModelSpec& model);
std::string model_name(const ModelSpec& model);
/// Intensity lambda of the stationary model (kappa*mu for cluster models).
double model_intensity(const ModelSpec& model);

struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_index = 0;
};

/// Engine for one (master_seed, stream_index) stream. Streams are derived by
/// seeding through std::seed_seq, so replicate k of a study is reproducible
/// no matter which worker runs it.
std::mt19937_64 make_engine(const SeedSpec& seed);

PointPattern simulate(const ModelSpec& model, const ObservationWindow& window, const SeedSpec& seed);

/// Displacement beyond which Thomas offspring are ignored when choosing the
/// parent margin, in units of sigma_c.
inline constexpr double kThomasTruncation = 6.0;

/// Closed-form K_B(r). Cluster models require a planar Euclidean body.
double theoretical_k(const ModelSpec& model, const StructuringBody& body, double r);
/// sigma^2 = lim Var N(W)/|W|.
double theoretical_sigma2(const ModelSpec& model);
/// Asymptotic covariance tau_B(s,t) of sqrt|W| * (lambda^2 K_B)^(s), (t) for
/// a stationary Poisson process of intensity lambda.
double theoretical_tau2(double lambda, const StructuringBody& body, double s, double t);

/// CDF of the distance between two independent uniform points in a disk of
/// radius 1 evaluated at 2z (z in [0,1]); the overlap term of the Matern
/// cluster K-function.
double matern_overlap(double z);

}  // namespace kscope
