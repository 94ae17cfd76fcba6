#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kscope/geometry.hpp"
#include "kscope/pattern.hpp"
#include "kscope/simulate.hpp"

namespace kscope {

enum class EstimatorKind { HT, Naive, Border };

std::string_view to_string(EstimatorKind kind);
/// Accepts "ht", "naive", "border" (case-insensitive).
EstimatorKind parse_estimator_kind(std::string_view name);

/// Right-continuous step function r -> (lambda^2 K_B)^(r) on [0, r_max].
/// Ties in the pair radii are merged: jump_radii is strictly increasing and
/// jump_multiplicity counts the ordered pairs that land on each radius.
struct KEstimate {
    StructuringBody body;
    std::vector<double> jump_radii;
    std::vector<double> cumulative_values;
    std::vector<std::size_t> jump_multiplicity;
    double r_max = 0.0;
    EstimatorKind kind = EstimatorKind::HT;
    double window_volume = 0.0;

    /// Value at r (closed ball). Throws Error(OutOfRange) outside [0, r_max].
    double eval(double r) const;
    /// lim_{s -> r-} of the step function; 0 at r = 0.
    double left_limit(double r) const;
    std::size_t pair_count() const;
};

/// Edge-corrected estimate of lambda^2 K_B up to r_max.
///
/// HT and BORDER use the points of `pattern` inside the estimation window W.
/// NAIVE needs a plus-sampled pattern: `pattern.window()` must contain
/// W (+) r_max B, and every point of the pattern may serve as a partner.
/// W defaults to the pattern window. Requires r_max * circumradius(B) < rho(W).
KEstimate k_hat(const PointPattern& pattern, const StructuringBody& body, double r_max,
                EstimatorKind kind = EstimatorKind::HT,
                const std::optional<ObservationWindow>& estimation_window = std::nullopt);

/// Free-function spelling of KEstimate::eval.
double eval_k(const KEstimate& k, double r);

/// Columns r,value: a row at 0, one row per jump, and a row at r_max.
void write_k_csv(const KEstimate& k, std::ostream& out);

double lambda_hat(const PointPattern& pattern);
double lambda2_hat(const PointPattern& pattern);

enum class Kernel { Indicator, Triangular };
std::string_view to_string(Kernel kernel);
Kernel parse_kernel(std::string_view name);
/// Integral of the kernel over its support, the Euclidean unit ball.
double kernel_integral(Kernel kernel, int dim);

/// b = c^{-3/4} with c = |W|^{1/d}.
double default_bandwidth(const ObservationWindow& window);

/// Estimate of sigma^2 = lim Var N(W)/|W|. bandwidth <= 0 selects the default.
/// Requires b * c < rho(W).
double sigma2_hat(const PointPattern& pattern, Kernel kernel = Kernel::Indicator,
                  double bandwidth = 0.0);

/// Null K-function K_0 on the unscaled radius axis.
class NullK {
public:
    /// K_0(r) = |B| r^d, the Poisson K-function.
    static NullK poisson(const StructuringBody& body);
    static NullK from_model(const ModelSpec& model, const StructuringBody& body);
    /// Monotone piecewise-linear interpolation of (r, K) knots. A knot (0, 0)
    /// is implied when the first radius is positive. Evaluation past the last
    /// knot throws Error(OutOfRange).
    static NullK tabulated(std::vector<double> radii, std::vector<double> values);
    static NullK load_csv(const std::string& path);

    double operator()(double r) const;
    bool is_power_law() const noexcept { return kind_ == Kind::PowerLaw; }
    bool is_tabulated() const noexcept { return kind_ == Kind::Tabulated; }
    /// K_0(r) = coefficient * r^exponent when is_power_law().
    double coefficient() const noexcept { return coef_; }
    int exponent() const noexcept { return exponent_; }
    /// Interpolation knots (tabulated only).
    const std::vector<double>& knots() const noexcept { return radii_; }
    /// Largest radius at which the function is defined.
    double domain_end() const noexcept;
    std::string describe() const;

private:
    enum class Kind { PowerLaw, Model, Tabulated };
    Kind kind_ = Kind::PowerLaw;
    double coef_ = 0.0;
    int exponent_ = 0;
    std::optional<ModelSpec> model_;
    std::optional<StructuringBody> body_;
    std::vector<double> radii_;
    std::vector<double> values_;
};

/// Scaled empirical process
///   Delta(r) = |W|^{1/2 - alpha} ((lambda^2 K_B)^(c^alpha r) - lambda0^2 K_0(c^alpha r))
/// on [0, R], with c = |W|^{1/d}.
class ScaledDelta {
public:
    ScaledDelta(KEstimate k, double alpha, double R, double lambda0, NullK null_k);

    double alpha() const noexcept { return alpha_; }
    double R() const noexcept { return R_; }
    /// c^alpha
    double radius_scale() const noexcept { return scale_; }
    /// |W|^{1/2 - alpha}
    double normalizer() const noexcept { return norm_; }
    double lambda0() const noexcept { return lambda0_; }
    const KEstimate& k() const noexcept { return k_; }
    const NullK& null_k() const noexcept { return null_k_; }

    double eval(double r) const;
    double eval_left(double r) const;
    /// |W|^{1/2-alpha} * lambda0^2 K_0(c^alpha r): the smooth part.
    double null_term(double r) const;
    /// Jump locations on the scaled axis inside (0, R], increasing.
    std::vector<double> jump_points() const;
    /// Normalized empirical value |W|^{1/2-alpha} (lambda^2 K)^ at the
    /// scaled radius r (right-continuous).
    double empirical_term(double r) const;

    /// On [lo, hi) the empirical part equals `level`; Delta = level - null_term.
    /// The pieces partition [0, R]; the last one is closed at R and may have
    /// zero length when a jump sits exactly at R.
    struct Piece {
        double lo;
        double hi;
        double level;
    };
    std::vector<Piece> pieces() const;

private:
    KEstimate k_;
    double alpha_;
    double R_;
    double scale_;
    double norm_;
    double lambda0_;
    NullK null_k_;
};

/// Throws Error(UnsupportedAlpha) unless alpha lies in (0, 1/2].
void check_alpha(double alpha);

/// Builds Delta^(alpha) after checking alpha and the window guard
/// c^alpha R circumradius(B) <= rho(W) / 2.
ScaledDelta scaled_delta(const PointPattern& pattern, const StructuringBody& body, double lambda0,
                         const NullK& null_k, double alpha, double R,
                         EstimatorKind kind = EstimatorKind::HT,
                         const std::optional<ObservationWindow>& estimation_window = std::nullopt);

/// Scalar summaries of a pattern shared by all test statistics.
struct SampleSummary {
    std::size_t n = 0;
    double volume = 0.0;
    double lambda = 0.0;
    double lambda2 = 0.0;
    double sigma2 = 0.0;
    double bandwidth = 0.0;
};

SampleSummary summarize(const PointPattern& pattern, Kernel kernel = Kernel::Indicator,
                        double bandwidth = 0.0);

}  // namespace kscope
