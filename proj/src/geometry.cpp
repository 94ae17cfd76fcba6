#include "kscope/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "kscope/error.hpp"

namespace kscope {

namespace {

void check_dim(int dim) {
    require(dim >= 1 && dim <= kMaxDim, ErrorCode::InvalidArgument,
            "dimension must lie in [1, " + std::to_string(kMaxDim) + "], got " +
                std::to_string(dim));
}

double factorial(int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

// Elementary symmetric polynomial e_j of the values.
double elementary_symmetric(const std::vector<double>& v, int j) {
    std::vector<double> e(j + 1, 0.0);
    e[0] = 1.0;
    for (double x : v) {
        for (int k = j; k >= 1; --k) e[k] += e[k - 1] * x;
    }
    return e[j];
}

}  // namespace

double unit_ball_volume(int d) {
    return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

// ---------------------------------------------------------------------------
// StructuringBody

StructuringBody::StructuringBody(int dim, BodyShape shape, double radius_scale)
    : dim_(dim), shape_(shape), scale_(radius_scale) {
    check_dim(dim);
    require(std::isfinite(radius_scale) && radius_scale > 0.0, ErrorCode::InvalidArgument,
            "radius_scale must be positive");
}

double StructuringBody::gauge_unchecked(const double* x) const noexcept {
    double n = 0.0;
    switch (shape_) {
        case BodyShape::L1:
            for (int k = 0; k < dim_; ++k) n += std::abs(x[k]);
            break;
        case BodyShape::L2:
            for (int k = 0; k < dim_; ++k) n += x[k] * x[k];
            n = std::sqrt(n);
            break;
        case BodyShape::Linf:
            for (int k = 0; k < dim_; ++k) n = std::max(n, std::abs(x[k]));
            break;
    }
    return n / scale_;
}

double StructuringBody::gauge_norm(std::span<const double> x) const {
    require(static_cast<int>(x.size()) == dim_, ErrorCode::DimensionMismatch,
            "gauge_norm: vector has dimension " + std::to_string(x.size()) + ", body has " +
                std::to_string(dim_));
    return gauge_unchecked(x.data());
}

double StructuringBody::volume() const {
    const double sd = std::pow(scale_, dim_);
    switch (shape_) {
        case BodyShape::L1: return std::pow(2.0, dim_) / factorial(dim_) * sd;
        case BodyShape::L2: return unit_ball_volume(dim_) * sd;
        case BodyShape::Linf: return std::pow(2.0, dim_) * sd;
    }
    return 0.0;
}

double StructuringBody::circumradius() const {
    switch (shape_) {
        case BodyShape::L1:
        case BodyShape::L2: return scale_;
        case BodyShape::Linf: return scale_ * std::sqrt(static_cast<double>(dim_));
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// ObservationWindow

ObservationWindow ObservationWindow::box(std::vector<double> lower, std::vector<double> upper) {
    require(lower.size() == upper.size(), ErrorCode::DimensionMismatch,
            "box corners have different dimensions");
    check_dim(static_cast<int>(lower.size()));
    for (std::size_t k = 0; k < lower.size(); ++k) {
        require(std::isfinite(lower[k]) && std::isfinite(upper[k]), ErrorCode::InvalidArgument,
                "box corners must be finite");
        require(upper[k] > lower[k], ErrorCode::InvalidArgument,
                "box edge lengths must be positive");
    }
    ObservationWindow w;
    w.dim_ = static_cast<int>(lower.size());
    w.shape_ = WindowShape::Box;
    w.lower_ = std::move(lower);
    w.upper_ = std::move(upper);
    return w;
}

ObservationWindow ObservationWindow::cube(int dim, double side) {
    check_dim(dim);
    return box(std::vector<double>(dim, 0.0), std::vector<double>(dim, side));
}

ObservationWindow ObservationWindow::disk(std::array<double, 2> center, double radius) {
    require(std::isfinite(center[0]) && std::isfinite(center[1]), ErrorCode::InvalidArgument,
            "disk center must be finite");
    require(std::isfinite(radius) && radius > 0.0, ErrorCode::InvalidArgument,
            "disk radius must be positive");
    ObservationWindow w;
    w.dim_ = 2;
    w.shape_ = WindowShape::Disk;
    w.center_ = center;
    w.radius_ = radius;
    w.lower_ = {center[0] - radius, center[1] - radius};
    w.upper_ = {center[0] + radius, center[1] + radius};
    return w;
}

double ObservationWindow::volume() const {
    if (shape_ == WindowShape::Disk) return std::numbers::pi * radius_ * radius_;
    double v = 1.0;
    for (int k = 0; k < dim_; ++k) v *= upper_[k] - lower_[k];
    return v;
}

double ObservationWindow::set_covariance_unchecked(const double* y) const noexcept {
    if (shape_ == WindowShape::Disk) {
        const double u = std::hypot(y[0], y[1]);
        const double two_r = 2.0 * radius_;
        if (u >= two_r) return 0.0;
        return 2.0 * radius_ * radius_ * std::acos(u / two_r) -
               0.5 * u * std::sqrt(two_r * two_r - u * u);
    }
    double v = 1.0;
    for (int k = 0; k < dim_; ++k) {
        const double overlap = (upper_[k] - lower_[k]) - std::abs(y[k]);
        if (overlap <= 0.0) return 0.0;
        v *= overlap;
    }
    return v;
}

double ObservationWindow::set_covariance(std::span<const double> y) const {
    require(static_cast<int>(y.size()) == dim_, ErrorCode::DimensionMismatch,
            "set_covariance: lag dimension does not match window");
    return set_covariance_unchecked(y.data());
}

double ObservationWindow::inball_radius() const {
    if (shape_ == WindowShape::Disk) return radius_;
    double m = upper_[0] - lower_[0];
    for (int k = 1; k < dim_; ++k) m = std::min(m, upper_[k] - lower_[k]);
    return 0.5 * m;
}

double ObservationWindow::erosion_volume(double r) const {
    require(r >= 0.0, ErrorCode::InvalidArgument, "erosion radius must be nonnegative");
    if (shape_ == WindowShape::Disk) {
        const double s = std::max(radius_ - r, 0.0);
        return std::numbers::pi * s * s;
    }
    double v = 1.0;
    for (int k = 0; k < dim_; ++k) v *= std::max(upper_[k] - lower_[k] - 2.0 * r, 0.0);
    return v;
}

double ObservationWindow::dilation_volume(double r) const {
    require(r >= 0.0, ErrorCode::InvalidArgument, "dilation radius must be nonnegative");
    if (shape_ == WindowShape::Disk) {
        const double s = radius_ + r;
        return std::numbers::pi * s * s;
    }
    // Steiner: sum_k kappa_k r^k e_{d-k}(edge lengths).
    std::vector<double> edges(dim_);
    for (int k = 0; k < dim_; ++k) edges[k] = upper_[k] - lower_[k];
    double v = 0.0;
    double rk = 1.0;
    for (int k = 0; k <= dim_; ++k) {
        v += unit_ball_volume(k) * rk * elementary_symmetric(edges, dim_ - k);
        rk *= r;
    }
    return v;
}

double ObservationWindow::surface_area() const {
    if (shape_ == WindowShape::Disk) return 2.0 * std::numbers::pi * radius_;
    if (dim_ == 1) return 2.0;
    std::vector<double> edges(dim_);
    for (int k = 0; k < dim_; ++k) edges[k] = upper_[k] - lower_[k];
    return 2.0 * elementary_symmetric(edges, dim_ - 1);
}

bool ObservationWindow::contains_unchecked(const double* x) const noexcept {
    if (shape_ == WindowShape::Disk) {
        const double dx = x[0] - center_[0];
        const double dy = x[1] - center_[1];
        return dx * dx + dy * dy <= radius_ * radius_;
    }
    for (int k = 0; k < dim_; ++k) {
        if (x[k] < lower_[k] || x[k] > upper_[k]) return false;
    }
    return true;
}

bool ObservationWindow::contains(std::span<const double> x) const {
    require(static_cast<int>(x.size()) == dim_, ErrorCode::DimensionMismatch,
            "contains: point dimension does not match window");
    return contains_unchecked(x.data());
}

bool ObservationWindow::is_inside(const ObservationWindow& outer) const {
    if (outer.dim_ != dim_) return false;
    if (outer.shape_ == WindowShape::Box) {
        for (int k = 0; k < dim_; ++k) {
            if (lower_[k] < outer.lower_[k] || upper_[k] > outer.upper_[k]) return false;
        }
        return true;
    }
    if (shape_ == WindowShape::Disk) {
        const double gap = std::hypot(center_[0] - outer.center_[0], center_[1] - outer.center_[1]);
        return gap + radius_ <= outer.radius_;
    }
    // Box inside disk: every corner inside (both convex).
    const std::array<double, 2> xs{lower_[0], upper_[0]};
    const std::array<double, 2> ys{lower_[1], upper_[1]};
    for (double x : xs) {
        for (double y : ys) {
            const std::array<double, 2> p{x, y};
            if (!outer.contains_unchecked(p.data())) return false;
        }
    }
    return true;
}

ObservationWindow ObservationWindow::dilated_bounding_box(double r,
                                                          const StructuringBody& body) const {
    require(body.dim() == dim_, ErrorCode::DimensionMismatch,
            "structuring body and window dimensions differ");
    require(r >= 0.0, ErrorCode::InvalidArgument, "dilation radius must be nonnegative");
    // Every supported unit ball has coordinate extent 1 along each axis.
    const double margin = r * body.radius_scale();
    std::vector<double> lo = lower_;
    std::vector<double> hi = upper_;
    for (int k = 0; k < dim_; ++k) {
        lo[k] -= margin;
        hi[k] += margin;
    }
    return box(std::move(lo), std::move(hi));
}

ObservationWindow ObservationWindow::translated(std::span<const double> shift) const {
    require(static_cast<int>(shift.size()) == dim_, ErrorCode::DimensionMismatch,
            "translation dimension does not match window");
    if (shape_ == WindowShape::Disk) {
        return disk({center_[0] + shift[0], center_[1] + shift[1]}, radius_);
    }
    std::vector<double> lo = lower_;
    std::vector<double> hi = upper_;
    for (int k = 0; k < dim_; ++k) {
        lo[k] += shift[k];
        hi[k] += shift[k];
    }
    return box(std::move(lo), std::move(hi));
}

ObservationWindow ObservationWindow::scaled(double factor) const {
    require(factor > 0.0, ErrorCode::InvalidArgument, "scale factor must be positive");
    if (shape_ == WindowShape::Disk) {
        return disk({center_[0] * factor, center_[1] * factor}, radius_ * factor);
    }
    std::vector<double> lo = lower_;
    std::vector<double> hi = upper_;
    for (int k = 0; k < dim_; ++k) {
        lo[k] *= factor;
        hi[k] *= factor;
    }
    return box(std::move(lo), std::move(hi));
}

// ---------------------------------------------------------------------------

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid_argument";
        case ErrorCode::DimensionMismatch: return "dimension_mismatch";
        case ErrorCode::Parse: return "parse_error";
        case ErrorCode::OutsideWindow: return "point_outside_window";
        case ErrorCode::DuplicatePoint: return "duplicate_point";
        case ErrorCode::Io: return "io_error";
        case ErrorCode::GuardViolation: return "guard_violation";
        case ErrorCode::UnsupportedAlpha: return "unsupported_alpha";
        case ErrorCode::UnsupportedModel: return "unsupported_model";
        case ErrorCode::MissingPlusSampling: return "missing_plus_sampling";
        case ErrorCode::WindowMismatch: return "window_mismatch";
        case ErrorCode::OutOfRange: return "out_of_range";
        case ErrorCode::Config: return "config_error";
    }
    return "unknown";
}

}  // namespace kscope
