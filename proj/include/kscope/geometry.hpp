#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace kscope {

/// Largest supported space dimension. Pair enumeration keeps coordinate
/// differences in fixed-size stack buffers of this length.
inline constexpr int kMaxDim = 8;

/// Volume of the Euclidean unit ball in R^d.
double unit_ball_volume(int d);

enum class BodyShape { L1, L2, Linf };

/// O-symmetric convex body B = radius_scale * (unit l1/l2/linf ball).
/// Its gauge ||x||_B = inf{r > 0 : x in rB} is the p-norm divided by the scale.
class StructuringBody {
public:
    StructuringBody(int dim, BodyShape shape, double radius_scale = 1.0);

    int dim() const noexcept { return dim_; }
    BodyShape shape() const noexcept { return shape_; }
    double radius_scale() const noexcept { return scale_; }

    double gauge_norm(std::span<const double> x) const;
    double volume() const;
    /// Smallest kappa with B contained in kappa * B_e.
    double circumradius() const;

    bool operator==(const StructuringBody&) const = default;

    // Hot path for pair enumeration: no dimension check.
    double gauge_unchecked(const double* x) const noexcept;

private:
    int dim_;
    BodyShape shape_;
    double scale_;
};

enum class WindowShape { Box, Disk };

/// Convex compact sampling window: an axis-aligned box in any dimension or a
/// disk in the plane. Both admit an exact set covariance.
class ObservationWindow {
public:
    static ObservationWindow box(std::vector<double> lower, std::vector<double> upper);
    /// [0, side]^d
    static ObservationWindow cube(int dim, double side);
    static ObservationWindow disk(std::array<double, 2> center, double radius);

    int dim() const noexcept { return dim_; }
    WindowShape shape() const noexcept { return shape_; }

    // Box corners; for a disk these hold the bounding box.
    const std::vector<double>& lower() const noexcept { return lower_; }
    const std::vector<double>& upper() const noexcept { return upper_; }
    // Disk parameters; meaningless for a box.
    std::array<double, 2> center() const noexcept { return center_; }
    double radius() const noexcept { return radius_; }

    double volume() const;
    /// |W ∩ (W - y)|
    double set_covariance(std::span<const double> y) const;
    /// rho(W): radius of the largest Euclidean ball inside W.
    double inball_radius() const;
    /// |W ⊖ r B_e|
    double erosion_volume(double r) const;
    /// |W ⊕ r B_e| by the Steiner formula.
    double dilation_volume(double r) const;
    /// (d-1)-dimensional surface content of the boundary.
    double surface_area() const;

    /// Closed-set membership.
    bool contains(std::span<const double> x) const;
    bool contains_unchecked(const double* x) const noexcept;
    /// True when the whole window lies in `outer` (exact for box/disk pairs).
    bool is_inside(const ObservationWindow& outer) const;

    /// Smallest box containing W ⊕ (r B) for a structuring body B.
    ObservationWindow dilated_bounding_box(double r, const StructuringBody& body) const;

    ObservationWindow translated(std::span<const double> shift) const;
    ObservationWindow scaled(double factor) const;

    bool operator==(const ObservationWindow&) const = default;

    // Set-covariance hot path without dimension check.
    double set_covariance_unchecked(const double* y) const noexcept;

private:
    ObservationWindow() = default;

    int dim_ = 0;
    WindowShape shape_ = WindowShape::Box;
    std::vector<double> lower_;
    std::vector<double> upper_;
    std::array<double, 2> center_{};
    double radius_ = 0.0;
};

}  // namespace kscope
