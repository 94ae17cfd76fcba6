#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "kscope/geometry.hpp"

namespace kscope {

/// Immutable simple point pattern observed in a closed window.
/// Coordinates are stored row-major: point i occupies [i*d, (i+1)*d).
class PointPattern {
public:
    /// Validates that every point lies in the window and that no two points
    /// coincide bitwise. Throws Error(OutsideWindow | DuplicatePoint).
    PointPattern(ObservationWindow window, std::vector<double> coords);

    static PointPattern from_points(ObservationWindow window,
                                    const std::vector<std::vector<double>>& points);

    int dim() const noexcept { return window_.dim(); }
    std::size_t size() const noexcept { return coords_.size() / window_.dim(); }
    bool empty() const noexcept { return coords_.empty(); }
    const ObservationWindow& window() const noexcept { return window_; }
    const std::vector<double>& coords() const noexcept { return coords_; }
    std::span<const double> point(std::size_t i) const {
        return {coords_.data() + i * dim(), static_cast<std::size_t>(dim())};
    }

    /// Points inside `sub` with `sub` as the new window.
    PointPattern restricted_to(const ObservationWindow& sub) const;
    PointPattern translated(std::span<const double> shift) const;
    PointPattern scaled(double factor) const;

private:
    ObservationWindow window_;
    std::vector<double> coords_;
};

PointPattern read_pattern_csv(std::istream& in, const ObservationWindow& window);
void write_pattern_csv(const PointPattern& pattern, std::ostream& out);
PointPattern load_pattern(const std::filesystem::path& path, const ObservationWindow& window);
void save_pattern(const PointPattern& pattern, const std::filesystem::path& path);

/// Column names used in the CSV header for dimension d: x,y,z for d <= 3,
/// x1..xd beyond.
std::vector<std::string> csv_header(int dim);

struct PairRecord {
    std::size_t index_i;
    std::size_t index_j;
    std::vector<double> difference;  // X_j - X_i
    double gauge_radius;             // ||X_j - X_i||_B
};

/// Uniform bucket grid over a coordinate set. Cells are at least `min_cell`
/// wide along every axis, so every pair closer than min_cell in sup-norm lies
/// in neighbouring cells. One empty layer pads each side so neighbour offsets
/// never leave the array.
class NeighborGrid {
public:
    NeighborGrid(std::span<const double> coords, int dim, double min_cell);

    int dim() const noexcept { return dim_; }
    std::size_t cell_count() const noexcept { return cell_start_.size() - 1; }
    std::size_t cell_of_point(std::size_t i) const noexcept { return point_cell_[i]; }
    std::span<const std::size_t> cell_points(std::size_t cell) const noexcept {
        return {cell_points_.data() + cell_start_[cell], cell_start_[cell + 1] - cell_start_[cell]};
    }
    const std::vector<std::ptrdiff_t>& neighbor_offsets() const noexcept { return offsets_; }

private:
    int dim_;
    std::vector<std::size_t> cell_start_;
    std::vector<std::size_t> cell_points_;
    std::vector<std::size_t> point_cell_;
    std::vector<std::ptrdiff_t> offsets_;
};

/// Calls f(i, j, diff, gauge) for every unordered pair {i, j}, i < j, with
/// ||X_j - X_i||_B <= r_max (closed ball). `diff` is X_j - X_i.
template <class F>
void visit_unordered_pairs_within(const PointPattern& p, const StructuringBody& body, double r_max,
                                  F&& f) {
    const int d = p.dim();
    if (p.size() < 2) return;
    const NeighborGrid grid(p.coords(), d, r_max * body.circumradius());
    const double* xs = p.coords().data();
    std::array<double, kMaxDim> diff{};
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double* xi = xs + i * d;
        const std::size_t home = grid.cell_of_point(i);
        for (std::ptrdiff_t off : grid.neighbor_offsets()) {
            for (std::size_t j : grid.cell_points(static_cast<std::size_t>(home + off))) {
                if (j <= i) continue;
                const double* xj = xs + j * d;
                for (int k = 0; k < d; ++k) diff[k] = xj[k] - xi[k];
                const double g = body.gauge_unchecked(diff.data());
                if (g <= r_max) f(i, j, std::span<const double>(diff.data(), d), g);
            }
        }
    }
}

/// Ordered-pair version: every (i, j), i != j, within r_max is reported once.
template <class F>
void visit_pairs_within(const PointPattern& p, const StructuringBody& body, double r_max, F&& f) {
    const int d = p.dim();
    std::array<double, kMaxDim> neg{};
    visit_unordered_pairs_within(
        p, body, r_max,
        [&](std::size_t i, std::size_t j, std::span<const double> diff, double g) {
            f(i, j, diff, g);
            for (int k = 0; k < d; ++k) neg[k] = -diff[k];
            f(j, i, std::span<const double>(neg.data(), d), g);
        });
}

/// Materialized stream of ordered pairs (order unspecified).
std::vector<PairRecord> pairs_within(const PointPattern& p, const StructuringBody& body,
                                     double r_max);

}  // namespace kscope
