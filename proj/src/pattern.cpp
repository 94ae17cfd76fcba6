#include "kscope/pattern.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "kscope/error.hpp"

namespace kscope {

namespace {

bool bitwise_equal(const double* a, const double* b, int d) {
    for (int k = 0; k < d; ++k) {
        if (std::bit_cast<std::uint64_t>(a[k]) != std::bit_cast<std::uint64_t>(b[k])) return false;
    }
    return true;
}

std::string format_point(const double* x, int d) {
    std::string s = "(";
    for (int k = 0; k < d; ++k) {
        if (k) s += ", ";
        s += std::to_string(x[k]);
    }
    return s + ")";
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// PointPattern

PointPattern::PointPattern(ObservationWindow window, std::vector<double> coords)
    : window_(std::move(window)), coords_(std::move(coords)) {
    const int d = window_.dim();
    require(coords_.size() % d == 0, ErrorCode::DimensionMismatch,
            "coordinate count is not a multiple of the window dimension");
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = coords_.data() + i * d;
        for (int k = 0; k < d; ++k) {
            require(std::isfinite(x[k]), ErrorCode::InvalidArgument,
                    "point " + std::to_string(i) + " has a non-finite coordinate");
        }
        require(window_.contains_unchecked(x), ErrorCode::OutsideWindow,
                "point " + std::to_string(i) + " " + format_point(x, d) + " lies outside the window");
    }
    // Duplicate check: lexicographic sort of indices, then compare neighbours.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double* xa = coords_.data() + a * d;
        const double* xb = coords_.data() + b * d;
        return std::lexicographical_compare(xa, xa + d, xb, xb + d);
    });
    for (std::size_t t = 1; t < n; ++t) {
        const double* xa = coords_.data() + order[t - 1] * d;
        const double* xb = coords_.data() + order[t] * d;
        if (bitwise_equal(xa, xb, d)) {
            fail(ErrorCode::DuplicatePoint, "points " + std::to_string(std::min(order[t - 1], order[t])) +
                                                " and " + std::to_string(std::max(order[t - 1], order[t])) +
                                                " coincide at " + format_point(xa, d));
        }
    }
}

PointPattern PointPattern::from_points(ObservationWindow window,
                                       const std::vector<std::vector<double>>& points) {
    std::vector<double> flat;
    flat.reserve(points.size() * window.dim());
    for (const auto& p : points) {
        require(static_cast<int>(p.size()) == window.dim(), ErrorCode::DimensionMismatch,
                "point dimension does not match window");
        flat.insert(flat.end(), p.begin(), p.end());
    }
    return PointPattern(std::move(window), std::move(flat));
}

PointPattern PointPattern::restricted_to(const ObservationWindow& sub) const {
    require(sub.dim() == dim(), ErrorCode::DimensionMismatch, "restriction window dimension differs");
    std::vector<double> kept;
    const int d = dim();
    for (std::size_t i = 0; i < size(); ++i) {
        const double* x = coords_.data() + i * d;
        if (sub.contains_unchecked(x)) kept.insert(kept.end(), x, x + d);
    }
    return PointPattern(sub, std::move(kept));
}

PointPattern PointPattern::translated(std::span<const double> shift) const {
    ObservationWindow w = window_.translated(shift);
    std::vector<double> c = coords_;
    const int d = dim();
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += shift[i % d];
    return PointPattern(std::move(w), std::move(c));
}

PointPattern PointPattern::scaled(double factor) const {
    ObservationWindow w = window_.scaled(factor);
    std::vector<double> c = coords_;
    for (double& x : c) x *= factor;
    return PointPattern(std::move(w), std::move(c));
}

// ---------------------------------------------------------------------------
// CSV

std::vector<std::string> csv_header(int dim) {
    if (dim <= 3) {
        static const char* names[] = {"x", "y", "z"};
        return {names, names + dim};
    }
    std::vector<std::string> h;
    for (int k = 1; k <= dim; ++k) h.push_back("x" + std::to_string(k));
    return h;
}

PointPattern read_pattern_csv(std::istream& in, const ObservationWindow& window) {
    const int d = window.dim();
    std::string line;
    std::size_t line_no = 0;
    // Header
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        have_header = true;
        break;
    }
    require(have_header, ErrorCode::Parse, "CSV is empty: missing header");
    {
        std::vector<std::string> cols;
        std::string_view rest = trim(line);
        if (rest.size() >= 3 && static_cast<unsigned char>(rest[0]) == 0xEF) rest.remove_prefix(3);  // BOM
        while (true) {
            const auto comma = rest.find(',');
            cols.emplace_back(trim(rest.substr(0, comma)));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        const auto expected = csv_header(d);
        require(cols == expected, ErrorCode::Parse,
                "CSV header does not match a " + std::to_string(d) + "-dimensional pattern");
    }

    std::vector<double> coords;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view rest = trim(line);
        if (rest.empty()) continue;
        for (int k = 0; k < d; ++k) {
            const auto comma = rest.find(',');
            require((k + 1 < d) == (comma != std::string_view::npos), ErrorCode::Parse,
                    "line " + std::to_string(line_no) + ": expected " + std::to_string(d) + " fields");
            const std::string_view field = trim(rest.substr(0, comma));
            double value = 0.0;
            const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
            require(ec == std::errc() && ptr == field.data() + field.size() && !field.empty(),
                    ErrorCode::Parse,
                    "line " + std::to_string(line_no) + ": cannot parse '" + std::string(field) + "'");
            coords.push_back(value);
            if (comma != std::string_view::npos) rest.remove_prefix(comma + 1);
        }
        const double* x = coords.data() + coords.size() - d;
        require(window.contains_unchecked(x), ErrorCode::OutsideWindow,
                "line " + std::to_string(line_no) + ": point " + format_point(x, d) +
                    " lies outside the window");
    }
    return PointPattern(window, std::move(coords));
}

void write_pattern_csv(const PointPattern& pattern, std::ostream& out) {
    const auto header = csv_header(pattern.dim());
    for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
    out << '\n';
    char buf[64];
    const int d = pattern.dim();
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        const auto x = pattern.point(i);
        for (int k = 0; k < d; ++k) {
            const auto res = std::to_chars(buf, buf + sizeof buf, x[k]);
            if (k) out << ',';
            out.write(buf, res.ptr - buf);
        }
        out << '\n';
    }
}

PointPattern load_pattern(const std::filesystem::path& path, const ObservationWindow& window) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
    return read_pattern_csv(in, window);
}

void save_pattern(const PointPattern& pattern, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
    write_pattern_csv(pattern, out);
    out.flush();
    require(static_cast<bool>(out), ErrorCode::Io, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// NeighborGrid

NeighborGrid::NeighborGrid(std::span<const double> coords, int dim, double min_cell) : dim_(dim) {
    require(min_cell > 0.0 && std::isfinite(min_cell), ErrorCode::InvalidArgument,
            "grid cell size must be positive");
    const std::size_t n = coords.size() / dim;
    std::vector<double> lo(dim, 0.0), hi(dim, 0.0);
    if (n > 0) {
        for (int k = 0; k < dim; ++k) lo[k] = hi[k] = coords[k];
        for (std::size_t i = 1; i < n; ++i) {
            for (int k = 0; k < dim; ++k) {
                lo[k] = std::min(lo[k], coords[i * dim + k]);
                hi[k] = std::max(hi[k], coords[i * dim + k]);
            }
        }
    }
    // Coarsen until the dense grid stays proportional to the point count.
    const double cap = std::max<double>(4096.0, 8.0 * static_cast<double>(n));
    double cell = min_cell;
    std::vector<std::size_t> extent(dim);
    while (true) {
        double total = 1.0;
        for (int k = 0; k < dim; ++k) {
            extent[k] = static_cast<std::size_t>(std::floor((hi[k] - lo[k]) / cell)) + 3;
            total *= static_cast<double>(extent[k]);
        }
        if (total <= cap) break;
        cell *= 2.0;
    }
    std::vector<std::size_t> stride(dim);
    std::size_t cells = 1;
    for (int k = 0; k < dim; ++k) {
        stride[k] = cells;
        cells *= extent[k];
    }

    point_cell_.resize(n);
    cell_start_.assign(cells + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t c = 0;
        for (int k = 0; k < dim; ++k) {
            auto idx = static_cast<std::size_t>(std::floor((coords[i * dim + k] - lo[k]) / cell)) + 1;
            idx = std::min(idx, extent[k] - 2);
            c += idx * stride[k];
        }
        point_cell_[i] = c;
        ++cell_start_[c + 1];
    }
    std::partial_sum(cell_start_.begin(), cell_start_.end(), cell_start_.begin());
    cell_points_.resize(n);
    std::vector<std::size_t> fill(cell_start_.begin(), cell_start_.end() - 1);
    for (std::size_t i = 0; i < n; ++i) cell_points_[fill[point_cell_[i]]++] = i;

    offsets_.assign(1, 0);
    for (int k = 0; k < dim; ++k) {
        std::vector<std::ptrdiff_t> next;
        next.reserve(offsets_.size() * 3);
        for (std::ptrdiff_t o : offsets_) {
            for (int step = -1; step <= 1; ++step) {
                next.push_back(o + step * static_cast<std::ptrdiff_t>(stride[k]));
            }
        }
        offsets_ = std::move(next);
    }
}

std::vector<PairRecord> pairs_within(const PointPattern& p, const StructuringBody& body,
                                     double r_max) {
    require(body.dim() == p.dim(), ErrorCode::DimensionMismatch,
            "structuring body and pattern dimensions differ");
    require(r_max > 0.0, ErrorCode::InvalidArgument, "r_max must be positive");
    std::vector<PairRecord> out;
    visit_pairs_within(p, body, r_max,
                       [&](std::size_t i, std::size_t j, std::span<const double> diff, double g) {
                           out.push_back({i, j, std::vector<double>(diff.begin(), diff.end()), g});
                       });
    return out;
}

}  // namespace kscope
