#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls the library's numerical code paths.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

namespace oracle {

inline double ball_volume(int d) {
    return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

// 'p' in {1, 2, 0 = sup}.
inline double lp_norm(const double* x, int d, int p) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) {
        const double a = std::fabs(x[k]);
        if (p == 1) s += a;
        else if (p == 2) s += a * a;
        else s = std::max(s, a);
    }
    return p == 2 ? std::sqrt(s) : s;
}

inline double box_set_covariance(const std::vector<double>& lower, const std::vector<double>& upper,
                                 const double* y) {
    double v = 1.0;
    for (std::size_t k = 0; k < lower.size(); ++k) v *= std::max(0.0, upper[k] - lower[k] - std::fabs(y[k]));
    return v;
}

// Area of the lens of two discs of radius R whose centres are t apart.
inline double disk_set_covariance(double R, double t) {
    if (t >= 2.0 * R) return 0.0;
    return 2.0 * R * R * std::acos(t / (2.0 * R)) - 0.5 * t * std::sqrt(4.0 * R * R - t * t);
}

// Lens area by integrating chord lengths over x.
inline double disk_set_covariance_numeric(double R, double t, int steps = 20000) {
    if (t >= 2.0 * R) return 0.0;
    const double lo = t - R, hi = R;  // overlap of [-R, R] and [t - R, t + R]
    double s = 0.0;
    const double h = (hi - lo) / steps;
    for (int i = 0; i < steps; ++i) {
        const double x = lo + (i + 0.5) * h;
        const double a = std::sqrt(std::max(0.0, R * R - x * x));
        const double b = std::sqrt(std::max(0.0, R * R - (x - t) * (x - t)));
        s += 2.0 * std::min(a, b) * h;
    }
    return s;
}

// Steiner volume of a box dilated by a Euclidean ball, summed over faces.
inline double box_dilation_volume(const std::vector<double>& edges, double r) {
    const int d = static_cast<int>(edges.size());
    double v = 0.0;
    for (unsigned mask = 0; mask < (1u << d); ++mask) {
        int k = 0;
        double face = 1.0;
        for (int i = 0; i < d; ++i) {
            if (mask & (1u << i)) ++k;
            else face *= edges[i];
        }
        // Each k-subset of normal directions contributes 2^k orthants of a
        // k-ball; together they form one full k-ball.
        v += face * ball_volume(k) * std::pow(r, k);
    }
    return v;
}

struct Pair {
    std::size_t i, j;
    double radius;
};

// All ordered pairs i != j with gauge <= r_max.
inline std::vector<Pair> brute_pairs(const std::vector<double>& coords, int d, int p, double scale, double r_max) {
    const std::size_t n = coords.size() / d;
    std::vector<Pair> out;
    std::vector<double> diff(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            for (int k = 0; k < d; ++k) diff[k] = coords[j * d + k] - coords[i * d + k];
            const double g = lp_norm(diff.data(), d, p) / scale;
            if (g <= r_max) out.push_back({i, j, g});
        }
    }
    return out;
}

// Right-continuous step function built from (radius, weight) jumps.
class StepFunction {
public:
    explicit StepFunction(std::vector<std::pair<double, double>> jumps) : jumps_(std::move(jumps)) {
        std::sort(jumps_.begin(), jumps_.end());
        double c = 0.0;
        for (auto& [r, w] : jumps_) {
            c += w;
            w = c;
        }
    }
    double operator()(double r) const {
        auto it = std::upper_bound(jumps_.begin(), jumps_.end(), std::make_pair(r, double(INFINITY)));
        return it == jumps_.begin() ? 0.0 : std::prev(it)->second;
    }
    double left(double r) const {
        auto it = std::lower_bound(jumps_.begin(), jumps_.end(), std::make_pair(r, -double(INFINITY)));
        return it == jumps_.begin() ? 0.0 : std::prev(it)->second;
    }
    std::vector<double> radii() const {
        std::vector<double> out;
        for (const auto& j : jumps_) out.push_back(j.first);
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

private:
    std::vector<std::pair<double, double>> jumps_;
};

// (lambda^2 K)^ by direct summation. `weight(i, j, diff)` returns the pair
// weight or 0 to drop the pair.
inline StepFunction brute_k(const std::vector<double>& coords, int d, int p, double scale, double r_max,
                            const std::function<double(std::size_t, std::size_t, const double*)>& weight) {
    std::vector<std::pair<double, double>> jumps;
    std::vector<double> diff(d);
    for (const Pair& pr : brute_pairs(coords, d, p, scale, r_max)) {
        for (int k = 0; k < d; ++k) diff[k] = coords[pr.j * d + k] - coords[pr.i * d + k];
        const double w = weight(pr.i, pr.j, diff.data());
        if (w != 0.0) jumps.emplace_back(pr.radius, w);
    }
    return StepFunction(std::move(jumps));
}

// sigma^2 estimate by direct summation over ordered pairs.
inline double brute_sigma2(const std::vector<double>& coords, int d, double volume, double h, bool triangular,
                           const std::function<double(const double*)>& set_cov) {
    const std::size_t n = coords.size() / d;
    double s = 0.0;
    std::vector<double> diff(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            for (int k = 0; k < d; ++k) diff[k] = coords[j * d + k] - coords[i * d + k];
            const double u = lp_norm(diff.data(), d, 2) / h;
            if (u > 1.0) continue;
            s += (triangular ? 1.0 - u : 1.0) / set_cov(diff.data());
        }
    }
    const double nn = static_cast<double>(n);
    const double integral = triangular ? ball_volume(d) / (d + 1) : ball_volume(d);
    return nn / volume + s - nn * (nn - 1.0) / (volume * volume) * std::pow(h, d) * integral;
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double eps,
                               int depth = 40) {
    struct Rec {
        const std::function<double(double)>& f;
        double go(double a, double b, double fa, double fm, double fb, double whole, double eps, int depth) {
            const double m = 0.5 * (a + b), lm = 0.5 * (a + m), rm = 0.5 * (m + b);
            const double flm = f(lm), frm = f(rm);
            const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if (depth <= 0 || std::fabs(left + right - whole) <= 15.0 * eps)
                return left + right + (left + right - whole) / 15.0;
            return go(a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) + go(m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
        }
    } rec{f};
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return rec.go(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), eps, depth);
}

// int_0^R g(r)^2 V'(r) dr where g is smooth between the given breakpoints.
inline double piecewise_integral(const std::function<double(double)>& integrand, std::vector<double> breaks, double R,
                                 double eps = 1e-12) {
    breaks.push_back(0.0);
    breaks.push_back(R);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double a = breaks[i], b = breaks[i + 1];
        if (b <= a || a >= R) continue;
        // Evaluate strictly inside to avoid the jump at the left end.
        const double pad = (b - a) * 1e-12;
        s += adaptive_simpson(integrand, a + pad, b - pad, eps);
    }
    return s;
}

// sup over [0, R] of |f| for a function that is smooth between breakpoints
// and right-continuous at them; `f_left` gives left limits.
inline double dense_supremum(const std::function<double(double)>& f, const std::function<double(double)>& f_left,
                             const std::vector<double>& breaks, double R, int grid = 100000) {
    double best = 0.0;
    for (int i = 0; i <= grid; ++i) best = std::max(best, std::fabs(f(R * i / grid)));
    for (double b : breaks) {
        if (b > R) continue;
        best = std::max({best, std::fabs(f(b)), std::fabs(f_left(b))});
    }
    best = std::max(best, std::fabs(f_left(R)));
    return best;
}

// P(|X - Y| <= r) for X, Y independent uniform in a disc of radius Rc,
// integrating the lens area over the distance density.
inline double disk_distance_cdf(double Rc, double r, int steps = 20000) {
    const double rr = std::min(r, 2.0 * Rc);
    const double area = std::numbers::pi * Rc * Rc;
    double s = 0.0;
    const double h = rr / steps;
    for (int i = 0; i < steps; ++i) {
        const double t = (i + 0.5) * h;
        s += 2.0 * std::numbers::pi * t * disk_set_covariance(Rc, t) * h;
    }
    return s / (area * area);
}

}  // namespace oracle
