#include "kscope/estimate.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "kscope/detail/compensated_sum.hpp"
#include "kscope/error.hpp"

namespace kscope {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

struct Contribution {
    double radius;
    double weight;
    int count;  // ordered pairs represented
};

KEstimate assemble(std::vector<Contribution>& contrib, const StructuringBody& body, double r_max,
                   EstimatorKind kind, double volume) {
    std::sort(contrib.begin(), contrib.end(), [](const Contribution& a, const Contribution& b) {
        if (a.radius != b.radius) return a.radius < b.radius;
        return a.weight < b.weight;
    });
    KEstimate k{body, {}, {}, {}, r_max, kind, volume};
    detail::CompensatedSum acc;
    for (const Contribution& c : contrib) {
        if (c.count == 0) continue;
        for (int t = 0; t < c.count; ++t) acc.add(c.weight);
        if (!k.jump_radii.empty() && k.jump_radii.back() == c.radius) {
            k.cumulative_values.back() = acc.value();
            k.jump_multiplicity.back() += static_cast<std::size_t>(c.count);
        } else {
            k.jump_radii.push_back(c.radius);
            k.cumulative_values.push_back(acc.value());
            k.jump_multiplicity.push_back(static_cast<std::size_t>(c.count));
        }
    }
    return k;
}

}  // namespace

std::string_view to_string(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::HT: return "ht";
        case EstimatorKind::Naive: return "naive";
        case EstimatorKind::Border: return "border";
    }
    return "ht";
}

EstimatorKind parse_estimator_kind(std::string_view name) {
    const std::string s = lower(name);
    if (s == "ht") return EstimatorKind::HT;
    if (s == "naive") return EstimatorKind::Naive;
    if (s == "border") return EstimatorKind::Border;
    fail(ErrorCode::InvalidArgument, "unknown estimator '" + std::string(name) + "' (ht|naive|border)");
}

double KEstimate::eval(double r) const {
    require(r >= 0.0 && r <= r_max, ErrorCode::OutOfRange,
            "radius " + std::to_string(r) + " outside [0, " + std::to_string(r_max) + "]");
    const auto it = std::upper_bound(jump_radii.begin(), jump_radii.end(), r);
    if (it == jump_radii.begin()) return 0.0;
    return cumulative_values[static_cast<std::size_t>(it - jump_radii.begin()) - 1];
}

double KEstimate::left_limit(double r) const {
    require(r >= 0.0 && r <= r_max, ErrorCode::OutOfRange,
            "radius " + std::to_string(r) + " outside [0, " + std::to_string(r_max) + "]");
    const auto it = std::lower_bound(jump_radii.begin(), jump_radii.end(), r);
    if (it == jump_radii.begin()) return 0.0;
    return cumulative_values[static_cast<std::size_t>(it - jump_radii.begin()) - 1];
}

std::size_t KEstimate::pair_count() const {
    std::size_t n = 0;
    for (std::size_t m : jump_multiplicity) n += m;
    return n;
}

double eval_k(const KEstimate& k, double r) { return k.eval(r); }

KEstimate k_hat(const PointPattern& pattern, const StructuringBody& body, double r_max,
                EstimatorKind kind, const std::optional<ObservationWindow>& estimation_window) {
    require(body.dim() == pattern.dim(), ErrorCode::DimensionMismatch,
            "structuring body and pattern dimensions differ");
    require(std::isfinite(r_max) && r_max > 0.0, ErrorCode::InvalidArgument,
            "r_max must be positive");
    const ObservationWindow& W = estimation_window ? *estimation_window : pattern.window();
    require(W.dim() == pattern.dim(), ErrorCode::DimensionMismatch,
            "estimation window dimension differs from pattern");
    const double reach = r_max * body.circumradius();
    require(reach < W.inball_radius(), ErrorCode::GuardViolation,
            "r_max * circumradius(B) = " + std::to_string(reach) +
                " must be below the window inball radius " + std::to_string(W.inball_radius()));
    const double volume = W.volume();
    std::vector<Contribution> contrib;

    if (kind == EstimatorKind::Naive) {
        require(W.dilated_bounding_box(r_max, body).is_inside(pattern.window()),
                ErrorCode::MissingPlusSampling,
                "naive estimator needs a pattern observed on the estimation window dilated by "
                "r_max * B (plus sampling)");
        const double w = 1.0 / volume;
        const int d = pattern.dim();
        const double* xs = pattern.coords().data();
        visit_unordered_pairs_within(pattern, body, r_max,
                                     [&](std::size_t i, std::size_t j, std::span<const double>, double g) {
                                         const int c = int(W.contains_unchecked(xs + i * d)) +
                                                       int(W.contains_unchecked(xs + j * d));
                                         if (c) contrib.push_back({g, w, c});
                                     });
        return assemble(contrib, body, r_max, kind, volume);
    }

    const bool same_window = !estimation_window || *estimation_window == pattern.window();
    const PointPattern inside = same_window ? pattern : pattern.restricted_to(W);
    if (kind == EstimatorKind::HT) {
        visit_unordered_pairs_within(inside, body, r_max,
                                     [&](std::size_t, std::size_t, std::span<const double> diff, double g) {
                                         contrib.push_back({g, 1.0 / W.set_covariance_unchecked(diff.data()), 2});
                                     });
    } else {
        const double w = 1.0 / volume;
        visit_unordered_pairs_within(inside, body, r_max,
                                     [&](std::size_t, std::size_t, std::span<const double>, double g) {
                                         contrib.push_back({g, w, 2});
                                     });
    }
    return assemble(contrib, body, r_max, kind, volume);
}

void write_k_csv(const KEstimate& k, std::ostream& out) {
    char buf[64];
    auto put = [&](double r, double v) {
        auto res = std::to_chars(buf, buf + sizeof buf, r);
        out.write(buf, res.ptr - buf);
        out << ',';
        res = std::to_chars(buf, buf + sizeof buf, v);
        out.write(buf, res.ptr - buf);
        out << '\n';
    };
    out << "r,value\n";
    put(0.0, 0.0);
    for (std::size_t i = 0; i < k.jump_radii.size(); ++i) put(k.jump_radii[i], k.cumulative_values[i]);
    put(k.r_max, k.cumulative_values.empty() ? 0.0 : k.cumulative_values.back());
}

double lambda_hat(const PointPattern& pattern) {
    return static_cast<double>(pattern.size()) / pattern.window().volume();
}

double lambda2_hat(const PointPattern& pattern) {
    const double n = static_cast<double>(pattern.size());
    if (n <= 1.0) return 0.0;
    const double v = pattern.window().volume();
    return n * (n - 1.0) / (v * v);
}

std::string_view to_string(Kernel kernel) {
    return kernel == Kernel::Indicator ? "indicator" : "triangular";
}

Kernel parse_kernel(std::string_view name) {
    const std::string s = lower(name);
    if (s == "indicator") return Kernel::Indicator;
    if (s == "triangular") return Kernel::Triangular;
    fail(ErrorCode::InvalidArgument, "unknown kernel '" + std::string(name) + "' (indicator|triangular)");
}

double kernel_integral(Kernel kernel, int dim) {
    const double ball = unit_ball_volume(dim);
    return kernel == Kernel::Indicator ? ball : ball / (dim + 1.0);
}

double default_bandwidth(const ObservationWindow& window) {
    const double c = std::pow(window.volume(), 1.0 / window.dim());
    return std::pow(c, -0.75);
}

double sigma2_hat(const PointPattern& pattern, Kernel kernel, double bandwidth) {
    const ObservationWindow& W = pattern.window();
    const int d = pattern.dim();
    const double b = bandwidth > 0.0 ? bandwidth : default_bandwidth(W);
    const double h = b * std::pow(W.volume(), 1.0 / d);
    require(h < W.inball_radius(), ErrorCode::GuardViolation,
            "kernel support b*c = " + std::to_string(h) + " must be below the window inball radius " +
                std::to_string(W.inball_radius()));
    const StructuringBody euclid(d, BodyShape::L2, 1.0);
    detail::CompensatedSum pairs;
    visit_unordered_pairs_within(pattern, euclid, h,
                                 [&](std::size_t, std::size_t, std::span<const double> diff, double e) {
                                     const double w = kernel == Kernel::Indicator ? 1.0 : 1.0 - e / h;
                                     pairs.add(2.0 * w / W.set_covariance_unchecked(diff.data()));
                                 });
    return lambda_hat(pattern) + pairs.value() -
           lambda2_hat(pattern) * std::pow(h, d) * kernel_integral(kernel, d);
}

SampleSummary summarize(const PointPattern& pattern, Kernel kernel, double bandwidth) {
    SampleSummary s;
    s.n = pattern.size();
    s.volume = pattern.window().volume();
    s.lambda = lambda_hat(pattern);
    s.lambda2 = lambda2_hat(pattern);
    s.bandwidth = bandwidth > 0.0 ? bandwidth : default_bandwidth(pattern.window());
    s.sigma2 = sigma2_hat(pattern, kernel, s.bandwidth);
    return s;
}

// ---------------------------------------------------------------------------
// NullK

NullK NullK::poisson(const StructuringBody& body) {
    NullK k;
    k.kind_ = Kind::PowerLaw;
    k.coef_ = body.volume();
    k.exponent_ = body.dim();
    return k;
}

NullK NullK::from_model(const ModelSpec& model, const StructuringBody& body) {
    validate_model(model);
    if (std::holds_alternative<PoissonModel>(model)) return poisson(body);
    (void)theoretical_k(model, body, 0.0);  // rejects unsupported bodies
    NullK k;
    k.kind_ = Kind::Model;
    k.model_ = model;
    k.body_ = body;
    return k;
}

NullK NullK::tabulated(std::vector<double> radii, std::vector<double> values) {
    require(radii.size() == values.size() && !radii.empty(), ErrorCode::InvalidArgument,
            "null K table needs matching, non-empty radius and value columns");
    for (std::size_t i = 0; i < radii.size(); ++i) {
        require(std::isfinite(radii[i]) && std::isfinite(values[i]) && radii[i] >= 0.0 && values[i] >= 0.0,
                ErrorCode::InvalidArgument, "null K table entries must be finite and nonnegative");
        if (i > 0) {
            require(radii[i] > radii[i - 1], ErrorCode::InvalidArgument,
                    "null K radii must be strictly increasing");
            require(values[i] >= values[i - 1], ErrorCode::InvalidArgument,
                    "null K values must be non-decreasing");
        }
    }
    if (radii.front() > 0.0) {
        radii.insert(radii.begin(), 0.0);
        values.insert(values.begin(), 0.0);
    }
    require(values.front() == 0.0, ErrorCode::InvalidArgument, "null K must vanish at r = 0");
    NullK k;
    k.kind_ = Kind::Tabulated;
    k.radii_ = std::move(radii);
    k.values_ = std::move(values);
    return k;
}

NullK NullK::load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path);
    std::vector<double> r, v;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        double a = 0.0, b = 0.0;
        bool ok = comma != std::string::npos;
        if (ok) {
            const char* s = line.data();
            auto r1 = std::from_chars(s, s + comma, a);
            auto r2 = std::from_chars(s + comma + 1, s + line.size(), b);
            ok = r1.ec == std::errc() && r1.ptr == s + comma && r2.ec == std::errc() &&
                 r2.ptr == s + line.size();
        }
        if (!ok) {
            require(first, ErrorCode::Parse,
                    path + ":" + std::to_string(line_no) + ": expected 'r,K' numeric row");
            first = false;  // header line
            continue;
        }
        first = false;
        r.push_back(a);
        v.push_back(b);
    }
    return tabulated(std::move(r), std::move(v));
}

double NullK::operator()(double r) const {
    require(r >= 0.0, ErrorCode::InvalidArgument, "null K evaluated at negative radius");
    switch (kind_) {
        case Kind::PowerLaw: return coef_ * std::pow(r, exponent_);
        case Kind::Model: return theoretical_k(*model_, *body_, r);
        case Kind::Tabulated: {
            require(r <= radii_.back(), ErrorCode::OutOfRange,
                    "null K table ends at r = " + std::to_string(radii_.back()) +
                        ", needed at r = " + std::to_string(r));
            const auto it = std::upper_bound(radii_.begin(), radii_.end(), r);
            const std::size_t hi = static_cast<std::size_t>(it - radii_.begin());
            if (hi >= radii_.size()) return values_.back();
            const std::size_t lo = hi - 1;
            const double t = (r - radii_[lo]) / (radii_[hi] - radii_[lo]);
            return values_[lo] + t * (values_[hi] - values_[lo]);
        }
    }
    return 0.0;
}

double NullK::domain_end() const noexcept {
    return kind_ == Kind::Tabulated ? radii_.back() : std::numeric_limits<double>::infinity();
}

std::string NullK::describe() const {
    switch (kind_) {
        case Kind::PowerLaw: {
            std::ostringstream s;
            s.precision(17);
            s << "poisson: " << coef_ << " * r^" << exponent_;
            return s.str();
        }
        case Kind::Model: return "model: " + model_name(*model_);
        case Kind::Tabulated: return "table: " + std::to_string(radii_.size()) + " knots";
    }
    return "";
}

// ---------------------------------------------------------------------------
// ScaledDelta

void check_alpha(double alpha) {
    require(std::isfinite(alpha) && alpha > 0.0 && alpha <= 0.5, ErrorCode::UnsupportedAlpha,
            "alpha must lie in (0, 1/2], got " + std::to_string(alpha));
}

ScaledDelta::ScaledDelta(KEstimate k, double alpha, double R, double lambda0, NullK null_k)
    : k_(std::move(k)), alpha_(alpha), R_(R), lambda0_(lambda0), null_k_(std::move(null_k)) {
    const int d = k_.body.dim();
    const double c = std::pow(k_.window_volume, 1.0 / d);
    scale_ = std::pow(c, alpha_);
    norm_ = std::pow(k_.window_volume, 0.5 - alpha_);
    require(scale_ * R_ <= k_.r_max, ErrorCode::OutOfRange,
            "K estimate does not reach the scaled radius c^alpha R");
}

double ScaledDelta::null_term(double r) const {
    return norm_ * lambda0_ * lambda0_ * null_k_(scale_ * r);
}

double ScaledDelta::empirical_term(double r) const {
    require(r >= 0.0 && r <= R_, ErrorCode::OutOfRange, "Delta evaluated outside [0, R]");
    return norm_ * k_.eval(scale_ * r);
}

double ScaledDelta::eval(double r) const { return empirical_term(r) - null_term(r); }

double ScaledDelta::eval_left(double r) const {
    require(r >= 0.0 && r <= R_, ErrorCode::OutOfRange, "Delta evaluated outside [0, R]");
    return norm_ * k_.left_limit(scale_ * r) - null_term(r);
}

std::vector<double> ScaledDelta::jump_points() const {
    std::vector<double> t;
    const double limit = scale_ * R_;
    for (double jr : k_.jump_radii) {
        if (jr > limit) break;
        t.push_back(std::min(jr / scale_, R_));
    }
    return t;
}

std::vector<ScaledDelta::Piece> ScaledDelta::pieces() const {
    std::vector<Piece> out;
    const double limit = scale_ * R_;
    double lo = 0.0;
    double level = 0.0;
    for (std::size_t i = 0; i < k_.jump_radii.size() && k_.jump_radii[i] <= limit; ++i) {
        const double t = std::min(k_.jump_radii[i] / scale_, R_);
        out.push_back({lo, t, level});
        lo = t;
        level = norm_ * k_.cumulative_values[i];
    }
    out.push_back({lo, R_, level});
    return out;
}

ScaledDelta scaled_delta(const PointPattern& pattern, const StructuringBody& body, double lambda0,
                         const NullK& null_k, double alpha, double R, EstimatorKind kind,
                         const std::optional<ObservationWindow>& estimation_window) {
    check_alpha(alpha);
    require(std::isfinite(R) && R > 0.0, ErrorCode::InvalidArgument, "R must be positive");
    require(std::isfinite(lambda0) && lambda0 > 0.0, ErrorCode::InvalidArgument,
            "null intensity must be positive");
    const ObservationWindow& W = estimation_window ? *estimation_window : pattern.window();
    const double c = std::pow(W.volume(), 1.0 / W.dim());
    const double scaled_r = std::pow(c, alpha) * R;
    const double reach = scaled_r * body.circumradius();
    require(reach <= 0.5 * W.inball_radius(), ErrorCode::GuardViolation,
            "c^alpha * R * circumradius(B) = " + std::to_string(reach) +
                " exceeds half the window inball radius " + std::to_string(0.5 * W.inball_radius()));
    return ScaledDelta(k_hat(pattern, body, scaled_r, kind, estimation_window), alpha, R, lambda0,
                       null_k);
}

}  // namespace kscope
