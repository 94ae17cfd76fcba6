#include "kscope/json_io.hpp"

#include <cctype>
#include <charconv>
#include <vector>

#include "kscope/error.hpp"

namespace kscope {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

double number(const json& j, const char* key) {
    require(j.is_object() && j.contains(key), ErrorCode::Config, std::string("missing field '") + key + "'");
    require(j.at(key).is_number(), ErrorCode::Config, std::string("field '") + key + "' must be a number");
    return j.at(key).get<double>();
}

std::string text(const json& j, const char* key) {
    require(j.is_object() && j.contains(key), ErrorCode::Config, std::string("missing field '") + key + "'");
    require(j.at(key).is_string(), ErrorCode::Config, std::string("field '") + key + "' must be a string");
    return j.at(key).get<std::string>();
}

std::vector<double> parse_numbers(std::string_view s, std::string_view what) {
    std::vector<double> out;
    while (true) {
        const auto comma = s.find(',');
        std::string_view field = s.substr(0, comma);
        while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
        while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        require(!field.empty() && ec == std::errc() && ptr == field.data() + field.size(), ErrorCode::Config,
                "cannot parse number '" + std::string(field) + "' in " + std::string(what));
        out.push_back(v);
        if (comma == std::string_view::npos) break;
        s.remove_prefix(comma + 1);
    }
    return out;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

}  // namespace

std::string_view to_string(BodyShape shape) {
    switch (shape) {
        case BodyShape::L1: return "l1";
        case BodyShape::L2: return "l2";
        case BodyShape::Linf: return "linf";
    }
    return "l2";
}

BodyShape parse_body_shape(std::string_view name) {
    const std::string s = lower(name);
    if (s == "l1" || s == "l1_ball") return BodyShape::L1;
    if (s == "l2" || s == "l2_ball") return BodyShape::L2;
    if (s == "linf" || s == "linf_ball") return BodyShape::Linf;
    fail(ErrorCode::Config, "unknown body shape '" + std::string(name) + "' (l1|l2|linf)");
}

json body_to_json(const StructuringBody& body) {
    return {{"shape", to_string(body.shape())}, {"dim", body.dim()}, {"radius_scale", body.radius_scale()}};
}

StructuringBody body_from_json(const json& j) {
    require(j.is_object(), ErrorCode::Config, "body must be a JSON object");
    const double dim = number(j, "dim");
    require(dim == static_cast<int>(dim), ErrorCode::Config, "body dim must be an integer");
    const double scale = j.contains("radius_scale") ? number(j, "radius_scale") : 1.0;
    try {
        return StructuringBody(static_cast<int>(dim), parse_body_shape(text(j, "shape")), scale);
    } catch (const Error& e) {
        fail(ErrorCode::Config, std::string("invalid body: ") + e.what());
    }
}

json window_to_json(const ObservationWindow& w) {
    if (w.shape() == WindowShape::Disk) {
        return {{"shape", "disk"}, {"dim", 2}, {"center", {w.center()[0], w.center()[1]}}, {"radius", w.radius()}};
    }
    json bounds = json::array();
    for (int k = 0; k < w.dim(); ++k) bounds.push_back({w.lower()[k], w.upper()[k]});
    return {{"shape", "box"}, {"dim", w.dim()}, {"bounds", bounds}};
}

ObservationWindow window_from_json(const json& j) {
    require(j.is_object(), ErrorCode::Config, "window must be a JSON object");
    const std::string shape = lower(text(j, "shape"));
    try {
        if (shape == "disk") {
            require(!j.contains("dim") || number(j, "dim") == 2.0, ErrorCode::Config, "disk windows are planar");
            const json& c = j.at("center");
            require(c.is_array() && c.size() == 2 && c[0].is_number() && c[1].is_number(), ErrorCode::Config,
                    "disk center must be [x, y]");
            return ObservationWindow::disk({c[0].get<double>(), c[1].get<double>()}, number(j, "radius"));
        }
        require(shape == "box", ErrorCode::Config, "window shape must be 'box' or 'disk'");
        require(j.contains("bounds") && j.at("bounds").is_array(), ErrorCode::Config,
                "box window needs 'bounds': [[lo, hi], ...]");
        std::vector<double> lo, hi;
        for (const json& axis : j.at("bounds")) {
            require(axis.is_array() && axis.size() == 2 && axis[0].is_number() && axis[1].is_number(),
                    ErrorCode::Config, "each box bound must be [lo, hi]");
            lo.push_back(axis[0].get<double>());
            hi.push_back(axis[1].get<double>());
        }
        if (j.contains("dim")) {
            require(number(j, "dim") == static_cast<double>(lo.size()), ErrorCode::Config,
                    "box dim does not match the number of bounds");
        }
        return ObservationWindow::box(std::move(lo), std::move(hi));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Config, std::string("invalid window: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Config) throw;
        fail(ErrorCode::Config, std::string("invalid window: ") + e.what());
    }
}

json model_to_json(const ModelSpec& model) {
    return std::visit(overloaded{
                          [](const PoissonModel& m) { return json{{"variant", "poisson"}, {"lambda", m.lambda}}; },
                          [](const ThomasModel& m) {
                              return json{{"variant", "thomas"}, {"kappa", m.kappa}, {"mu", m.mu}, {"sigma_c", m.sigma_c}};
                          },
                          [](const MaternClusterModel& m) {
                              return json{{"variant", "matern_cluster"}, {"kappa", m.kappa}, {"mu", m.mu}, {"r_c", m.r_c}};
                          },
                      },
                      model);
}

ModelSpec model_from_json(const json& j) {
    require(j.is_object(), ErrorCode::Config, "model must be a JSON object");
    const std::string variant = lower(text(j, "variant"));
    ModelSpec m;
    if (variant == "poisson") {
        m = PoissonModel{number(j, "lambda")};
    } else if (variant == "thomas") {
        m = ThomasModel{number(j, "kappa"), number(j, "mu"), number(j, "sigma_c")};
    } else if (variant == "matern_cluster" || variant == "matern") {
        m = MaternClusterModel{number(j, "kappa"), number(j, "mu"), number(j, "r_c")};
    } else {
        fail(ErrorCode::Config, "unknown model variant '" + variant + "' (poisson|thomas|matern_cluster)");
    }
    try {
        validate_model(m);
    } catch (const Error& e) {
        fail(ErrorCode::Config, e.what());
    }
    return m;
}

ObservationWindow parse_window_spec(std::string_view spec) {
    const auto colon = spec.find(':');
    require(colon != std::string_view::npos, ErrorCode::Config,
            "window spec must look like box:x0,y0,x1,y1 or disk:cx,cy,r");
    const std::string kind = lower(spec.substr(0, colon));
    const std::vector<double> v = parse_numbers(spec.substr(colon + 1), "window spec");
    try {
        if (kind == "disk") {
            require(v.size() == 3, ErrorCode::Config, "disk spec needs cx,cy,r");
            return ObservationWindow::disk({v[0], v[1]}, v[2]);
        }
        require(kind == "box", ErrorCode::Config, "window kind must be box or disk");
        require(v.size() >= 2 && v.size() % 2 == 0, ErrorCode::Config,
                "box spec needs the lower corner followed by the upper corner");
        const std::size_t d = v.size() / 2;
        return ObservationWindow::box(std::vector<double>(v.begin(), v.begin() + d),
                                      std::vector<double>(v.begin() + d, v.end()));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Config) throw;
        fail(ErrorCode::Config, std::string("invalid window: ") + e.what());
    }
}

StructuringBody parse_body_spec(std::string_view spec, int dim) {
    const auto colon = spec.find(':');
    const BodyShape shape = parse_body_shape(spec.substr(0, colon));
    double scale = 1.0;
    if (colon != std::string_view::npos) scale = parse_numbers(spec.substr(colon + 1), "ball spec").at(0);
    try {
        return StructuringBody(dim, shape, scale);
    } catch (const Error& e) {
        fail(ErrorCode::Config, std::string("invalid ball: ") + e.what());
    }
}

}  // namespace kscope
