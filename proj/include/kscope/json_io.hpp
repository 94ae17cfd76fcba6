#pragma once

#include <string>
#include <string_view>

#include "json.hpp"
#include "kscope/geometry.hpp"
#include "kscope/simulate.hpp"

namespace kscope {

// JSON forms:
//   body   {"shape": "l1"|"l2"|"linf", "dim": d, "radius_scale": s}
//   window {"shape": "box", "dim": d, "bounds": [[lo, hi], ...]}
//          {"shape": "disk", "dim": 2, "center": [x, y], "radius": r}
//   model  {"variant": "poisson", "lambda": ...}
//          {"variant": "thomas", "kappa": ..., "mu": ..., "sigma_c": ...}
//          {"variant": "matern_cluster", "kappa": ..., "mu": ..., "r_c": ...}
// Parsers throw Error(Config) on schema violations.

nlohmann::json body_to_json(const StructuringBody& body);
StructuringBody body_from_json(const nlohmann::json& j);
nlohmann::json window_to_json(const ObservationWindow& window);
ObservationWindow window_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const ModelSpec& model);
ModelSpec model_from_json(const nlohmann::json& j);

std::string_view to_string(BodyShape shape);
BodyShape parse_body_shape(std::string_view name);

/// "box:x0,y0,x1,y1" (lower corner then upper corner, any dimension) or
/// "disk:cx,cy,r".
ObservationWindow parse_window_spec(std::string_view spec);
/// "l1|l2|linf[:scale]" in dimension `dim`.
StructuringBody parse_body_spec(std::string_view spec, int dim);

}  // namespace kscope
