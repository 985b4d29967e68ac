#pragma once

// JSON forms of reference sets, scenes and metrics.

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "msr/dataset_io.hpp"
#include "msr/metrics.hpp"
#include "msr/rectifier.hpp"
#include "msr/synthetic.hpp"

namespace msr {

namespace detail {

inline Vec3 vec3_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw FormatError(std::string(what) + ": expected a 3-element array");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw FormatError(std::string(what) + ": components must be numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

inline nlohmann::json vec3_to_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

template <typename F>
auto json_guard(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string(what) + ": " + e.what());
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ReferenceSet: {"directions": [[x,y,z], ...], "delta": d, "seed": s}

inline nlohmann::json to_json(const ReferenceSet& refs) {
  nlohmann::json dirs = nlohmann::json::array();
  for (const auto& r : refs.directions()) dirs.push_back(detail::vec3_to_json(r.vec()));
  return nlohmann::json{{"directions", dirs}, {"delta", refs.delta()}, {"seed", refs.seed()}};
}

inline ReferenceSet reference_set_from_json(const nlohmann::json& j) {
  return detail::json_guard("refs", [&] {
    std::vector<UnitVector3> dirs;
    for (const auto& d : j.at("directions")) dirs.push_back(detail::gravity_from_json(d));
    const double delta = j.contains("delta") ? j["delta"].get<double>() : 0.0;
    const std::uint64_t seed = j.contains("seed") ? j["seed"].get<std::uint64_t>() : 0;
    return ReferenceSet(std::move(dirs), delta, seed);
  });
}

// ---------------------------------------------------------------------------
// Scene

inline nlohmann::json to_json(const Scene& s) {
  nlohmann::json prims = nlohmann::json::array();
  for (const auto& p : s.primitives) {
    nlohmann::json jp;
    if (const auto* plane = std::get_if<PlanePrimitive>(&p.shape)) {
      jp["type"] = "plane";
      jp["point"] = detail::vec3_to_json(plane->point);
      jp["normal"] = detail::vec3_to_json(plane->normal.vec());
      jp["extent"] = plane->extent;
    } else {
      const auto& box = std::get<BoxPrimitive>(p.shape);
      jp["type"] = "box";
      jp["min"] = detail::vec3_to_json(box.min);
      jp["max"] = detail::vec3_to_json(box.max);
    }
    jp["checker_period"] = p.checker_period;
    jp["tint"] = p.tint;
    prims.push_back(std::move(jp));
  }
  return nlohmann::json{{"gravity_world", detail::vec3_to_json(s.gravity_world.vec())}, {"primitives", prims}};
}

inline Scene scene_from_json(const nlohmann::json& j) {
  Scene s = detail::json_guard("scene", [&] {
    Scene out;
    if (j.contains("gravity_world")) out.gravity_world = detail::gravity_from_json(j["gravity_world"]);
    for (const auto& jp : j.at("primitives")) {
      Primitive p;
      const std::string type = jp.at("type").get<std::string>();
      if (type == "plane") {
        const Vec3 n = detail::vec3_from_json(jp.at("normal"), "plane normal");
        if (!(n.norm() > kEpsilon)) throw FormatError("scene: zero plane normal");
        p.shape = PlanePrimitive{detail::vec3_from_json(jp.at("point"), "plane point"), UnitVector3(n),
                                 jp.at("extent").get<double>()};
      } else if (type == "box") {
        p.shape = BoxPrimitive{detail::vec3_from_json(jp.at("min"), "box min"), detail::vec3_from_json(jp.at("max"), "box max")};
      } else {
        throw FormatError("scene: unknown primitive type '" + type + "'");
      }
      if (jp.contains("checker_period")) p.checker_period = jp["checker_period"].get<double>();
      if (jp.contains("tint")) p.tint = jp["tint"].get<std::array<double, 3>>();
      out.primitives.push_back(std::move(p));
    }
    return out;
  });
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Metrics, flat objects

inline nlohmann::json to_json(const DepthMetrics& m) {
  return nlohmann::json{{"abs_rel", m.abs_rel}, {"sq_rel", m.sq_rel}, {"log_rmse", m.log_rmse}, {"rmse", m.rmse},
                        {"delta1", m.delta1},   {"delta2", m.delta2}, {"delta3", m.delta3},     {"count", m.count}};
}

inline nlohmann::json to_json(const NormalMetrics& m) {
  return nlohmann::json{{"mean_deg", m.mean_deg}, {"median_deg", m.median_deg}, {"rmse_deg", m.rmse_deg},
                        {"pct5", m.pct5},         {"pct75", m.pct75},           {"pct1125", m.pct1125},
                        {"count", m.count}};
}

}  // namespace msr
