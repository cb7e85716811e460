#include "cvx/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cvx/errors.hpp"

namespace cvx {

using nlohmann::json;

void validate(const RunConfig& c) {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("config key '" + key + "': " + why);
  };
  if (!(c.R > 0)) fail("R", "must be positive");
  if (c.Z_h < 5) fail("Z_h", "must be at least 5");
  if (!(c.a > 0)) fail("a", "must be positive");
  if (!(c.d > c.R)) fail("d", "source line must lie outside the cube (d > R)");
  if (c.ell < 2) fail("ell", "need at least two sources");
  if (c.interp == Interpolation::CubicSpline && c.ell < 4) fail("ell", "cubic spline needs >= 4 sources");
  if (c.Q < 2 * c.N + 4) fail("Q", "need Q >= 2N + 4");
  if (!(c.k >= 0)) fail("k", "must be non-negative");
  if (c.quasi_reversibility) {
    if (c.lambda != 0.0) fail("lambda", "must be 0 with quasi_reversibility");
  } else if (!(c.lambda > 0)) {
    fail("lambda", "must be positive");
  }
  if (!(c.gamma > 0 && c.gamma < 1)) fail("gamma", "must lie in (0, 1)");
  if (!(c.weight_shift() > c.R)) fail("r", "must exceed R");
  if (c.K0 < 0 || c.K1 < 0 || c.K2 < 0) fail("K0/K1/K2", "penalty weights must be non-negative");
  if (c.N < 1) fail("N", "must be at least 1");
  if (!(c.noise >= 0 && c.noise < 1)) fail("noise", "must lie in [0, 1)");
  if (!(c.eta1 > 0)) fail("eta1", "must be positive");
  if (!(c.eta_factor > 0 && c.eta_factor < 1)) fail("eta_factor", "must lie in (0, 1)");
  if (c.max_iter < 1) fail("max_iter", "must be positive");
  if (c.forward_refine < 1) fail("forward_refine", "must be >= 1");
  if (!(c.gmres_tol > 0)) fail("gmres_tol", "must be positive");
  if (c.gmres_restart < 1) fail("gmres_restart", "must be positive");
}

namespace {

const char* cache_name(TensorCache c) {
  switch (c) {
    case TensorCache::On: return "on";
    case TensorCache::Off: return "off";
    default: return "auto";
  }
}

TensorCache cache_from(const std::string& s) {
  if (s == "on") return TensorCache::On;
  if (s == "off") return TensorCache::Off;
  if (s == "auto") return TensorCache::Auto;
  throw ConfigError("config key 'cache': expected on|off|auto, got '" + s + "'");
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  static const char* known[] = {"R", "Z_h", "a", "d", "ell", "Q", "k", "lambda", "gamma", "r",
                                "K0", "K1", "K2", "N", "quasi_reversibility", "interp", "noise",
                                "seed", "eta1", "eta_factor", "eta_min", "dJ_min", "max_iter",
                                "forward_refine", "gmres_tol", "gmres_restart", "gmres_max_iter",
                                "cache", "cache_budget_gib", "step2"};
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw ConfigError("config key '" + item.key() + "': unknown key");
  }

  RunConfig c;
  read(j, "R", c.R);
  read(j, "Z_h", c.Z_h);
  read(j, "a", c.a);
  read(j, "d", c.d);
  read(j, "ell", c.ell);
  read(j, "Q", c.Q);
  read(j, "k", c.k);
  read(j, "lambda", c.lambda);
  read(j, "gamma", c.gamma);
  if (j.contains("r") && !j["r"].is_null()) {
    double r = 0;
    read(j, "r", r);
    c.r = r;
  }
  read(j, "K0", c.K0);
  read(j, "K1", c.K1);
  read(j, "K2", c.K2);
  read(j, "N", c.N);
  read(j, "quasi_reversibility", c.quasi_reversibility);
  if (j.contains("interp")) {
    std::string s;
    read(j, "interp", s);
    if (s == "cubic-spline") c.interp = Interpolation::CubicSpline;
    else if (s == "linear") c.interp = Interpolation::Linear;
    else throw ConfigError("config key 'interp': expected cubic-spline|linear");
  }
  read(j, "noise", c.noise);
  read(j, "seed", c.seed);
  read(j, "eta1", c.eta1);
  read(j, "eta_factor", c.eta_factor);
  read(j, "eta_min", c.eta_min);
  read(j, "dJ_min", c.dJ_min);
  read(j, "max_iter", c.max_iter);
  read(j, "forward_refine", c.forward_refine);
  read(j, "gmres_tol", c.gmres_tol);
  read(j, "gmres_restart", c.gmres_restart);
  read(j, "gmres_max_iter", c.gmres_max_iter);
  if (j.contains("cache")) {
    std::string s;
    read(j, "cache", s);
    c.cache = cache_from(s);
  }
  read(j, "cache_budget_gib", c.cache_budget_gib);
  read(j, "step2", c.step2);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const RunConfig& c, int indent) {
  json j = {{"R", c.R},
            {"Z_h", c.Z_h},
            {"a", c.a},
            {"d", c.d},
            {"ell", c.ell},
            {"Q", c.Q},
            {"k", c.k},
            {"lambda", c.lambda},
            {"gamma", c.gamma},
            {"r", c.weight_shift()},
            {"K0", c.K0},
            {"K1", c.K1},
            {"K2", c.K2},
            {"N", c.N},
            {"quasi_reversibility", c.quasi_reversibility},
            {"interp", c.interp == Interpolation::Linear ? "linear" : "cubic-spline"},
            {"noise", c.noise},
            {"seed", c.seed},
            {"eta1", c.eta1},
            {"eta_factor", c.eta_factor},
            {"eta_min", c.eta_min},
            {"dJ_min", c.dJ_min},
            {"max_iter", c.max_iter},
            {"forward_refine", c.forward_refine},
            {"gmres_tol", c.gmres_tol},
            {"gmres_restart", c.gmres_restart},
            {"gmres_max_iter", c.gmres_max_iter},
            {"cache", cache_name(c.cache)},
            {"cache_budget_gib", c.cache_budget_gib},
            {"step2", c.step2}};
  return j.dump(indent);
}

namespace {

Vec3 read_vec3(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3)
    throw ConfigError(std::string("geometry key '") + key + "': expected an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) v[i] = j[key][i].get<double>();
  return v;
}

Inclusion read_inclusion(const json& j) {
  if (!j.is_object()) throw ConfigError("geometry entry must be an object");
  Inclusion inc;
  const std::string shape = j.value("shape", "");
  inc.center = read_vec3(j, "center");
  if (!j.contains("value")) throw ConfigError("geometry key 'value': missing");
  inc.value = j["value"].get<double>();
  if (shape == "ball") {
    inc.shape = Inclusion::Shape::Ball;
    if (!j.contains("radius")) throw ConfigError("geometry key 'radius': missing");
    const double r = j["radius"].get<double>();
    inc.size = {r, r, r};
  } else if (shape == "ellipsoid") {
    inc.shape = Inclusion::Shape::Ellipsoid;
    inc.size = read_vec3(j, "semi_axes");
  } else if (shape == "prism") {
    inc.shape = Inclusion::Shape::Prism;
    inc.size = read_vec3(j, "half_widths");
  } else {
    throw ConfigError("geometry key 'shape': expected ball|ellipsoid|prism, got '" + shape + "'");
  }
  return inc;
}

}  // namespace

std::vector<Inclusion> parse_geometry(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("geometry parse error: ") + e.what());
  }
  std::vector<Inclusion> out;
  try {
    if (j.is_array())
      for (const auto& item : j) out.push_back(read_inclusion(item));
    else
      out.push_back(read_inclusion(j));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("geometry: ") + e.what());
  }
  return out;
}

std::vector<Inclusion> load_geometry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open geometry file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_geometry(ss.str());
}

}  // namespace cvx
