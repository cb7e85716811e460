#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cvx/forward.hpp"
#include "cvx/quadrature.hpp"

namespace cvx {

enum class TensorCache { Auto, On, Off };

/// Every knob of a simulate/invert run. Defaults reproduce the reference
/// experiment (R = 3, 51^3 grid, 11 sources, k = 6.6). Lengths are in units
/// of 10 cm.
struct RunConfig {
  // Geometry.
  double R = 3.0;
  int Z_h = 51;
  double a = 1.0;
  double d = 7.5;
  int ell = 11;
  int Q = 32;

  // Physics and functional.
  double k = 6.6;
  double lambda = 1.1;
  double gamma = 1e-4;
  std::optional<double> r;  // Carleman shift; R + 1 when unset
  double K0 = 1.0;
  double K1 = 2.0;
  double K2 = 1e-3;
  int N = 4;
  bool quasi_reversibility = false;  // lambda = 0 ablation, unit weight
  Interpolation interp = Interpolation::CubicSpline;

  // Data noise.
  double noise = 0.0;
  std::uint64_t seed = 0;

  // Gradient descent.
  double eta1 = 0.1;
  double eta_factor = 0.5;
  double eta_min = 1e-8;
  double dJ_min = 1e-8;
  int max_iter = 5000;

  // Forward solver.
  int forward_refine = 1;
  double gmres_tol = 1e-8;
  int gmres_restart = 30;
  int gmres_max_iter = 600;

  TensorCache cache = TensorCache::Auto;
  double cache_budget_gib = 1.0;

  bool step2 = true;

  double weight_shift() const { return r.value_or(R + 1.0); }
};

/// Throws ConfigError naming the offending key.
void validate(const RunConfig& cfg);

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const RunConfig& cfg, int indent = 2);

/// Inclusions from JSON: one object or an array of objects
///   {"shape": "ball", "center": [x, y, z], "radius": r, "value": c}
///   {"shape": "ellipsoid", "center": [...], "semi_axes": [...], "value": c}
///   {"shape": "prism", "center": [...], "half_widths": [...], "value": c}
/// An empty array means no target.
std::vector<Inclusion> parse_geometry(const std::string& json_text);
std::vector<Inclusion> load_geometry(const std::filesystem::path& path);

}  // namespace cvx
