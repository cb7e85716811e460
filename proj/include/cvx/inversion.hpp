#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cvx/basis.hpp"
#include "cvx/config.hpp"
#include "cvx/forward.hpp"
#include "cvx/functional.hpp"
#include "cvx/geom_tensors.hpp"
#include "cvx/pipeline.hpp"

namespace cvx {

/// Everything that depends only on the configuration: grid, sources, basis,
/// projector and tensors. Functionals keep references into it.
class Problem {
 public:
  explicit Problem(const RunConfig& cfg);
  Problem(const Problem&) = delete;
  Problem& operator=(const Problem&) = delete;

  const RunConfig& config() const { return cfg_; }
  const Grid3& grid() const { return grid_; }
  const SourceArray& sources() const { return sources_; }
  const SpectralBasis& basis() const { return basis_; }
  const FourierProjector& projector() const { return proj_; }
  const GeomTensors& geom() const { return geom_; }
  FunctionalParams functional_params() const;

 private:
  RunConfig cfg_;
  Grid3 grid_;
  SourceArray sources_;
  SpectralBasis basis_;
  FourierProjector proj_;
  GeomTensors geom_;
};

/// exp((z+R)^2 / ((z+R)^2 - (R-1)^2)) below z = -1, zero above.
double start_bump(double z, double R);

/// v0n = (psi0n + psi1n (z + R)) chi(z). Requires R > 1.
CoeffField initial_guess(const BoundaryData& data);

struct DescentControls {
  double eta1 = 0.1;
  double factor = 0.5;
  double eta_min = 1e-8;
  double dJ_min = 1e-8;
  int max_iter = 5000;
};

enum class StopReason { EtaFloor, DeltaJFloor, MaxIter };
const char* to_string(StopReason r);

struct DescentStep {
  int iter = 0;
  double eta = 0.0;
  bool accepted = true;
  FunctionalParts parts;
};

struct DescentTrace {
  std::vector<DescentStep> steps;  // steps[0] is the starting point
  StopReason stop = StopReason::MaxIter;
  int iterations = 0;
  double J_start = 0.0;
  double J_final = 0.0;
};

/// Value (and gradient when grad != nullptr) of a real objective.
using Objective = std::function<FunctionalParts(const CoeffField& V, CoeffField* grad)>;

/// Gradient descent with step halving. A step that increases the objective
/// is discarded before eta is halved. V holds the start on entry and the
/// last accepted iterate on exit.
DescentTrace descend(const Objective& J, CoeffField& V, const DescentControls& ctl,
                     const std::function<void(const DescentStep&)>& on_step = {});
DescentTrace descend(const Functional& J, CoeffField& V, const DescentControls& ctl,
                     const std::function<void(const DescentStep&)>& on_step = {});

/// Axis-aligned node box, inclusive.
struct NodeBox {
  int lo[3] = {0, 0, 0};
  int hi[3] = {0, 0, 0};
  bool contains(int p, int q, int s) const {
    return p >= lo[0] && p <= hi[0] && q >= lo[1] && q <= hi[1] && s >= lo[2] && s <= hi[2];
  }
};

/// c = mean over sources of |-(Lap v + grad v . grad v + 2 grad v . x_tilde)| / k^2 + 1
/// at interior nodes inside `region` (whole grid when empty), 1 elsewhere.
ScalarField recover_c(const CoeffField& V, const Problem& problem, std::optional<NodeBox> region = {});

/// 3x3x3 Gaussian with sigma = h, normalized, edge values replicated.
ScalarField gaussian_smooth(const ScalarField& c);

/// (max before) / (max after) - 1, computed on contrasts c - 1.
double rescale_factor(double max_contrast_before, double max_contrast_after);

/// c -> 1 + (1 + p) smooth(c - 1) with p chosen to keep the peak contrast.
ScalarField smooth_rescale(const ScalarField& c, double* p_hat = nullptr);

/// Drops contrast below 0.7 of its maximum, then smooth_rescale.
ScalarField postprocess_step1(const ScalarField& c_raw, double* p_hat = nullptr);

/// Search box for the second step: support of c - 1 above 5% of its peak,
/// symmetric in x and y about the axis, from the bottom face up, padded by
/// two nodes. Empty when there is no contrast.
std::optional<NodeBox> target_box(const ScalarField& c_temp, double top_limit);

/// Product bump that equals one on the axis at z = -R and vanishes on the
/// box surface and outside.
double box_bump(const Vec3& x, double bx, double by, double bz, double R);

struct QualityReport {
  double max_c = 1.0;
  std::optional<double> max_true;
  std::optional<double> E_max;  // percent
  Vec3 center{};
  Vec3 lowest{};
  bool has_target = false;
  double sup_deviation = 0.0;   // max |c - 1|
};

/// |max c_true - max c_comp| / max c_true * 100
double e_max(double max_true, double max_comp);

QualityReport quality(const ScalarField& c_comp, const ScalarField* c_true = nullptr);

struct InversionResult {
  ScalarField c_step1_raw;
  ScalarField c_step1;
  ScalarField c_final_raw;
  ScalarField c_comp;
  DescentTrace trace1;
  DescentTrace trace2;
  double p_hat1 = 0.0;
  double p_hat2 = 0.0;
  bool step2_ran = false;
  std::optional<NodeBox> box;
  std::vector<std::string> warnings;
  double seconds_step1 = 0.0;
  double seconds_step2 = 0.0;
};

using Logger = std::function<void(const std::string&)>;

/// Both steps of the reconstruction from measured data.
InversionResult invert(const Problem& problem, const MeasuredData& data, const Logger& log = {});

}  // namespace cvx
