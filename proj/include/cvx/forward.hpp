#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cvx/green.hpp"
#include "cvx/grid.hpp"

namespace cvx {

/// A homogeneous inclusion of dielectric constant `value`.
/// For a ball size[0] is the radius; for an ellipsoid size holds the
/// semi-axes; for a prism size holds the half-widths.
struct Inclusion {
  enum class Shape { Ball, Ellipsoid, Prism };
  Shape shape = Shape::Ball;
  Vec3 center{};
  Vec3 size{};
  double value = 1.0;

  bool contains(const Vec3& x) const;
};

/// c = 1 plus the inclusions sampled at the nodes. Nodes on the surface
/// count as inside. Overlaps take the larger value.
ScalarField rasterize(const Grid3& grid, std::span<const Inclusion> inclusions);

/// exp(ik|x - xa|) / (4 pi |x - xa|)
cplx incident_at(const Vec3& x, const Vec3& source, double k);
void incident_field(const Grid3& grid, const Vec3& source, double k, std::span<cplx> out);
WaveField incident_volume(const Grid3& grid, const SourceArray& sources, double k);

struct GmresControls {
  double tol = 1e-8;
  int restart = 30;
  int max_iter = 600;
};

struct SolveReport {
  int iterations = 0;
  double residual = 0.0;         // final relative residual
  std::vector<double> history;   // relative residual after each iteration
  bool converged = false;
};

/// Restarted GMRES for a complex linear operator. x holds the initial guess
/// on entry. History entries are the Arnoldi residual estimates, which never
/// increase.
using LinearMap = std::function<void(std::span<const cplx>, std::span<cplx>)>;
SolveReport gmres(const LinearMap& A, std::span<const cplx> b, std::span<cplx> x, const GmresControls& ctl);

/// The second-kind system (I - k^2 G (c - 1)) u = u0.
class LSOperator {
 public:
  LSOperator(const GreenOperator& green, const ScalarField& c, GmresControls ctl = {});

  const Grid3& grid() const { return green_.grid(); }
  bool zero_contrast() const { return support_.empty(); }

  void apply(std::span<const cplx> u, std::span<cplx> out) const;
  /// Scattered part k^2 G((c - 1) u).
  void scatter(std::span<const cplx> u, std::span<cplx> out) const;
  SolveReport solve(std::span<const cplx> u0, std::span<cplx> u) const;

 private:
  const GreenOperator& green_;
  std::vector<double> contrast_;
  std::vector<std::size_t> support_;
  GmresControls ctl_;
};

/// Total fields for every source. Throws NumericalError if a solve fails
/// to reach the tolerance.
WaveField solve_all(const LSOperator& op, const SourceArray& sources, double k,
                    std::vector<SolveReport>* reports = nullptr);

struct MeasuredData {
  PlaneField F;  // u on the measurement face
  PlaneField G;  // (u at s = 1 minus u at s = 0) / h
  double noise = 0.0;
};

struct SimulateOptions {
  int refine = 1;        // forward grid has refine*(n-1)+1 nodes per axis
  double noise = 0.0;
  std::uint64_t seed = 0;
  GmresControls gmres;
};

/// Grid with refine*(n-1)+1 nodes on the same cube.
Grid3 refined_grid(const Grid3& grid, int refine);

/// Synthetic data on `grid` from a dielectric constant sampled on
/// refined_grid(grid, opt.refine). Fine-grid values are injected.
MeasuredData simulate(const ScalarField& c_forward, const Grid3& grid, const SourceArray& sources,
                      double k, const SimulateOptions& opt, std::vector<SolveReport>* reports = nullptr);

/// Multiplies every sample of F and G by (1 + delta U(-1, 1)), F first.
void add_noise(MeasuredData& data, double delta, std::uint64_t seed);

}  // namespace cvx
