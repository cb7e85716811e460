#pragma once

#include <cstdint>
#include <vector>

#include "cvx/basis.hpp"
#include "cvx/geom_tensors.hpp"
#include "cvx/grid.hpp"
#include "cvx/pipeline.hpp"

namespace cvx {

struct FunctionalParams {
  double lambda = 1.1;
  double r = 4.0;
  double gamma = 1e-4;
  double K0 = 1.0;
  double K1 = 2.0;
  double K2 = 1e-3;
  bool quasi_reversibility = false;  // unit weight instead of the Carleman weight
};

/// mu(z) = exp(2 lambda (z - r)^2) and the balancing factor
/// exp(-2 lambda (R + r)^2). Their product, which is what enters the
/// functional, is evaluated in one exponent so it never overflows.
class CarlemanWeight {
 public:
  CarlemanWeight(const Grid3& grid, double lambda, double r, bool unit = false);

  double mu(int s) const;
  double balance() const;
  /// balance() * mu(s), in (0, 1].
  double weight(int s) const { return weight_[s]; }
  /// log(mu(first) / mu(last)).
  double log_ratio() const;

 private:
  Grid3 grid_;
  double lambda_, r_;
  bool unit_;
  std::vector<double> weight_;
};

struct FunctionalParts {
  double total = 0.0;
  double residual = 0.0;
  double dirichlet = 0.0;  // K0 term on the bottom face
  double neumann = 0.0;    // K1 term on the bottom face
  double faces = 0.0;      // K2 term on the other five faces
  double regularization = 0.0;
};

/// Central differences in the interior, one-sided second order on the
/// first and last node of each line.
void grid_gradient(const Grid3& grid, std::span<const cplx> v, int p, int q, int s, cplx* out);

/// The fully discrete weighted Tikhonov functional on the mode fields V.
class Functional {
 public:
  Functional(const SpectralBasis& basis, const GeomTensors& geom, const BoundaryData& data,
             const FunctionalParams& params);

  const Grid3& grid() const { return grid_; }
  int order() const { return N_; }
  const FunctionalParams& params() const { return params_; }
  const CarlemanWeight& weight() const { return weight_; }

  /// S Lap V + f(grad V) at interior nodes, zero elsewhere.
  CoeffField residual(const CoeffField& V) const;

  FunctionalParts evaluate(const CoeffField& V) const;
  /// Gradient with respect to (Re V, Im V), packed as Re + i Im.
  FunctionalParts evaluate(const CoeffField& V, CoeffField& grad) const;

 private:
  void check_shape(const CoeffField& V) const;
  void interior_residual(const CoeffField& V, int p, int q, int s, cplx* B, cplx* C, cplx* g,
                         cplx* r, cplx* jac) const;
  FunctionalParts run(const CoeffField& V, CoeffField* grad) const;

  const SpectralBasis& basis_;
  const GeomTensors& geom_;
  const BoundaryData& data_;
  FunctionalParams params_;
  Grid3 grid_;
  int N_;
  CarlemanWeight weight_;
};

/// Real inner product sum Re(conj(a) b).
double inner(const CoeffField& a, const CoeffField& b);

struct ConvexityReport {
  int pairs = 0;
  double min_gap = 0.0;
  double median_gap = 0.0;
  double nonnegative_fraction = 0.0;
  double h1_bound_fraction = 0.0;  // gap >= gamma * |V2 - V1|^2_H1
  std::vector<double> gaps;
};

/// Bregman gaps J(V2) - J(V1) - <J'(V1), V2 - V1> over random pairs with
/// entries in the unit box. The pair shares values on the boundary and on
/// the plane s = 1, hence Dirichlet data everywhere and the Neumann
/// difference on the bottom face.
ConvexityReport convexity_probe(const Functional& J, int pairs, std::uint64_t seed);

/// Sum h^3 (|V|^2 + |grad V|^2).
double h1_norm_sq(const CoeffField& V);

}  // namespace cvx
