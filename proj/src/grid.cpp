#include "cvx/grid.hpp"

#include <string>

#include "cvx/quadrature.hpp"

namespace cvx {

Grid3::Grid3(double half_edge, int nodes) : R_(half_edge), n_(nodes) {
  if (!(half_edge > 0.0)) throw ConfigError("grid half-edge R must be positive");
  if (nodes < kMinNodes)
    throw ConfigError("grid needs at least " + std::to_string(kMinNodes) + " nodes per axis, got " +
                      std::to_string(nodes));
  h_ = 2.0 * half_edge / (nodes - 1);
}

Grid3 make_grid(double half_edge, int nodes) { return Grid3(half_edge, nodes); }

SourceArray::SourceArray(double half_length, double depth, int count, int quad_nodes)
    : a_(half_length), d_(depth) {
  if (!(half_length > 0.0)) throw ConfigError("source half-length a must be positive");
  if (count < 2) throw ConfigError("need at least two sources");
  if (quad_nodes < 2) throw ConfigError("need at least two quadrature nodes");
  alphas_.resize(count);
  const double hs = 2.0 * a_ / (count - 1);
  for (int l = 0; l < count; ++l) alphas_[l] = -a_ + l * hs;
  alphas_.back() = a_;
  auto rule = gauss_legendre(quad_nodes, -a_, a_);
  qx_ = std::move(rule.nodes);
  qw_ = std::move(rule.weights);
}

double SourceArray::spacing() const { return 2.0 * a_ / (count() - 1); }

}  // namespace cvx
