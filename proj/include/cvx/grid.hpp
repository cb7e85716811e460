#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "cvx/errors.hpp"

namespace cvx {

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;
using CVec3 = std::array<cplx, 3>;

/// Uniform cubic grid over [-R, R]^3 with n nodes per axis.
///
/// Node (p, q, s) sits at (-R + p h, -R + q h, -R + s h); the s = 0 plane is
/// the measurement face z = -R. Linear index is s n^2 + q n + p, so z is the
/// slowest axis.
class Grid3 {
 public:
  static constexpr int kMinNodes = 3;

  Grid3() = default;
  Grid3(double half_edge, int nodes);

  double half_edge() const { return R_; }
  int nodes_per_axis() const { return n_; }
  double step() const { return h_; }
  std::size_t node_count() const { return std::size_t(n_) * n_ * n_; }
  std::size_t plane_size() const { return std::size_t(n_) * n_; }

  double coord(int i) const { return -R_ + i * h_; }
  Vec3 point(int p, int q, int s) const { return {coord(p), coord(q), coord(s)}; }

  std::size_t index(int p, int q, int s) const {
    return (std::size_t(s) * n_ + q) * n_ + p;
  }
  std::size_t plane_index(int p, int q) const { return std::size_t(q) * n_ + p; }

  bool is_interior(int p, int q, int s) const {
    return p > 0 && q > 0 && s > 0 && p < n_ - 1 && q < n_ - 1 && s < n_ - 1;
  }
  bool is_boundary(int p, int q, int s) const { return !is_interior(p, q, s); }

  friend bool operator==(const Grid3&, const Grid3&) = default;

 private:
  double R_ = 1.0;
  int n_ = kMinNodes;
  double h_ = 1.0;
};

/// Builds the grid; rejects n < 3 or R <= 0.
Grid3 make_grid(double half_edge, int nodes);

/// Equispaced point sources on the segment {(alpha, 0, -d) : |alpha| <= a},
/// together with Gauss-Legendre data over [-a, a] used for every
/// alpha-integral.
class SourceArray {
 public:
  SourceArray(double half_length, double depth, int count, int quad_nodes);

  double half_length() const { return a_; }
  double depth() const { return d_; }
  int count() const { return static_cast<int>(alphas_.size()); }
  double spacing() const;
  double alpha(int l) const { return alphas_[l]; }
  std::span<const double> alphas() const { return alphas_; }
  Vec3 position(int l) const { return position_at(alphas_[l]); }
  Vec3 position_at(double alpha) const { return {alpha, 0.0, -d_}; }

  std::span<const double> quad_nodes() const { return qx_; }
  std::span<const double> quad_weights() const { return qw_; }

 private:
  double a_;
  double d_;
  std::vector<double> alphas_;
  std::vector<double> qx_;
  std::vector<double> qw_;
};

/// A stack of `count` volumes of T on one grid, index (slot, s, q, p).
/// The Tag distinguishes source-indexed from mode-indexed stacks.
template <class T, class Tag>
class VolumeStack {
 public:
  using value_type = T;

  VolumeStack() = default;
  VolumeStack(const Grid3& grid, int count, T fill = T{})
      : grid_(grid), count_(count), values_(std::size_t(count) * grid.node_count(), fill) {}

  const Grid3& grid() const { return grid_; }
  int count() const { return count_; }
  std::size_t slot_size() const { return grid_.node_count(); }

  T& at(int slot, int p, int q, int s) { return values_[offset(slot) + grid_.index(p, q, s)]; }
  const T& at(int slot, int p, int q, int s) const {
    return values_[offset(slot) + grid_.index(p, q, s)];
  }

  std::span<T> slot(int i) { return {values_.data() + offset(i), slot_size()}; }
  std::span<const T> slot(int i) const { return {values_.data() + offset(i), slot_size()}; }

  std::vector<T>& values() { return values_; }
  const std::vector<T>& values() const { return values_; }

  bool same_shape(const VolumeStack& o) const { return grid_ == o.grid_ && count_ == o.count_; }

 private:
  std::size_t offset(int slot) const { return std::size_t(slot) * slot_size(); }

  Grid3 grid_;
  int count_ = 0;
  std::vector<T> values_;
};

struct SourceAxis;
struct ModeAxis;
struct ScalarAxis;

/// Complex field per source: u, u0 or v.
using WaveField = VolumeStack<cplx, SourceAxis>;
/// The N complex Fourier components v_0..v_{N-1} of the unknown.
using CoeffField = VolumeStack<cplx, ModeAxis>;
/// Real scalar field (count 1): dielectric constant and reconstructions.
using ScalarField = VolumeStack<double, ScalarAxis>;

/// Complex data on the measurement face, index (src, q, p).
class PlaneField {
 public:
  PlaneField() = default;
  PlaneField(const Grid3& grid, int count)
      : grid_(grid), count_(count), values_(std::size_t(count) * grid.plane_size()) {}

  const Grid3& grid() const { return grid_; }
  int count() const { return count_; }
  cplx& at(int src, int p, int q) { return values_[src * grid_.plane_size() + grid_.plane_index(p, q)]; }
  const cplx& at(int src, int p, int q) const {
    return values_[src * grid_.plane_size() + grid_.plane_index(p, q)];
  }
  std::vector<cplx>& values() { return values_; }
  const std::vector<cplx>& values() const { return values_; }

 private:
  Grid3 grid_;
  int count_ = 0;
  std::vector<cplx> values_;
};

inline ScalarField make_scalar(const Grid3& grid, double fill) { return ScalarField(grid, 1, fill); }

/// Euclidean norm of a real 3-vector difference.
inline double distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace cvx
