#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>
#include <functional>
#include <map>

#include "cvx/basis.hpp"
#include "cvx/forward.hpp"
#include "cvx/pipeline.hpp"

using namespace cvx;
namespace fs = std::filesystem;

namespace {

const double kK = 6.6;

PlaneField bottom_of(const WaveField& u) {
  const int n = u.grid().nodes_per_axis();
  PlaneField out(u.grid(), u.count());
  for (int l = 0; l < u.count(); ++l)
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < n; ++p) out.at(l, p, q) = u.at(l, p, q, 0);
  return out;
}

// u = u0 exp(phase(x)) on every node.
WaveField modulated(const WaveField& u0, const std::function<cplx(const Vec3&)>& g) {
  const Grid3& grid = u0.grid();
  const int n = grid.nodes_per_axis();
  WaveField u = u0;
  for (int l = 0; l < u.count(); ++l)
    for (int s = 0; s < n; ++s)
      for (int q = 0; q < n; ++q)
        for (int p = 0; p < n; ++p) u.at(l, p, q, s) *= std::exp(g(grid.point(p, q, s)));
  return u;
}

MeasuredData data_from(const WaveField& u) {
  const int n = u.grid().nodes_per_axis();
  const double h = u.grid().step();
  MeasuredData d{PlaneField(u.grid(), u.count()), PlaneField(u.grid(), u.count()), 0.0};
  for (int l = 0; l < u.count(); ++l)
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < n; ++p) {
        d.F.at(l, p, q) = u.at(l, p, q, 0);
        d.G.at(l, p, q) = (u.at(l, p, q, 1) - u.at(l, p, q, 0)) / h;
      }
  return d;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("faces cover each boundary node with the right multiplicity") {
    const int n = 5;
    std::map<std::array<int, 3>, int> hits;
    for (int f = 0; f < kFaces; ++f)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) ++hits[face_node(Face(f), n, i, j)];
    const Grid3 g = make_grid(1.0, n);
    int boundary = 0;
    for (int s = 0; s < n; ++s)
      for (int q = 0; q < n; ++q)
        for (int p = 0; p < n; ++p)
          if (g.is_boundary(p, q, s)) {
            ++boundary;
            const int expect = (p == 0) + (p == n - 1) + (q == 0) + (q == n - 1) + (s == 0) + (s == n - 1);
            CHECK(hits[{p, q, s}] == expect);
          }
    CHECK(int(hits.size()) == boundary);
    CHECK(face_node(Face::Bottom, n, 1, 3) == std::array<int, 3>{3, 1, 0});
  }

  TEST_CASE("unscattered data gives zero log ratio") {
    const Grid3 g = make_grid(3.0, 11);
    const SourceArray src(1.0, 7.5, 5, 32);
    const WaveField u0 = incident_volume(g, src, kK);
    const WaveField v = log_ratio(u0, u0);
    for (auto z : v.values()) CHECK(std::abs(z) < 1e-15);
    const MeasuredData d = data_from(u0);
    const SpectralBasis basis = SpectralBasis::build(3, 1.0, 32);
    const FourierProjector proj(basis, src.alphas(), Interpolation::CubicSpline);
    const BoundaryData b = build_boundary_data(d, src, kK, proj);
    for (auto z : b.psi0) CHECK(std::abs(z) < 1e-12);
    for (auto z : b.psi1) CHECK(std::abs(z) < 1e-10);
  }

  TEST_CASE("constant ratio") {
    const Grid3 g = make_grid(3.0, 9);
    const SourceArray src(1.0, 7.5, 3, 32);
    const WaveField u0 = incident_volume(g, src, kK);
    const cplx c = std::log(2.0) + cplx(0, 0.3);
    const WaveField v = log_ratio(modulated(u0, [&](const Vec3&) { return c; }), u0);
    for (auto z : v.values()) CHECK(std::abs(z - c) < 1e-14);
  }

  TEST_CASE("winding phase is unwrapped in the plane and in the volume") {
    const Grid3 g = make_grid(3.0, 21);
    const SourceArray src(1.0, 7.5, 2, 32);
    const WaveField u0 = incident_volume(g, src, kK);
    // 5 radians per unit length: about 1.5 per step of 0.3, well below pi,
    // and a total excursion of 90 radians across the cube.
    auto g_of = [](const Vec3& x) { return cplx(0.1 * x[0], 5.0 * (x[0] + x[1] - x[2])); };
    const WaveField u = modulated(u0, g_of);
    const WaveField v = log_ratio(u, u0);
    const PlaneField vb = log_ratio_plane(bottom_of(u), bottom_of(u0));
    const int n = 21;
    double worst = 0.0, worst_plane = 0.0;
    for (int l = 0; l < 2; ++l)
      for (int s = 0; s < n; ++s)
        for (int q = 0; q < n; ++q)
          for (int p = 0; p < n; ++p) {
            const cplx ref = g_of(g.point(p, q, s)) - g_of(g.point(0, 0, n - 1)) +
                             std::log(std::exp(g_of(g.point(0, 0, n - 1))));
            worst = std::max(worst, std::abs(v.at(l, p, q, s) - ref));
            if (s == 0) {
              const cplx ref0 = g_of(g.point(p, q, 0)) - g_of(g.point(0, 0, 0)) +
                                std::log(std::exp(g_of(g.point(0, 0, 0))));
              worst_plane = std::max(worst_plane, std::abs(vb.at(l, p, q) - ref0));
            }
          }
    CHECK(worst < 1e-11);
    CHECK(worst_plane < 1e-11);
  }

  TEST_CASE("exp(v) u0 reproduces u") {
    const Grid3 g = make_grid(3.0, 11);
    const SourceArray src(1.0, 7.5, 3, 32);
    const std::vector<Inclusion> inc{{Inclusion::Shape::Ball, {0, 0, -2.5}, {0.6, 0.6, 0.6}, 3.0}};
    const ScalarField c = rasterize(g, inc);
    const GreenOperator G(g, kK);
    const LSOperator op(G, c);
    const WaveField u = solve_all(op, src, kK);
    const WaveField u0 = incident_volume(g, src, kK);
    const WaveField v = log_ratio(u, u0);
    double worst = 0.0;
    for (std::size_t i = 0; i < u.values().size(); ++i)
      worst = std::max(worst, std::abs(std::exp(v.values()[i]) * u0.values()[i] - u.values()[i]) /
                                  std::abs(u.values()[i]));
    CHECK(worst < 1e-13);
  }

  TEST_CASE("vanishing field is reported with its location") {
    const Grid3 g = make_grid(3.0, 7);
    const SourceArray src(1.0, 7.5, 2, 32);
    const WaveField u0 = incident_volume(g, src, kK);
    WaveField u = u0;
    u.at(1, 2, 3, 4) = 0.0;
    try {
      log_ratio(u, u0);
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("source 1") != std::string::npos);
      CHECK(msg.find("(2, 3, 4)") != std::string::npos);
    }
  }

  TEST_CASE("Neumann data of a vertical modulation") {
    const Grid3 g = make_grid(3.0, 11);
    const SourceArray src(1.0, 7.5, 3, 32);
    const WaveField u0 = incident_volume(g, src, kK);
    auto g_of = [](const Vec3& x) { return cplx(0.2 * x[2] * x[2], 0.7 * x[2] + 0.1 * x[0]); };
    const MeasuredData d = data_from(modulated(u0, g_of));
    const PlaneField dz = neumann_log(d, src, kK);
    for (int l = 0; l < 3; ++l)
      for (int q = 0; q < 11; ++q)
        for (int p = 0; p < 11; ++p) {
          const cplx ref = (g_of(g.point(p, q, 1)) - g_of(g.point(p, q, 0))) / g.step();
          CHECK(std::abs(dz.at(l, p, q) - ref) < 1e-11);
        }
  }

  TEST_CASE("completed data") {
    const Grid3 g = make_grid(3.0, 7);
    const SourceArray src(1.0, 7.5, 2, 32);
    PlaneField F(g, 2);
    for (std::size_t i = 0; i < F.values().size(); ++i) F.values()[i] = cplx(double(i), 1.0);
    const WaveField u = complete_data(F, src, kK);
    for (int l = 0; l < 2; ++l)
      for (int s = 0; s < 7; ++s)
        for (int q = 0; q < 7; ++q)
          for (int p = 0; p < 7; ++p) {
            const cplx got = u.at(l, p, q, s);
            if (s == 0)
              CHECK(got == F.at(l, p, q));
            else if (g.is_boundary(p, q, s))
              CHECK(got == incident_at(g.point(p, q, s), src.position(l), kK));
            else
              CHECK(got == 0.0);
          }
  }

  TEST_CASE("boundary data round trip is exact") {
    const Grid3 g = make_grid(2.0, 6);
    BoundaryData b(g, 3);
    for (std::size_t i = 0; i < b.psi0.size(); ++i) b.psi0[i] = {std::sin(double(i)), 1.0 / (i + 1.0)};
    for (std::size_t i = 0; i < b.psi1.size(); ++i) b.psi1[i] = {std::cos(double(i)), -1e-300 * i};
    const fs::path dir = fs::temp_directory_path() / "cvx_unit";
    fs::create_directories(dir);
    write_boundary(b, dir / "b.cvxf");
    const BoundaryData r = read_boundary(dir / "b.cvxf");
    CHECK(r.grid == g);
    CHECK(r.order == 3);
    REQUIRE(r.psi0.size() == b.psi0.size());
    REQUIRE(r.psi1.size() == b.psi1.size());
    CHECK(std::memcmp(r.psi0.data(), b.psi0.data(), b.psi0.size() * sizeof(cplx)) == 0);
    CHECK(std::memcmp(r.psi1.data(), b.psi1.data(), b.psi1.size() * sizeof(cplx)) == 0);
  }

  TEST_CASE("bottom coefficients are projections and other faces carry zero") {
    const Grid3 g = make_grid(3.0, 5);
    const SourceArray src(1.0, 7.5, 9, 32);
    const SpectralBasis basis = SpectralBasis::build(3, 1.0, 32);
    const FourierProjector proj(basis, src.alphas(), Interpolation::CubicSpline);
    PlaneField v(g, 9), dz(g, 9);
    for (int l = 0; l < 9; ++l)
      for (int q = 0; q < 5; ++q)
        for (int p = 0; p < 5; ++p) {
          v.at(l, p, q) = cplx(p + src.alpha(l), q);
          dz.at(l, p, q) = cplx(0, src.alpha(l) * src.alpha(l));
        }
    const BoundaryData b = boundary_coeffs(v, dz, proj);
    std::vector<cplx> samples(9), coeffs(3);
    for (int l = 0; l < 9; ++l) samples[l] = v.at(l, 2, 4);
    proj.project(samples, coeffs);
    for (int m = 0; m < 3; ++m) CHECK(b.psi0_at(m, 2, 4) == coeffs[m]);
    for (int m = 0; m < 3; ++m)
      for (int f = 1; f < kFaces; ++f)
        for (int i = 0; i < 5; ++i)
          for (int j = 0; j < 5; ++j) CHECK(b.dirichlet(m, Face(f), i, j) == 0.0);
  }

  TEST_CASE("truncation error vanishes for fields in the span") {
    const Grid3 g = make_grid(3.0, 5);
    const SourceArray src(1.0, 7.5, 41, 32);
    const SpectralBasis basis = SpectralBasis::build(6, 1.0, 32);
    const FourierProjector proj(basis, src.alphas(), Interpolation::CubicSpline);
    WaveField v(g, 41);
    for (int l = 0; l < 41; ++l)
      for (std::size_t i = 0; i < v.slot_size(); ++i) {
        const double a = src.alpha(l);
        v.slot(l)[i] = cplx(1.0 + i, 0.5) * basis.eval(0, a).value + cplx(0.0, 0.1 * i) * basis.eval(2, a).value;
      }
    CHECK(truncation_error(v, proj, 3) < 1e-4);
    CHECK(truncation_error(v, proj, 1) > 1e-2);
    CHECK_THROWS_AS(truncation_error(v, proj, 7), ConfigError);
  }
}
