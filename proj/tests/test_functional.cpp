#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <cstring>
#include <random>

#include "cvx/functional.hpp"

using namespace cvx;

namespace {

struct Setup {
  Grid3 grid;
  SourceArray sources;
  SpectralBasis basis;
  GeomTensors geom;
  BoundaryData data;

  Setup(int n, int N, double k = 6.6)
      : grid(make_grid(3.0, n)),
        sources(1.0, 7.5, 11, 32),
        basis(SpectralBasis::build(N, 1.0, 32)),
        geom(grid, sources, basis, k),
        data(grid, N) {}
};

CoeffField random_field(const Grid3& g, int N, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-scale, scale);
  CoeffField V(g, N);
  for (auto& v : V.values()) v = {U(rng), U(rng)};
  return V;
}

void fill_random(BoundaryData& b, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1, 1);
  for (auto& z : b.psi0) z = {U(rng), U(rng)};
  for (auto& z : b.psi1) z = {U(rng), U(rng)};
}

}  // namespace

TEST_SUITE("functional") {
  TEST_CASE("weight is bounded by one and spans exp(8 lambda R r)") {
    const Grid3 g = make_grid(3.0, 31);
    const CarlemanWeight w(g, 1.1, 4.0);
    for (int s = 0; s < 31; ++s) {
      CHECK(w.weight(s) > 0.0);
      CHECK(w.weight(s) <= 1.0);
      if (s > 0) CHECK(w.weight(s) < w.weight(s - 1));
    }
    CHECK(w.weight(0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(w.log_ratio() == doctest::Approx(8 * 1.1 * 3.0 * 4.0).epsilon(1e-14));
    CHECK(std::log(w.weight(0) / w.weight(30)) == doctest::Approx(w.log_ratio()).epsilon(1e-12));
    CHECK(w.weight(7) == doctest::Approx(w.balance() * w.mu(7)).epsilon(1e-12));
    const CarlemanWeight unit(g, 0.0, 0.0, true);
    for (int s = 0; s < 31; ++s) CHECK(unit.weight(s) == 1.0);
    CHECK_THROWS_AS(CarlemanWeight(g, 0.0, 4.0), ConfigError);
    CHECK_THROWS_AS(CarlemanWeight(g, 1.0, 2.5), ConfigError);
  }

  TEST_CASE("large lambda does not overflow") {
    const Grid3 g = make_grid(3.0, 51);
    const CarlemanWeight w(g, 40.0, 4.0);
    for (int s = 0; s < 51; ++s) CHECK(std::isfinite(w.weight(s)));
  }

  TEST_CASE("zero field with zero data") {
    Setup S(7, 2);
    const Functional J(S.basis, S.geom, S.data, {});
    CoeffField grad;
    const FunctionalParts parts = J.evaluate(CoeffField(S.grid, 2), grad);
    CHECK(parts.total == 0.0);
    for (auto z : grad.values()) CHECK(z == 0.0);
  }

  TEST_CASE("zero field measures the data alone") {
    Setup S(7, 2);
    fill_random(S.data, 5);
    FunctionalParams P;
    const Functional J(S.basis, S.geom, S.data, P);
    const double h2 = S.grid.step() * S.grid.step();
    double expect0 = 0.0, expect1 = 0.0;
    for (int m = 0; m < 2; ++m)
      for (int q = 0; q < 7; ++q)
        for (int p = 0; p < 7; ++p) {
          expect0 += P.K0 * h2 * std::norm(S.data.psi0_at(m, p, q));
          expect1 += P.K1 * h2 * std::norm(S.data.neumann(m, p, q));
        }
    const FunctionalParts parts = J.evaluate(CoeffField(S.grid, 2));
    CHECK(parts.dirichlet == doctest::Approx(expect0).epsilon(1e-14));
    CHECK(parts.neumann == doctest::Approx(expect1).epsilon(1e-14));
    CHECK(parts.residual == 0.0);
    CHECK(parts.faces == 0.0);
    CHECK(parts.regularization == 0.0);
  }

  TEST_CASE("regularization and face terms") {
    Setup S(7, 2);
    const CoeffField V = random_field(S.grid, 2, 11);
    FunctionalParams a, b;
    b.gamma = 3 * a.gamma;
    const FunctionalParts pa = Functional(S.basis, S.geom, S.data, a).evaluate(V);
    const FunctionalParts pb = Functional(S.basis, S.geom, S.data, b).evaluate(V);
    CHECK(pa.regularization == doctest::Approx(a.gamma * h1_norm_sq(V)).epsilon(1e-12));
    CHECK(pb.regularization == doctest::Approx(3 * pa.regularization).epsilon(1e-12));
    CHECK(pb.residual == pa.residual);
    CHECK(pa.total ==
          doctest::Approx(pa.residual + pa.dirichlet + pa.neumann + pa.faces + pa.regularization).epsilon(1e-15));

    // A unit constant in one mode: five faces, each node counted once per face.
    CoeffField one(S.grid, 2);
    for (auto& z : one.slot(0)) z = 1.0;
    const double h2 = S.grid.step() * S.grid.step();
    CHECK(Functional(S.basis, S.geom, S.data, a).evaluate(one).faces ==
          doctest::Approx(a.K2 * h2 * 5 * 49).epsilon(1e-14));
  }

  TEST_CASE("residual agrees with the alpha-derivative of the per-source expression") {
    using boost::math::quadrature::gauss_kronrod;
    Setup S(7, 3);
    const Functional J(S.basis, S.geom, S.data, {});
    const CoeffField V = random_field(S.grid, 3, 3, 0.5);
    const CoeffField res = J.residual(V);
    const int N = 3;
    const double h = S.grid.step(), k = 6.6, d = 7.5;
    for (auto [p, q, s] : {std::array<int, 3>{1, 1, 1}, {3, 2, 4}, {5, 5, 5}, {2, 4, 1}}) {
      const Vec3 x = S.grid.point(p, q, s);
      cplx lap[3], g[3][3];
      for (int n = 0; n < N; ++n) {
        auto v = [&](int dp, int dq, int ds) { return V.at(n, p + dp, q + dq, s + ds); };
        lap[n] = (v(1, 0, 0) + v(-1, 0, 0) + v(0, 1, 0) + v(0, -1, 0) + v(0, 0, 1) + v(0, 0, -1) - 6.0 * v(0, 0, 0)) /
                 (h * h);
        g[n][0] = (v(1, 0, 0) - v(-1, 0, 0)) / (2 * h);
        g[n][1] = (v(0, 1, 0) - v(0, -1, 0)) / (2 * h);
        g[n][2] = (v(0, 0, 1) - v(0, 0, -1)) / (2 * h);
      }
      // d/dalpha of  Lap v + grad v . grad v + 2 grad v . x_tilde.
      auto integrand = [&](int m, double a, bool im) {
        const Vec3 src{a, 0.0, -d};
        const CVec3 xt = x_tilde(x, src, k), xh = x_hat(x, src, k);
        cplx gv[3] = {}, gva[3] = {}, lapa = 0.0;
        for (int n = 0; n < N; ++n) {
          const auto e = S.basis.eval(n, a);
          lapa += lap[n] * e.derivative;
          for (int c = 0; c < 3; ++c) {
            gv[c] += g[n][c] * e.value;
            gva[c] += g[n][c] * e.derivative;
          }
        }
        cplx val = lapa;
        for (int c = 0; c < 3; ++c) val += 2.0 * gv[c] * gva[c] + 2.0 * (gva[c] * xt[c] + gv[c] * xh[c]);
        val *= S.basis.eval(m, a).value;
        return im ? val.imag() : val.real();
      };
      for (int m = 0; m < N; ++m) {
        const double re =
            gauss_kronrod<double, 61>::integrate([&](double a) { return integrand(m, a, false); }, -1, 1, 10, 1e-14);
        const double ir =
            gauss_kronrod<double, 61>::integrate([&](double a) { return integrand(m, a, true); }, -1, 1, 10, 1e-14);
        const cplx ref(re, ir);
        CHECK(std::abs(res.at(m, p, q, s) - ref) <= 1e-10 * std::max(1.0, std::abs(ref)));
      }
    }
    for (int m = 0; m < N; ++m) CHECK(res.at(m, 0, 3, 3) == 0.0);
  }

  TEST_CASE("gradient matches central differences") {
    Setup S(7, 2);
    fill_random(S.data, 21);
    FunctionalParams P;
    P.lambda = 0.5;
    const Functional J(S.basis, S.geom, S.data, P);
    const CoeffField V = random_field(S.grid, 2, 8, 0.3);
    CoeffField grad;
    J.evaluate(V, grad);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      const CoeffField D = random_field(S.grid, 2, 100 + t);
      const double eps = 1e-6;
      CoeffField Vp = V, Vm = V;
      for (std::size_t i = 0; i < V.values().size(); ++i) {
        Vp.values()[i] += eps * D.values()[i];
        Vm.values()[i] -= eps * D.values()[i];
      }
      const double fd = (J.evaluate(Vp).total - J.evaluate(Vm).total) / (2 * eps);
      const double an = inner(grad, D);
      worst = std::max(worst, std::abs(fd - an) / std::max(std::abs(an), 1e-30));
    }
    CHECK(worst <= 1e-5);
  }

  TEST_CASE("quasi-reversibility gradient") {
    Setup S(6, 2);
    fill_random(S.data, 2);
    FunctionalParams P;
    P.quasi_reversibility = true;
    P.lambda = 0.0;
    const Functional J(S.basis, S.geom, S.data, P);
    const CoeffField V = random_field(S.grid, 2, 9, 0.3);
    CoeffField grad;
    J.evaluate(V, grad);
    const CoeffField D = random_field(S.grid, 2, 77);
    const double eps = 1e-6;
    CoeffField Vp = V, Vm = V;
    for (std::size_t i = 0; i < V.values().size(); ++i) {
      Vp.values()[i] += eps * D.values()[i];
      Vm.values()[i] -= eps * D.values()[i];
    }
    const double fd = (J.evaluate(Vp).total - J.evaluate(Vm).total) / (2 * eps);
    CHECK(fd == doctest::Approx(inner(grad, D)).epsilon(1e-5));
  }

  TEST_CASE("evaluation is deterministic") {
    Setup S(7, 2);
    fill_random(S.data, 1);
    const Functional J(S.basis, S.geom, S.data, {});
    const CoeffField V = random_field(S.grid, 2, 4);
    CoeffField g1, g2;
    const double a = J.evaluate(V, g1).total, b = J.evaluate(V, g2).total;
    CHECK(std::memcmp(&a, &b, sizeof a) == 0);
    CHECK(std::memcmp(g1.values().data(), g2.values().data(), g1.values().size() * sizeof(cplx)) == 0);
    CHECK(J.evaluate(V).total == a);
  }

  TEST_CASE("all parts are non-negative") {
    Setup S(6, 2);
    fill_random(S.data, 6);
    const Functional J(S.basis, S.geom, S.data, {});
    for (int t = 0; t < 5; ++t) {
      const FunctionalParts parts = J.evaluate(random_field(S.grid, 2, t, 2.0));
      CHECK(parts.residual >= 0);
      CHECK(parts.dirichlet >= 0);
      CHECK(parts.neumann >= 0);
      CHECK(parts.faces >= 0);
      CHECK(parts.regularization >= 0);
    }
  }

  TEST_CASE("convexity probe pairs share the boundary and the first layer") {
    Setup S(6, 2);
    fill_random(S.data, 6);
    FunctionalParams P;
    P.lambda = 2.0;
    const Functional J(S.basis, S.geom, S.data, P);
    const ConvexityReport rep = convexity_probe(J, 8, 42);
    CHECK(rep.pairs == 8);
    CHECK(rep.gaps.size() == 8);
    for (double gap : rep.gaps) CHECK(std::isfinite(gap));
    const ConvexityReport again = convexity_probe(J, 8, 42);
    CHECK(again.gaps == rep.gaps);
  }

  TEST_CASE("rejects bad parameters") {
    Setup S(5, 2);
    FunctionalParams P;
    P.gamma = 1.0;
    CHECK_THROWS_AS(Functional(S.basis, S.geom, S.data, P), ConfigError);
    BoundaryData wrong(S.grid, 3);
    CHECK_THROWS_AS(Functional(S.basis, S.geom, wrong, FunctionalParams{}), ConfigError);
    const Functional J(S.basis, S.geom, S.data, {});
    CHECK_THROWS_AS(J.evaluate(CoeffField(S.grid, 3)), ConfigError);
  }
}
