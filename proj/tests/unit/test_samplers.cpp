#include <doctest.h>

#include <cmath>

#include "sidgff/covariance.hpp"
#include "sidgff/error.hpp"
#include "sidgff/samplers.hpp"
#include "sidgff/stats.hpp"

using namespace sidgff;

namespace {

// Sample covariance of two vertices over fields produced by draw(r).
template <class Draw>
PairCheck sample_cov(Draw draw, int reps, int side, Vertex v, Vertex w, double oracle) {
  RunningStats acc;
  std::vector<double> f;
  for (int r = 0; r < reps; ++r) {
    draw(static_cast<std::uint64_t>(r), f);
    acc.add(f[vertex_index(v, side)] * f[vertex_index(w, side)]);
  }
  return {v, w, oracle, acc.mean(), acc.standard_error()};
}

}  // namespace

TEST_CASE("kind and method names round-trip") {
  for (FieldKind k : {FieldKind::dgff, FieldKind::psi, FieldKind::ibrw, FieldKind::mibrw,
                      FieldKind::tmibrw, FieldKind::coupled}) {
    CHECK(parse_field_kind(to_string(k)) == k);
  }
  CHECK(parse_dgff_method(to_string(DgffMethod::precision)) == DgffMethod::precision);
  CHECK_THROWS_AS(parse_field_kind("nope"), ValidationError);
}

TEST_CASE("dgff samplers are seeded and vanish on the boundary") {
  const GridSize g(3);
  for (DgffMethod m : {DgffMethod::cholesky, DgffMethod::precision}) {
    const DgffSampler s(g, m);
    const FieldSample a = s.sample(5);
    const FieldSample b = s.sample(5);
    const FieldSample c = s.sample(6);
    CHECK(a.values == b.values);
    CHECK(a.values != c.values);
    for (int i = 0; i < 64; ++i) {
      if (!is_interior(vertex_at(i, 8), g)) CHECK(a.values[i] == 0.0);
    }
  }
  CHECK_THROWS_AS(DgffSampler(GridSize(4), DgffMethod::cholesky, 8), SizeLimitError);
}

TEST_CASE("dgff covariance matches the Green function") {
  const GridSize g(2);
  const GreenMatrix G = green_matrix(grid_rect(g));
  for (DgffMethod m : {DgffMethod::cholesky, DgffMethod::precision}) {
    const DgffSampler s(g, m);
    auto draw = [&](std::uint64_t r, std::vector<double>& f) { f = s.sample(r).values; };
    for (auto [v, w] : {std::pair{Vertex{1, 1}, Vertex{1, 1}}, std::pair{Vertex{1, 1}, Vertex{2, 2}},
                        std::pair{Vertex{2, 1}, Vertex{1, 1}}}) {
      const PairCheck c = sample_cov(draw, 20000, 4, v, w, G(v, w));
      CHECK(c.within(4.0));
    }
  }
}

TEST_CASE("homogeneous psi is the dgff") {
  const GridSize g(3);
  const PsiSampler psi(StepProfile::homogeneous(), g);
  const DgffSampler dgff(g);
  const FieldSample a = psi.sample(9);
  const FieldSample b = dgff.sample(9);
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-12));
}

TEST_CASE("psi covariance matches the oracle") {
  const GridSize g(3);
  const StepProfile p = named_profile("decreasing2");
  const PsiSampler psi(p, g, DgffMethod::precision);
  const Eigen::MatrixXd C = cov_psi(p, g);
  const InteriorIndex idx(grid_rect(g));
  auto draw = [&](std::uint64_t r, std::vector<double>& f) { f = psi.sample(r).values; };
  for (auto [v, w] : {std::pair{Vertex{3, 3}, Vertex{3, 3}}, std::pair{Vertex{2, 5}, Vertex{3, 4}}}) {
    const PairCheck c = sample_cov(draw, 20000, 8, v, w, C(*idx.index(v), *idx.index(w)));
    CHECK(c.within(4.0));
  }
}

TEST_CASE("ibrw point evaluation agrees with the full field") {
  const GridSize g(3);
  const IbrwSampler s(named_profile("convex2"), g);
  const FieldSample f = s.sample(3);
  const std::vector<Vertex> pts{{0, 0}, {7, 2}, {4, 4}};
  const std::vector<double> at = s.sample_at(3, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(at[i] == f.at(pts[i]));
  // Vertices in the same finest box share every level above it.
  const IbrwCovariance cov(named_profile("convex2"), g);
  auto draw = [&](std::uint64_t r, std::vector<double>& out) { out = s.sample(r).values; };
  const PairCheck c = sample_cov(draw, 20000, 8, {0, 0}, {1, 1}, cov({0, 0}, {1, 1}));
  CHECK(c.within(4.0));
}

TEST_CASE("mibrw cyclic sums equal explicit box enumeration") {
  for (int n = 1; n <= 3; ++n) {
    for (int k0 = 0; k0 <= n; ++k0) {
      const MibrwSampler s(named_profile("three-scale"), GridSize(n), k0, true);
      const FieldSample a = s.sample(17);
      const FieldSample b = s.sample_naive(17);
      REQUIRE(a.values.size() == b.values.size());
      for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-12));
      REQUIRE(a.partial_sums.size() == static_cast<std::size_t>(n - k0 + 1));
      CHECK(a.partial_sums.back() == a.values);
    }
  }
}

TEST_CASE("mibrw covariance matches the oracle") {
  const GridSize g(3);
  const StepProfile p = named_profile("convex2");
  const MibrwSampler tree(p, g);
  const MibrwSpectralSampler spec(p, g);
  const MibrwCovariance cov(p, g);
  auto tree_draw = [&](std::uint64_t r, std::vector<double>& f) { f = tree.sample(r).values; };
  auto spec_draw = [&](std::uint64_t r, std::vector<double>& f) {
    std::vector<double> other;
    spec.sample_pair(r, f, other);
  };
  for (auto [v, w] : {std::pair{Vertex{0, 0}, Vertex{0, 0}}, std::pair{Vertex{1, 2}, Vertex{6, 2}},
                      std::pair{Vertex{3, 3}, Vertex{4, 3}}}) {
    CHECK(sample_cov(tree_draw, 20000, 8, v, w, cov(v, w)).within(4.0));
    CHECK(sample_cov(spec_draw, 20000, 8, v, w, cov(v, w)).within(4.0));
  }
}

TEST_CASE("spectral eigenvalues reproduce the covariance") {
  const GridSize g(3);
  const int N = 8;
  const StepProfile p = named_profile("decreasing2");
  for (int k0 : {0, 2}) {
    const MibrwSpectralSampler spec(p, g, k0);
    const MibrwCovariance cov(p, g, k0);
    const auto& eig = spec.eigenvalues();
    for (int dy = 0; dy < N; ++dy) {
      for (int dx = 0; dx < N; ++dx) {
        double c = 0.0;
        for (int ky = 0; ky < N; ++ky) {
          for (int kx = 0; kx < N; ++kx) {
            c += eig[ky * N + kx] * std::cos(2 * M_PI * (kx * dx + ky * dy) / N);
          }
        }
        CHECK(c / (N * N) == doctest::Approx(cov({0, 0}, {dx, dy})).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("coupled field adds a shared normal") {
  const FieldSample base = MibrwSampler(StepProfile::homogeneous(), GridSize(2)).sample(1);
  std::vector<double> a(16);
  for (int i = 0; i < 16; ++i) a[i] = 0.1 * i;
  const FieldSample c = sample_coupled(base, a, 4);
  CHECK(c.kind == FieldKind::coupled);
  for (int i = 0; i < 16; ++i) CHECK(c.values[i] == doctest::Approx(base.values[i] + a[i] * c.shared_x));
  a[3] = -0.5;
  CHECK_THROWS_AS(sample_coupled(base, a, 4), KappaTooSmall);
}
