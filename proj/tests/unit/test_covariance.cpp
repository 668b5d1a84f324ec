#include <doctest.h>

#include <cmath>

#include "sidgff/covariance.hpp"
#include "sidgff/error.hpp"

using namespace sidgff;

TEST_CASE("homogeneous psi covariance is the Green function") {
  const GridSize g(3);
  const Eigen::MatrixXd C = cov_psi(StepProfile::homogeneous(), g);
  const GreenMatrix G = green_matrix(grid_rect(g));
  CHECK((C - G.values()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("psi subset covariance agrees with the dense route") {
  const GridSize g(3);
  const StepProfile p = named_profile("three-scale");
  const Eigen::MatrixXd C = cov_psi(p, g);
  const InteriorIndex idx(grid_rect(g));
  const std::vector<Vertex> pts{{1, 1}, {3, 4}, {6, 6}, {0, 3}, {4, 4}};
  const Eigen::MatrixXd S = cov_psi_subset(p, g, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = 0; j < pts.size(); ++j) {
      const auto a = idx.index(pts[i]);
      const auto b = idx.index(pts[j]);
      const double ref = (a && b) ? C(*a, *b) : 0.0;
      CHECK(S(i, j) == doctest::Approx(ref).epsilon(1e-10));
    }
  }
}

TEST_CASE("dgff block matches the Green matrix") {
  const GridSize g(3);
  const GreenMatrix G = green_matrix(grid_rect(g));
  const std::vector<Vertex> src{{2, 2}, {5, 1}};
  const std::vector<Vertex> tgt{{2, 2}, {6, 6}, {0, 4}};
  const Eigen::MatrixXd B = cov_dgff_block(g, src, tgt);
  for (std::size_t i = 0; i < src.size(); ++i) {
    for (std::size_t j = 0; j < tgt.size(); ++j) CHECK(B(i, j) == doctest::Approx(G(src[i], tgt[j])).epsilon(1e-10));
  }
}

TEST_CASE("ibrw covariance closed form") {
  const StepProfile p = named_profile("decreasing2");
  const GridSize g(4);
  const IbrwCovariance cov(p, g);
  double var = 0.0;
  for (int k = 0; k <= 4; ++k) var += p.sigma2((4.0 - k) / 4);
  CHECK(cov.variance() == doctest::Approx(std::log(2.0) * var));
  // (0,0) and (2,0) share BD_k boxes for k >= 2 only.
  double shared = 0.0;
  for (int k = 2; k <= 4; ++k) shared += p.sigma2((4.0 - k) / 4);
  CHECK(cov({0, 0}, {2, 0}) == doctest::Approx(std::log(2.0) * shared));
  CHECK(cov({0, 0}, {2, 0}) == cov({2, 0}, {0, 0}));
  const IbrwCovariance trunc(p, g, 2);
  CHECK(trunc.variance() ==
        doctest::Approx(std::log(2.0) * (p.sigma2(0.0) + p.sigma2(0.25) + p.sigma2(0.5))));
}

TEST_CASE("mibrw covariance closed form and rho") {
  const StepProfile p = named_profile("convex2");
  const GridSize g(3);
  for (int k0 : {0, 1, 3}) {
    const MibrwCovariance cov(p, g, k0);
    double var = 0.0;
    for (int k = k0; k <= 3; ++k) var += p.sigma2((3.0 - k) / 3);
    CHECK(cov.variance() == doctest::Approx(var));
    for (int i = 0; i < 64; i += 7) {
      const Vertex v = vertex_at(i, 8);
      const Vertex w{(v.x + 3) % 8, (v.y + 5) % 8};
      double direct = 0.0;
      for (int k = k0; k <= 3; ++k) {
        direct += std::ldexp(1.0, -2 * k) * p.sigma2((3.0 - k) / 3) * common_box_count(v, w, k, g);
      }
      CHECK(cov(v, w) == doctest::Approx(direct));
      CHECK(cov.rho(v, w) == doctest::Approx(2 * (cov.variance() - cov(v, w))));
    }
  }
}

TEST_CASE("deviation series verdict") {
  DeviationSeries flat{"flat", {{3, 1.0}, {4, 1.01}, {5, 0.99}, {6, 1.0}}};
  finalize_series(flat);
  CHECK(flat.bounded);
  CHECK(std::abs(flat.slope) < 0.01);
  DeviationSeries growing{"grow", {{3, 1.0}, {4, 2.0}, {5, 3.0}, {6, 4.0}}};
  finalize_series(growing);
  CHECK_FALSE(growing.bounded);
  CHECK(growing.slope == doctest::Approx(1.0));
  DeviationSeries abs{"abs", {{4, 0.1}, {5, 0.2}, {6, 0.3}}};
  finalize_series(abs, 0.05, 0.05);
  CHECK(abs.threshold == 0.05);
  CHECK_FALSE(abs.bounded);
}

TEST_CASE("cov comp items at small n") {
  CHECK(std::isfinite(cov_comp_item_i(3)));
  CHECK(cov_comp_item_ii(named_profile("convex2"), 3) >= 0.0);
  CHECK(cov_comp_item_iii(3, 8, 1) >= 0.0);
  CHECK(cov_comp_item_iv(named_profile("convex2"), 3) >= 0.0);
  CovCompOptions opt;
  opt.ns = {3, 4};
  opt.iv_ns = {3};
  opt.items = {"i", "ii"};
  opt.resume["i"][3] = 0.123;
  int calls = 0;
  opt.on_result = [&](const std::string&, int, double) { ++calls; };
  const CovarianceReport r = verify_cov_comp(named_profile("convex2"), opt);
  REQUIRE(r.items.size() == 2);
  CHECK(r.items[0].deviation.at(3) == 0.123);
  CHECK(calls == 3);
}

TEST_CASE("increment lemma on a small grid") {
  const IncrementLemmaResult r = verify_increment_lemma(named_profile("decreasing2"), GridSize(5), 0.3, 50);
  CHECK(r.checked_pairs > 0);
  CHECK(r.checked_pairs <= 50);
  CHECK(r.same_vertex_cross < 1e-8);
  CHECK(std::isfinite(r.sup_deviation));
}

TEST_CASE("empirical covariance helper") {
  const GridSize g(2);
  const MibrwCovariance cov(StepProfile::homogeneous(), g);
  const MibrwSampler s(StepProfile::homogeneous(), g);
  const auto pairs = random_pairs(g, 6, 3, false);
  CHECK(pairs.size() == 6);
  const auto checks = empirical_covariance(
      [&](std::uint64_t r, std::vector<double>& out) { out = s.sample(r).values; }, g, pairs,
      [&](Vertex v, Vertex w) { return cov(v, w); }, 20000, 2);
  for (const PairCheck& c : checks) CHECK(c.within(4.0));
  const auto again = empirical_covariance(
      [&](std::uint64_t r, std::vector<double>& out) { out = s.sample(r).values; }, g, pairs,
      [&](Vertex v, Vertex w) { return cov(v, w); }, 20000, 1);
  for (std::size_t i = 0; i < checks.size(); ++i) CHECK(checks[i].empirical == again[i].empirical);
  for (const auto& [v, w] : random_pairs(GridSize(3), 50, 9, true)) {
    CHECK(is_interior(v, GridSize(3)));
    CHECK(is_interior(w, GridSize(3)));
  }
}
