#include <doctest.h>

#include <cmath>
#include <random>

#include "sidgff/error.hpp"
#include "sidgff/extremes.hpp"

using namespace sidgff;

TEST_CASE("tail table by hand") {
  const std::vector<double> m{1.0, 2.0, 3.0, 4.0};
  const auto right = tail_table(m, 2.0, {0.0, 1.0});
  CHECK(right[0].count == 3);
  CHECK(right[1].phat == doctest::Approx(0.5));
  CHECK(right[1].ci_lo < 0.5);
  CHECK(right[1].ci_hi > 0.5);
  const auto left = tail_table(m, 2.0, {0.0, 1.0}, false);
  CHECK(left[0].count == 2);
  CHECK(left[1].count == 1);
}

TEST_CASE("uniform grid and summary") {
  const auto g = uniform_grid(1.0, 0.25);
  REQUIRE(g.size() == 5);
  CHECK(g.back() == doctest::Approx(1.0));
  std::vector<double> s;
  for (int i = 0; i <= 100; ++i) s.push_back(i);
  const MaxSummary m = summarize(s);
  CHECK(m.count == 101);
  CHECK(m.mean == doctest::Approx(50.0));
  CHECK(m.q25 == doctest::Approx(25.0));
  CHECK(m.q95 == doctest::Approx(95.0));
}

TEST_CASE("rate fit recovers an exponential tail") {
  std::mt19937_64 rng(4);
  std::exponential_distribution<double> e(2.0);
  std::vector<double> m(200000);
  for (double& x : m) x = e(rng);
  const auto table = tail_table(m, 0.0, uniform_grid(2.0, 0.25));
  const RateFit fit = fit_tail_rate(table, static_cast<std::int64_t>(m.size()));
  CHECK(fit.contains(-2.0));
  CHECK(fit.half_width() < 0.2);
  CHECK(fit.points_used >= 4);
  RateFitOptions strict;
  strict.min_exceedances = 1000000;
  CHECK_THROWS_AS(fit_tail_rate(table, 200000, strict), InsufficientData);
}

TEST_CASE("centring and predicted rates") {
  const StepProfile h = StepProfile::homogeneous();
  CHECK(analytic_centring(FieldKind::psi, h, 6) == doctest::Approx(expected_max(h, 6)));
  CHECK(analytic_centring(FieldKind::mibrw, h, 6) == doctest::Approx(mibrw_centring(h, 6, 6.0)));
  CHECK(predicted_right_rate(FieldKind::psi, h) == doctest::Approx(-2.0));
  CHECK(predicted_right_rate(FieldKind::mibrw, h) == doctest::Approx(-2.0 * std::sqrt(std::log(2.0))));
  CHECK(predicted_right_rate(FieldKind::psi, named_profile("decreasing2")) ==
        doctest::Approx(-2.0 / std::sqrt(1.5)));
}

TEST_CASE("mc_max is independent of the thread count") {
  MaxParams p;
  p.kind = FieldKind::mibrw;
  p.n = 4;
  const auto a = mc_max(p, 64, 3, 1);
  const auto b = mc_max(p, 64, 3, 2);
  CHECK(a == b);
  p.kind = FieldKind::psi;
  p.n = 3;
  CHECK(mc_max(p, 16, 3, 1) == mc_max(p, 16, 3, 2));
}

TEST_CASE("left tail check on a synthetic sample") {
  // Maxima with a Gumbel-type left tail decay around the centring.
  std::mt19937_64 rng(9);
  std::exponential_distribution<double> e(3.0);
  std::vector<double> m(100000);
  for (double& x : m) x = 10.0 - e(rng);
  const LeftTailVerdict v = left_tail_check(m, 10.0, 7, uniform_grid(1.0, 0.1));
  CHECK(v.positive);
  CHECK(v.c == doctest::Approx(3.0).epsilon(0.1));
}
