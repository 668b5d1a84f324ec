#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "sidgff/error.hpp"
#include "sidgff/profile.hpp"

using namespace sidgff;

namespace {

struct Point {
  double x, y;
};

std::vector<Point> breakpoints(const StepProfile& p) {
  std::vector<Point> pts{{0.0, 0.0}};
  for (double l : p.lambdas()) pts.push_back({l, p.integrated(l)});
  return pts;
}

// Least concave majorant at s: the largest chord value over all pairs of
// breakpoints bracketing s.
double brute_hull(const std::vector<Point>& pts, double s) {
  double best = -1.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i; j < pts.size(); ++j) {
      if (pts[i].x > s || pts[j].x < s) continue;
      const double v = pts[j].x == pts[i].x
                           ? pts[i].y
                           : pts[i].y + (pts[j].y - pts[i].y) * (s - pts[i].x) / (pts[j].x - pts[i].x);
      best = std::max(best, v);
    }
  }
  return best;
}

StepProfile random_profile(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(1, 6);
  std::uniform_real_distribution<double> u(0.05, 2.0);
  const int M = count(rng);
  std::vector<double> cuts;
  while (static_cast<int>(cuts.size()) < M - 1) {
    const double c = std::round(std::uniform_real_distribution<double>(0.02, 0.98)(rng) * 1000) / 1000;
    if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.push_back(1.0);
  std::vector<double> sig(M);
  for (double& s : sig) s = u(rng);
  return StepProfile(sig, cuts);
}

}  // namespace

TEST_CASE("integrated variance examples") {
  const StepProfile h = StepProfile::homogeneous();
  for (double s : {0.0, 0.3, 0.77, 1.0}) CHECK(integrated_variance(h, 0.0, s) == doctest::Approx(s));
  const StepProfile d = StepProfile::from_variances({1.5, 0.5}, {0.5, 1.0});
  CHECK(integrated_variance(d, 0.0, 0.5) == doctest::Approx(0.75));
  CHECK(integrated_variance(d, 0.25, 0.75) == doctest::Approx(0.5));
  CHECK_THROWS_AS(integrated_variance(d, 0.6, 0.5), RangeError);
  CHECK_THROWS_AS(integrated_variance(d, 0.0, 1.5), RangeError);
}

TEST_CASE("profile validation and normalization") {
  const StepProfile p({2.0, 2.0}, {0.5, 1.0});
  CHECK(p.integrated(1.0) == doctest::Approx(1.0));
  CHECK(p.sigma(0.2) == doctest::Approx(1.0));
  CHECK(p.rescale_factor() == doctest::Approx(0.5));
  CHECK_THROWS_AS(StepProfile({2.0}, {1.0}, Normalization::strict), ValidationError);
  CHECK_THROWS_AS(StepProfile({1.0, 1.0}, {0.6, 0.5}), ValidationError);
  CHECK_THROWS_AS(StepProfile({1.0}, {0.9}), ValidationError);
  CHECK_THROWS_AS(StepProfile({0.0, 0.0}, {0.5, 1.0}), ValidationError);
  CHECK_THROWS_AS(StepProfile({-1.0, 1.0}, {0.5, 1.0}), ValidationError);
  // Right continuity at breakpoints.
  const StepProfile c = named_profile("convex2");
  CHECK(c.sigma2(0.5) == doctest::Approx(1.5));
  CHECK(c.sigma2(0.4999) == doctest::Approx(0.5));
  CHECK(c.sigma2(1.0) == doctest::Approx(1.5));
}

TEST_CASE("effective profile examples") {
  const EffectiveProfile dec = effective_profile(named_profile("decreasing2"));
  CHECK(dec.m() == 2);
  CHECK(dec.weights == std::vector<int>{3, 3});
  CHECK(dec.bar_sigmas[0] * dec.bar_sigmas[0] == doctest::Approx(1.5));

  const EffectiveProfile conv = effective_profile(named_profile("convex2"));
  CHECK(conv.m() == 1);
  CHECK(conv.bar_sigmas[0] == doctest::Approx(1.0));
  CHECK(conv.bar_lambdas.back() == 1.0);
  CHECK(conv.weights == std::vector<int>{1});

  const EffectiveProfile hom = effective_profile(StepProfile::homogeneous());
  CHECK(hom.m() == 1);
  CHECK(hom.weights == std::vector<int>{3});

  CHECK(effective_profile(named_profile("three-scale")).m() == 3);
}

TEST_CASE("hull matches brute force on random profiles") {
  std::mt19937_64 rng(20240611);
  for (int trial = 0; trial < 1000; ++trial) {
    const StepProfile p = random_profile(rng);
    const EffectiveProfile e = effective_profile(p);
    const auto pts = breakpoints(p);
    for (std::size_t j = 0; j < e.m(); ++j) {
      REQUIRE(e.bar_lambdas[j + 1] == doctest::Approx(p.lambdas()[e.pis[j] - 1]).epsilon(1e-15));
      if (j > 0) REQUIRE(e.bar_sigmas[j] <= e.bar_sigmas[j - 1]);
      REQUIRE(std::abs(e.integrated(e.bar_lambdas[j + 1]) - p.integrated(e.bar_lambdas[j + 1])) < 1e-12);
    }
    for (int k = 0; k <= 1000; ++k) {
      const double s = k / 1000.0;
      REQUIRE(std::abs(e.integrated(s) - brute_hull(pts, s)) < 1e-12);
      REQUIRE(e.integrated(s) >= p.integrated(s) - 1e-12);
    }
  }
}

TEST_CASE("effective profile is idempotent") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const EffectiveProfile e = effective_profile(random_profile(rng));
    const EffectiveProfile again = effective_profile(e.as_step());
    REQUIRE(again.m() == e.m());
    for (std::size_t j = 0; j < e.m(); ++j) {
      CHECK(again.bar_sigmas[j] == doctest::Approx(e.bar_sigmas[j]).epsilon(1e-12));
      CHECK(again.weights[j] == 3);
    }
  }
}

TEST_CASE("expected max values") {
  const double log2 = std::log(2.0);
  CHECK(std::abs(expected_max(StepProfile::homogeneous(), 10) - (20 * log2 - 0.75 * std::log(10.0))) < 1e-9);
  CHECK(expected_max(named_profile("convex2"), 10) == doctest::Approx(13.287298).epsilon(1e-7));
  CHECK_THROWS_AS(expected_max(StepProfile::homogeneous(), 1), DomainError);
  // First-order constant: 2 log 2 n sum sigma-bar dlambda = 2 log N int sigma-bar.
  const StepProfile p = named_profile("three-scale");
  const EffectiveProfile e = effective_profile(p);
  double first = 0.0;
  for (std::size_t j = 0; j < e.m(); ++j) {
    first += 2 * log2 * e.bar_sigmas[j] * (e.bar_lambdas[j + 1] - e.bar_lambdas[j]) * 12;
  }
  CHECK(first == doctest::Approx(2 * 12 * log2 * e.as_step().integrated_sigma(1.0)));
  // m_{4N} - m_N stays bounded for sigma = 1.
  for (int n = 2; n <= 18; ++n) {
    const double d = expected_max(StepProfile::homogeneous(), n + 2) - expected_max(StepProfile::homogeneous(), n);
    CHECK(d == doctest::Approx(4 * log2 - 0.75 * std::log((n + 2.0) / n)));
  }
}

TEST_CASE("mibrw centring") {
  const StepProfile h = StepProfile::homogeneous();
  CHECK(mibrw_centring(h, 10, 0.0) == 0.0);
  CHECK(mibrw_centring(h, 10, 10.0) == doctest::Approx(expected_max(h, 10) / std::sqrt(std::log(2.0))));
  CHECK(mibrw_centring(h, 10, 10.0) == doctest::Approx(14.576827).epsilon(1e-7));
  CHECK_THROWS_AS(mibrw_centring(h, 10, 10.5), RangeError);
  const StepProfile d = named_profile("decreasing2");
  double prev = 0.0;
  for (int t = 1; t <= 10; ++t) {
    const double m = mibrw_centring(d, 10, t);
    CHECK(m > prev);
    prev = m;
  }
}

TEST_CASE("optimal path and barrier") {
  const StepProfile c = named_profile("convex2");
  CHECK(optimal_path(c, 10, 0, 3.0) == 0.0);
  CHECK(optimal_path(c, 10, 10, 3.0) == doctest::Approx(3.0));
  CHECK(optimal_path(c, 10, 5, 10.0) == doctest::Approx(2.5));
  const StepProfile d = named_profile("decreasing2");
  CHECK(optimal_path(d, 10, 5, 1.7) == doctest::Approx(1.7));

  const StepProfile h = StepProfile::homogeneous();
  CHECK(barrier(h, 10, 0, 2.0) == 0.0);
  for (int k = 1; k <= 10; ++k) CHECK(barrier(h, 10, k, 2.0) == doctest::Approx(2.0 * std::pow(k, 2.0 / 3.0)));
  CHECK(barrier(c, 10, 10, 1.0) == 0.0);
  CHECK(barrier(c, 10, 7, 1.0) == doctest::Approx(std::pow(1.5 * 3, 2.0 / 3.0)));
  for (const char* name : {"convex2", "decreasing2", "three-scale"}) {
    const StepProfile p = named_profile(name);
    for (double k = 0.0; k <= 12.0; k += 0.25) CHECK(barrier(p, 12, k, 1.0) >= 0.0);
  }
}

TEST_CASE("comparison profile") {
  const ComparisonProfile one = build_comparison_profile(StepProfile::homogeneous(), 8, 2);
  CHECK(one.single_scale);
  CHECK(one.sigma_tilde.sigma(0.3) == doctest::Approx(1.0));

  const StepProfile d = named_profile("decreasing2");
  const ComparisonProfile cp = build_comparison_profile(d, 32, 8);
  CHECK(cp.sigma_tilde.integrated(1.0) == doctest::Approx(1.0));
  CHECK(effective_profile(cp.sigma_tilde).bar_sigmas[0] ==
        doctest::Approx(effective_profile(d).bar_sigmas[0]));
  for (int x = 0; x <= 32; ++x) {
    const double lhs = 40 * cp.sigma_tilde.integrated((32.0 - x) / 40);
    const double rhs = 32 * d.integrated((32.0 - x) / 32);
    CHECK(lhs <= rhs + 1e-9);
  }
  CHECK(cp.domination_margin <= 1e-9);
}
