#include <doctest.h>

#include <atomic>
#include <cmath>

#include "sidgff/rng.hpp"
#include "sidgff/stats.hpp"

using namespace sidgff;

TEST_CASE("running stats and merge") {
  RunningStats a, b, all;
  for (int i = 1; i <= 10; ++i) {
    (i <= 4 ? a : b).add(i);
    all.add(i);
  }
  a.merge(b);
  CHECK(a.count() == 10);
  CHECK(a.mean() == doctest::Approx(5.5));
  CHECK(a.variance() == doctest::Approx(all.variance()));
  CHECK(all.variance() == doctest::Approx(55.0 / 6.0));
  CHECK(all.standard_error() == doctest::Approx(std::sqrt(55.0 / 60.0)));
}

TEST_CASE("normal cdf and quantile") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975));
  for (double p : {1e-6, 0.01, 0.3, 0.5, 0.9, 0.999}) CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
}

TEST_CASE("wilson intervals") {
  const Interval i = wilson_interval(50, 100);
  CHECK(i.lo == doctest::Approx(0.40383).epsilon(1e-4));
  CHECK(i.hi == doctest::Approx(0.59617).epsilon(1e-4));
  CHECK(wilson_interval(0, 100).lo == doctest::Approx(0.0));
  CHECK(wilson_upper(0, 100) > 0.0);
  CHECK(wilson_lower(100, 100) < 1.0);
  CHECK(wilson_upper(30, 100) < wilson_interval(30, 100).hi);
}

TEST_CASE("least squares and quantiles") {
  const LinearFit f = least_squares({0, 1, 2, 3}, {1, 3, 5, 7});
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.slope_se == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(sorted_quantile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
  CHECK(interquartile_range({4, 1, 3, 2, 5}) == doctest::Approx(2.0));
}

TEST_CASE("keyed randomness") {
  CHECK(derive_key(1, {2, 3}) == derive_key(1, {2, 3}));
  CHECK(derive_key(1, {2, 3}) != derive_key(1, {3, 2}));
  CHECK(keyed_normal(5) == keyed_normal(5));
  RunningStats s;
  for (std::uint64_t k = 0; k < 100000; ++k) s.add(keyed_normal(derive_key(7, {k})));
  CHECK(std::abs(s.mean()) < 0.02);
  CHECK(s.variance() == doctest::Approx(1.0).epsilon(0.02));
  NormalStream a(42), b(42);
  std::vector<double> x(10);
  a.fill(x.data(), x.size());
  for (double v : x) CHECK(v == b());
  for (int i = 0; i < 1000; ++i) {
    const double u = keyed_uniform(derive_key(3, {static_cast<std::uint64_t>(i)}));
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("parallel for visits each index once") {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK(default_threads() >= 1);
}
