#pragma once

// Small statistical toolkit shared by the Monte Carlo experiments.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <thread>
#include <vector>

namespace sidgff {

/// Welford accumulator.
class RunningStats {
 public:
  void add(double x);
  void merge(const RunningStats& other);
  std::int64_t count() const { return count_; }
  double mean() const { return mean_; }
  double variance() const;  ///< unbiased
  double standard_error() const;

 private:
  std::int64_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

double normal_cdf(double x);
double normal_quantile(double p);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double half_width() const { return 0.5 * (hi - lo); }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

/// Wilson score interval for a binomial proportion at two-sided level conf.
Interval wilson_interval(std::int64_t successes, std::int64_t trials, double conf = 0.95);
/// One-sided Wilson bounds at level conf.
double wilson_upper(std::int64_t successes, std::int64_t trials, double conf = 0.95);
double wilson_lower(std::int64_t successes, std::int64_t trials, double conf = 0.95);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};

/// Weighted least squares y ~ a + b x (weights default to 1).
LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y,
                        const std::vector<double>& w = {});

/// Linear-interpolation quantile (type 7) of an already sorted sample.
double sorted_quantile(const std::vector<double>& sorted, double p);
double interquartile_range(std::vector<double> sample);

/// Runs f(i) for i in [0, count) on up to `threads` workers. Each index is
/// processed exactly once; f must only write to index-owned state.
template <class F>
void parallel_for(std::size_t count, int threads, F&& f) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(threads < 1 ? 1 : threads, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < count; i += workers) f(i);
    });
  }
  for (auto& th : pool) th.join();
}

/// Worker count used when a caller passes threads = 0.
int default_threads();

}  // namespace sidgff
