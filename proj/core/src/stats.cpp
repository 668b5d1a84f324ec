#include "sidgff/stats.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <numbers>

#include "sidgff/error.hpp"

namespace sidgff {

void RunningStats::add(double x) {
  ++count_;
  const double d = x - mean_;
  mean_ += d / count_;
  m2_ += d * (x - mean_);
}

void RunningStats::merge(const RunningStats& o) {
  if (o.count_ == 0) return;
  if (count_ == 0) {
    *this = o;
    return;
  }
  const double total = static_cast<double>(count_ + o.count_);
  const double d = o.mean_ - mean_;
  mean_ += d * o.count_ / total;
  m2_ += o.m2_ + d * d * count_ * static_cast<double>(o.count_) / total;
  count_ += o.count_;
}

double RunningStats::variance() const {
  return count_ > 1 ? m2_ / (count_ - 1) : 0.0;
}

double RunningStats::standard_error() const {
  return count_ > 1 ? std::sqrt(variance() / count_) : 0.0;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("normal_quantile needs p in (0, 1)");
  }
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

namespace {

Interval wilson(std::int64_t k, std::int64_t n, double z) {
  if (n <= 0) {
    return {0.0, 1.0};
  }
  const double p = static_cast<double>(k) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

}  // namespace

Interval wilson_interval(std::int64_t k, std::int64_t n, double conf) {
  return wilson(k, n, normal_quantile(0.5 + conf / 2.0));
}

double wilson_upper(std::int64_t k, std::int64_t n, double conf) {
  return wilson(k, n, normal_quantile(conf)).hi;
}

double wilson_lower(std::int64_t k, std::int64_t n, double conf) {
  return wilson(k, n, normal_quantile(conf)).lo;
}

LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y,
                        const std::vector<double>& w) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n || (!w.empty() && w.size() != n)) {
    throw InsufficientData("least squares needs at least two matched points");
  }
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    sw += wi;
    sx += wi * x[i];
    sy += wi * y[i];
  }
  const double mx = sx / sw;
  const double my = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    sxx += wi * (x[i] - mx) * (x[i] - mx);
    sxy += wi * (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) {
    throw InsufficientData("least squares needs at least two distinct abscissae");
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    rss += wi * r * r;
  }
  fit.slope_se = n > 2 ? std::sqrt(rss / (n - 2) / sxx) : 0.0;
  return fit;
}

double sorted_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) {
    throw InsufficientData("quantile of an empty sample");
  }
  const double h = (sorted.size() - 1) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

double interquartile_range(std::vector<double> sample) {
  std::sort(sample.begin(), sample.end());
  return sorted_quantile(sample, 0.75) - sorted_quantile(sample, 0.25);
}

int default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace sidgff
