#pragma once

// Monte Carlo maxima, tail-rate fits and the tightness experiments.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sidgff/profile.hpp"
#include "sidgff/samplers.hpp"
#include "sidgff/stats.hpp"

namespace sidgff {

struct MaxParams {
  FieldKind kind = FieldKind::psi;
  StepProfile profile = StepProfile::homogeneous();
  int n = 4;
  int k0 = 0;
  DgffMethod method = DgffMethod::precision;
  /// MIBRW/TMIBRW maxima through the exact spectral sampler.
  bool spectral = true;
  int max_side = kDefaultMaxDenseSide;
};

/// Maxima over V_N of `replicates` independent fields; replicate r uses a key
/// derived from (seed, r), so results do not depend on the thread count.
std::vector<double> mc_max(const MaxParams& params, std::int64_t replicates, std::uint64_t seed,
                           int threads = 1);

struct MaxSummary {
  std::int64_t count = 0;
  double mean = 0.0;
  double variance = 0.0;
  double q05 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q95 = 0.0;
};

MaxSummary summarize(const std::vector<double>& sample);

struct TailPoint {
  double x = 0.0;
  std::int64_t count = 0;
  double phat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

/// P-hat(max >= centring + x) (right) or P-hat(max <= centring - x) (left)
/// over one shared pool of maxima, with Wilson intervals.
std::vector<TailPoint> tail_table(const std::vector<double>& maxima, double centring,
                                  const std::vector<double>& xs, bool right = true,
                                  double conf = 0.95);

/// {0, step, 2 step, ...} up to hi inclusive.
std::vector<double> uniform_grid(double hi, double step);

struct RateFit {
  double rate = 0.0;  ///< fitted slope of log P-hat against x
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double target = 0.0;
  bool prefactor = false;
  std::size_t points_used = 0;
  double half_width() const { return 0.5 * (ci_hi - ci_lo); }
  bool contains(double t) const { return t >= ci_lo && t <= ci_hi; }
};

struct RateFitOptions {
  bool prefactor = false;  ///< fit log(P / (1 + x)) instead of log P
  std::int64_t min_exceedances = 50;
  std::size_t min_points = 4;
  int bootstrap = 400;
  std::uint64_t seed = 1;
  double conf = 0.95;
};

/// Weighted least squares of log P-hat on x over grid points with enough
/// exceedances (weights count / (1 - p), the inverse delta-method variance).
/// The interval uses the larger of a multinomial bootstrap standard error and
/// the residual-scale regression standard error, so lack of fit widens it.
/// Throws InsufficientData when fewer than min_points qualify.
RateFit fit_tail_rate(const std::vector<TailPoint>& table, std::int64_t replicates,
                      const RateFitOptions& opt = {});

struct TailReport {
  FieldKind kind = FieldKind::psi;
  int n = 0;
  std::int64_t replicates = 0;
  double centring = 0.0;
  MaxSummary summary;
  std::vector<TailPoint> right;
  std::optional<RateFit> right_fit;
  std::vector<TailPoint> left;
  std::optional<RateFit> left_fit;
};

/// Centring for a field kind: m_N for psi, DGFF and IBRW; M*_N for MIBRW.
double analytic_centring(FieldKind kind, const StepProfile& p, int n);
/// Predicted right-tail rate: -2 / sigma-bar_1, times sqrt(log 2) for MIBRW.
double predicted_right_rate(FieldKind kind, const StepProfile& p);

struct TailOptions {
  std::vector<double> right_grid;  ///< empty: {0, 0.25, ..., floor(sqrt(log N))}
  std::vector<double> left_grid;   ///< empty: step 0.1 up to (log log N)^{2/3}
  bool recentre = false;           ///< centre at the empirical median instead
  bool fit_left = true;
  RateFitOptions fit;
};

/// Fits are left empty when too few grid points have enough exceedances.
TailReport right_tail_rate(const MaxParams& params, const std::vector<double>& maxima,
                           const TailOptions& opt = {});

struct LeftTailVerdict {
  RateFit fit;
  double c = 0.0;  ///< -rate
  bool positive = false;  ///< c > 0 with the interval excluding 0
};

LeftTailVerdict left_tail_check(const std::vector<double>& maxima, double centring, int n,
                                const std::vector<double>& grid = {},
                                const RateFitOptions& opt = {});

struct FirstOrderRow {
  int n = 0;
  double mean_max = 0.0;
  double se = 0.0;
  double ratio = 0.0;  ///< E[max] / (2 log N)
  double gap = 0.0;    ///< E[max] - m_N
};

struct FirstOrderTable {
  double target = 0.0;  ///< int_0^1 sigma-bar
  std::vector<FirstOrderRow> rows;
};

FirstOrderTable first_order_check(const StepProfile& p, const std::vector<int>& ns,
                                  std::int64_t replicates, std::uint64_t seed, int threads = 1);

struct DekkingHost {
  int n = 0;
  double lhs = 0.0;  ///< E|psi*_N - psi~*_N|
  double lhs_se = 0.0;
  double rhs = 0.0;  ///< 2 E[psi*_{4N} - psi*_N]
  double rhs_se = 0.0;
  /// lhs - z se <= rhs + z se.
  bool holds = false;
};

DekkingHost dekking_host_gap(const StepProfile& p, int n, std::int64_t replicates,
                             std::uint64_t seed, int threads = 1, double conf = 0.95);

struct IqrTrend {
  std::vector<int> ns;
  std::vector<double> iqr;
  std::vector<double> iqr_se;
  double slope = 0.0;
  double slope_se = 0.0;
  double threshold = 0.05;
  /// Lower end of the slope interval is at most the threshold.
  bool non_growing = false;
};

/// Interquartile range of psi* - m_N per n with bootstrap standard errors.
IqrTrend iqr_trend(const StepProfile& p, const std::vector<int>& ns, std::int64_t replicates,
                   std::uint64_t seed, int threads = 1, double threshold = 0.05);

}  // namespace sidgff
