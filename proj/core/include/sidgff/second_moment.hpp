#pragma once

// Path events for the MIBRW, the counter h_N(y) and its moments, and the
// Paley-Zygmund lower bound on the right tail of max S.
//
// Path convention: the path of v at level l is the sum of the l coarsest
// MIBRW levels, S_v(l) = partial_sums[l - 1] and S_v(0) = 0, so that
// Var S_v(l) = n I(l / n) whenever the profile breakpoints lie on the level
// grid.

#include <cstdint>
#include <string>
#include <vector>

#include "sidgff/lattice.hpp"
#include "sidgff/profile.hpp"
#include "sidgff/samplers.hpp"
#include "sidgff/stats.hpp"

namespace sidgff {

struct PathEventSpec {
  StepProfile profile = StepProfile::homogeneous();
  EffectiveProfile effective;
  int n = 0;
  double y = 0.0;
  double cf = 1.0;
  /// Rounded effective scale levels 0 = t^0 < t^1 < ... < t^m = n.
  std::vector<int> t;
  /// Delta M*(t^i), i = 1..m (index 0 unused).
  std::vector<double> delta_m;
  /// Per level l = 0..n: scale index i with t^{i-1} < l <= t^i, the optimal
  /// path coefficient (s = coef * x) and the tube half-width f_{l,n}.
  std::vector<int> scale;
  std::vector<double> coef;
  std::vector<double> half_width;

  static PathEventSpec make(const StepProfile& p, int n, double y, double cf);

  std::size_t m() const { return delta_m.size() - 1; }
  /// I_n^y(i), 1 <= i <= m; y enters only the first interval.
  Interval interval(std::size_t i) const;
  /// V'_N = V_{N/2} + (N/4, N/4).
  Rect window() const;
  std::int64_t window_size() const;
};

/// Whether the increment and tube constraints of C_v^{N,y}(r) hold. Interval
/// constraints of scale i count once t^i <= r; tube constraints at levels
/// t^{i-1} < l < t^i count once l <= r. The sample must carry partial sums.
bool path_event(const FieldSample& sample, Vertex v, const PathEventSpec& spec, int r);
/// path_event at r = n.
bool path_event(const FieldSample& sample, Vertex v, const PathEventSpec& spec);

/// Vertices of V'_N satisfying C_v^{N,y}(n); h_N(y) is their number.
std::vector<Vertex> path_event_hits(const FieldSample& sample, const PathEventSpec& spec);

enum class MomentMethod { monte_carlo, semi_analytic, brute_force };

std::string to_string(MomentMethod m);
MomentMethod parse_moment_method(const std::string& name);

struct MomentEstimate {
  double value = 0.0;
  double se = 0.0;
  MomentMethod method = MomentMethod::monte_carlo;
};

struct MomentOptions {
  std::int64_t replicates = 10000;
  std::uint64_t seed = 1;
  int threads = 1;
};

/// Exact P(S_v(n) in I_n^y(1)) for m = 1.
double endpoint_probability(const PathEventSpec& spec);
/// Var[S_v(k) - s_{k,n}(S_v(n))] = n I(k/n)(1 - I(k/n)/I(1)) for m = 1.
double bridge_variance(const StepProfile& p, int n, int k);
/// P(tube | S_v(n) in I_n^y(1)) by Monte Carlo over the Gaussian bridge.
MomentEstimate tube_probability(const PathEventSpec& spec, const MomentOptions& opt = {});

/// Smallest C_f in {1, 2, 4, 8} whose tube probability at n = 6, y = 0 is at
/// least 0.5 (8 if none is).
double default_cf(const StepProfile& p);

/// E[h_N(y)]. monte_carlo and brute_force sample the MIBRW (cyclic or naive
/// box sums); semi_analytic integrates the endpoint exactly against bridge
/// draws and throws Unsupported unless m = 1.
MomentEstimate first_moment(const PathEventSpec& spec, MomentMethod method,
                            const MomentOptions& opt = {});

struct SecondMomentEstimate {
  double y = 0.0;
  MomentEstimate first;
  MomentEstimate second;
  /// E of the number of ordered pairs (v, w) in V'_N, both hit, with
  /// r(v, w) = r, for r = 0..n (r = n is v = w).
  std::vector<double> by_r;
  std::vector<double> by_r_se;
  /// Covariance of the per-replicate (h, h^2) estimators.
  double cov_first_second = 0.0;
  /// Direct estimate of P(max_{V_N} S > M*_N + y) from the same samples.
  std::int64_t tail_hits = 0;
  std::int64_t replicates = 0;
  /// max(0, (E h^2 - (E h)^2 - E h) / E h).
  double c_tilde() const;
};

/// Monte Carlo E[h], E[h^2] and the r-decomposition for every y from one pool
/// of MIBRW samples (replicate r keyed by (seed, r)).
std::vector<SecondMomentEstimate> moment_sweep(const StepProfile& p, int n, double cf,
                                               const std::vector<double>& ys,
                                               const MomentOptions& opt = {},
                                               MomentMethod method = MomentMethod::monte_carlo);

SecondMomentEstimate second_moment(const PathEventSpec& spec, MomentMethod method,
                                   const MomentOptions& opt = {});

struct SecondMomentCheck {
  double c_tilde = 0.0;
  /// E h^2 - (E h)^2 - (1 + C-tilde) E h and its delta-method s.e.
  double excess = 0.0;
  double excess_se = 0.0;
  bool holds = false;  ///< excess - z se <= 0
};

/// The second-moment inequality at a given C-tilde.
SecondMomentCheck second_moment_check(const SecondMomentEstimate& est, double c_tilde,
                                      double conf = 0.95);

struct PaleyZygmund {
  double bound = 0.0;  ///< (E h)^2 / E h^2
  double se = 0.0;
  double direct = 0.0;  ///< P-hat(max S > M* + y)
  Interval direct_ci;
  /// bound - z se <= upper end of the direct interval.
  bool holds = false;
};

/// Throws InsufficientData when the first moment estimate is zero.
PaleyZygmund paley_zygmund_bound(const SecondMomentEstimate& est, double conf = 0.95);

}  // namespace sidgff
