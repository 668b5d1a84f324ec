#include "sidgff/extremes.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include "sidgff/error.hpp"
#include "sidgff/rng.hpp"

namespace sidgff {

namespace {

constexpr std::uint64_t kTagMax = 0x3A;

double max_with_boundary(const Eigen::VectorXd& interior, bool has_boundary) {
  double m = interior.size() > 0 ? interior.maxCoeff() : 0.0;
  return has_boundary ? std::max(m, 0.0) : m;
}

// Resamples the bins implied by non-increasing cumulative counts.
std::vector<std::int64_t> resample_counts(const std::vector<std::int64_t>& counts,
                                          std::int64_t total, std::mt19937_64& rng) {
  const std::size_t m = counts.size();
  std::vector<std::int64_t> bins(m + 1);
  bins[0] = total - counts[0];
  for (std::size_t i = 1; i < m; ++i) bins[i] = counts[i - 1] - counts[i];
  bins[m] = counts[m - 1];
  std::int64_t left = total;
  std::int64_t mass = total;
  std::vector<std::int64_t> drawn(m + 1, 0);
  for (std::size_t i = 0; i <= m && left > 0; ++i) {
    if (mass <= 0) break;
    const double prob = std::clamp(static_cast<double>(bins[i]) / mass, 0.0, 1.0);
    std::binomial_distribution<std::int64_t> b(left, prob);
    drawn[i] = i == m ? left : b(rng);
    left -= drawn[i];
    mass -= bins[i];
  }
  std::vector<std::int64_t> out(m);
  std::int64_t acc = drawn[m];
  for (std::size_t i = m; i-- > 0;) {
    out[i] = acc;
    acc += drawn[i];
  }
  return out;
}

struct FitInput {
  std::vector<double> x, y, w;
};

FitInput fit_input(const std::vector<double>& xs, const std::vector<std::int64_t>& counts,
                   std::int64_t total, bool prefactor, std::int64_t min_count) {
  FitInput f;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double p = static_cast<double>(counts[i]) / total;
    if (counts[i] < std::max<std::int64_t>(1, min_count) || p >= 1.0) continue;
    f.x.push_back(xs[i]);
    f.y.push_back(std::log(p) - (prefactor ? std::log1p(xs[i]) : 0.0));
    f.w.push_back(counts[i] / (1.0 - p));
  }
  return f;
}

}  // namespace

std::vector<double> mc_max(const MaxParams& params, std::int64_t replicates, std::uint64_t seed,
                           int threads) {
  if (replicates < 1) throw ValidationError("replicates must be >= 1");
  if (params.n < 1) throw RangeError("sampling needs n >= 1");
  const GridSize g(params.n);
  std::vector<double> out(static_cast<std::size_t>(replicates));
  auto key = [&](std::int64_t r) { return derive_key(seed, {kTagMax, static_cast<std::uint64_t>(r)}); };

  switch (params.kind) {
    case FieldKind::dgff: {
      const DgffSampler s(g, params.method, params.max_side);
      parallel_for(out.size(), threads, [&](std::size_t r) {
        Eigen::VectorXd v;
        s.sample_interior(key(static_cast<std::int64_t>(r)), v);
        out[r] = max_with_boundary(v, true);
      });
      break;
    }
    case FieldKind::psi: {
      const PsiSampler s(params.profile, g, params.method, params.max_side);
      parallel_for(out.size(), threads, [&](std::size_t r) {
        Eigen::VectorXd phi, v;
        s.sample_interior(key(static_cast<std::int64_t>(r)), phi, v);
        out[r] = max_with_boundary(v, true);
      });
      break;
    }
    case FieldKind::ibrw: {
      const IbrwSampler s(params.profile, g);
      parallel_for(out.size(), threads, [&](std::size_t r) {
        out[r] = s.sample(key(static_cast<std::int64_t>(r))).max();
      });
      break;
    }
    case FieldKind::mibrw:
    case FieldKind::tmibrw: {
      const int k0 = params.kind == FieldKind::mibrw ? 0 : params.k0;
      if (params.spectral) {
        const MibrwSpectralSampler s(params.profile, g, k0);
        const std::size_t pairs = (out.size() + 1) / 2;
        parallel_for(pairs, threads, [&](std::size_t i) {
          std::vector<double> a, b;
          s.sample_pair(key(static_cast<std::int64_t>(i)), a, b);
          out[2 * i] = *std::max_element(a.begin(), a.end());
          if (2 * i + 1 < out.size()) out[2 * i + 1] = *std::max_element(b.begin(), b.end());
        });
      } else {
        const MibrwSampler s(params.profile, g, k0);
        parallel_for(out.size(), threads, [&](std::size_t r) {
          out[r] = s.sample(key(static_cast<std::int64_t>(r))).max();
        });
      }
      break;
    }
    case FieldKind::coupled:
      throw Unsupported("mc_max does not sample coupled fields; use coupling_inequality");
  }
  return out;
}

MaxSummary summarize(const std::vector<double>& sample) {
  if (sample.empty()) throw InsufficientData("summary of an empty sample");
  RunningStats st;
  for (double x : sample) st.add(x);
  std::vector<double> s = sample;
  std::sort(s.begin(), s.end());
  MaxSummary m;
  m.count = st.count();
  m.mean = st.mean();
  m.variance = st.variance();
  m.q05 = sorted_quantile(s, 0.05);
  m.q25 = sorted_quantile(s, 0.25);
  m.q50 = sorted_quantile(s, 0.50);
  m.q75 = sorted_quantile(s, 0.75);
  m.q95 = sorted_quantile(s, 0.95);
  return m;
}

std::vector<TailPoint> tail_table(const std::vector<double>& maxima, double centring,
                                  const std::vector<double>& xs, bool right, double conf) {
  std::vector<double> s = maxima;
  std::sort(s.begin(), s.end());
  const auto total = static_cast<std::int64_t>(s.size());
  std::vector<TailPoint> out;
  for (double x : xs) {
    TailPoint t;
    t.x = x;
    if (right) {
      const double level = centring + x;
      t.count = s.end() - std::lower_bound(s.begin(), s.end(), level);
    } else {
      const double level = centring - x;
      t.count = std::upper_bound(s.begin(), s.end(), level) - s.begin();
    }
    t.phat = total > 0 ? static_cast<double>(t.count) / total : 0.0;
    const Interval ci = wilson_interval(t.count, total, conf);
    t.ci_lo = ci.lo;
    t.ci_hi = ci.hi;
    out.push_back(t);
  }
  return out;
}

std::vector<double> uniform_grid(double hi, double step) {
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double x = i * step;
    if (x > hi + 1e-12) break;
    out.push_back(x);
  }
  return out;
}

RateFit fit_tail_rate(const std::vector<TailPoint>& table, std::int64_t replicates,
                      const RateFitOptions& opt) {
  std::vector<double> xs;
  std::vector<std::int64_t> counts;
  for (const auto& t : table) {
    xs.push_back(t.x);
    counts.push_back(t.count);
  }
  const FitInput base = fit_input(xs, counts, replicates, opt.prefactor, opt.min_exceedances);
  if (base.x.size() < opt.min_points) {
    throw InsufficientData("tail fit needs at least " + std::to_string(opt.min_points) +
                           " grid points with " + std::to_string(opt.min_exceedances) +
                           " exceedances; got " + std::to_string(base.x.size()));
  }
  const LinearFit fit = least_squares(base.x, base.y, base.w);
  RateFit r;
  r.rate = fit.slope;
  r.prefactor = opt.prefactor;
  r.points_used = base.x.size();

  // Bootstrap on the retained points only.
  std::vector<double> kept_x;
  std::vector<std::int64_t> kept_counts;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (std::find(base.x.begin(), base.x.end(), xs[i]) != base.x.end()) {
      kept_x.push_back(xs[i]);
      kept_counts.push_back(counts[i]);
    }
  }
  RunningStats boot;
  std::mt19937_64 rng(derive_key(opt.seed, {0xB007}));
  for (int b = 0; b < opt.bootstrap; ++b) {
    const std::vector<std::int64_t> c = resample_counts(kept_counts, replicates, rng);
    const FitInput f = fit_input(kept_x, c, replicates, opt.prefactor, 1);
    if (f.x.size() < 2) continue;
    try {
      boot.add(least_squares(f.x, f.y, f.w).slope);
    } catch (const InsufficientData&) {
    }
  }
  r.se = std::max(boot.count() > 1 ? std::sqrt(boot.variance()) : 0.0, fit.slope_se);
  const double z = normal_quantile(0.5 + opt.conf / 2.0);
  r.ci_lo = r.rate - z * r.se;
  r.ci_hi = r.rate + z * r.se;
  return r;
}

double analytic_centring(FieldKind kind, const StepProfile& p, int n) {
  switch (kind) {
    case FieldKind::mibrw:
    case FieldKind::tmibrw:
      return mibrw_centring(p, n, n);
    default:
      return expected_max(p, n);
  }
}

double predicted_right_rate(FieldKind kind, const StepProfile& p) {
  const double s1 = effective_profile(p).bar_sigmas.front();
  const double base = -2.0 / s1;
  return kind == FieldKind::mibrw || kind == FieldKind::tmibrw ? base * std::sqrt(std::log(2.0))
                                                               : base;
}

TailReport right_tail_rate(const MaxParams& params, const std::vector<double>& maxima,
                           const TailOptions& opt) {
  TailReport rep;
  rep.kind = params.kind;
  rep.n = params.n;
  rep.replicates = static_cast<std::int64_t>(maxima.size());
  rep.summary = summarize(maxima);
  rep.centring = opt.recentre ? rep.summary.q50 : analytic_centring(params.kind, params.profile, params.n);
  const double log_n = params.n * std::log(2.0);
  const std::vector<double> rgrid =
      opt.right_grid.empty() ? uniform_grid(std::floor(std::sqrt(log_n)), 0.25) : opt.right_grid;
  rep.right = tail_table(maxima, rep.centring, rgrid, true);
  RateFitOptions fo = opt.fit;
  const EffectiveProfile e = effective_profile(params.profile);
  fo.prefactor = std::abs(params.profile.sigmas().front() - e.bar_sigmas.front()) <=
                 kSlopeTolerance * std::max(1.0, e.bar_sigmas.front());
  try {
    RateFit f = fit_tail_rate(rep.right, rep.replicates, fo);
    f.target = predicted_right_rate(params.kind, params.profile);
    rep.right_fit = f;
  } catch (const InsufficientData&) {
    rep.right_fit.reset();
  }
  if (opt.fit_left) {
    const std::vector<double> lgrid =
        opt.left_grid.empty() ? uniform_grid(std::pow(std::log(log_n), 2.0 / 3.0), 0.1) : opt.left_grid;
    rep.left = tail_table(maxima, rep.centring, lgrid, false);
    try {
      RateFitOptions lo = opt.fit;
      lo.prefactor = false;
      rep.left_fit = fit_tail_rate(rep.left, rep.replicates, lo);
    } catch (const InsufficientData&) {
      rep.left_fit.reset();
    }
  }
  return rep;
}

LeftTailVerdict left_tail_check(const std::vector<double>& maxima, double centring, int n,
                                const std::vector<double>& grid, const RateFitOptions& opt) {
  const double log_n = n * std::log(2.0);
  const double hi = std::pow(std::log(log_n), 2.0 / 3.0);
  const std::vector<double> g = grid.empty() ? uniform_grid(hi, 0.1) : grid;
  for (double x : g) {
    if (x < 0.0 || x > hi + 1e-12) {
      throw ValidationError("left-tail grid must lie in [0, (log log N)^(2/3)]");
    }
  }
  RateFitOptions o = opt;
  o.prefactor = false;
  LeftTailVerdict v;
  v.fit = fit_tail_rate(tail_table(maxima, centring, g, false), static_cast<std::int64_t>(maxima.size()), o);
  v.c = -v.fit.rate;
  v.positive = v.fit.ci_hi < 0.0;
  return v;
}

FirstOrderTable first_order_check(const StepProfile& p, const std::vector<int>& ns,
                                  std::int64_t replicates, std::uint64_t seed, int threads) {
  if (!std::is_sorted(ns.begin(), ns.end())) throw ValidationError("n list must be ascending");
  FirstOrderTable t;
  const EffectiveProfile e = effective_profile(p);
  for (std::size_t j = 0; j < e.m(); ++j) {
    t.target += e.bar_sigmas[j] * (e.bar_lambdas[j + 1] - e.bar_lambdas[j]);
  }
  for (int n : ns) {
    MaxParams mp;
    mp.kind = FieldKind::psi;
    mp.profile = p;
    mp.n = n;
    const std::vector<double> m = mc_max(mp, replicates, derive_key(seed, {static_cast<std::uint64_t>(n)}), threads);
    RunningStats st;
    for (double x : m) st.add(x);
    FirstOrderRow row;
    row.n = n;
    row.mean_max = st.mean();
    row.se = st.standard_error();
    row.ratio = st.mean() / (2.0 * n * std::log(2.0));
    row.gap = st.mean() - expected_max(p, n);
    t.rows.push_back(row);
  }
  return t;
}

DekkingHost dekking_host_gap(const StepProfile& p, int n, std::int64_t replicates,
                             std::uint64_t seed, int threads, double conf) {
  MaxParams mp;
  mp.kind = FieldKind::psi;
  mp.profile = p;
  mp.n = n;
  const std::vector<double> a = mc_max(mp, replicates, derive_key(seed, {1}), threads);
  const std::vector<double> b = mc_max(mp, replicates, derive_key(seed, {2}), threads);
  mp.n = n + 2;
  const std::vector<double> c = mc_max(mp, replicates, derive_key(seed, {3}), threads);
  RunningStats diff, sa, sc;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff.add(std::abs(a[i] - b[i]));
    sa.add(a[i]);
    sc.add(c[i]);
  }
  DekkingHost d;
  d.n = n;
  d.lhs = diff.mean();
  d.lhs_se = diff.standard_error();
  d.rhs = 2.0 * (sc.mean() - sa.mean());
  d.rhs_se = 2.0 * std::sqrt(sa.variance() / sa.count() + sc.variance() / sc.count());
  const double z = normal_quantile(conf);
  d.holds = d.lhs - z * d.lhs_se <= d.rhs + z * d.rhs_se;
  return d;
}

IqrTrend iqr_trend(const StepProfile& p, const std::vector<int>& ns, std::int64_t replicates,
                   std::uint64_t seed, int threads, double threshold) {
  IqrTrend t;
  t.threshold = threshold;
  std::vector<double> xs, w;
  for (int n : ns) {
    MaxParams mp;
    mp.kind = FieldKind::psi;
    mp.profile = p;
    mp.n = n;
    const std::vector<double> m = mc_max(mp, replicates, derive_key(seed, {static_cast<std::uint64_t>(n)}), threads);
    const double centre = expected_max(p, n);
    std::vector<double> shifted(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) shifted[i] = m[i] - centre;
    const double iqr = interquartile_range(shifted);
    std::mt19937_64 rng(derive_key(seed, {0x10F, static_cast<std::uint64_t>(n)}));
    std::uniform_int_distribution<std::size_t> pick(0, shifted.size() - 1);
    RunningStats boot;
    std::vector<double> res(shifted.size());
    for (int b = 0; b < 200; ++b) {
      for (double& x : res) x = shifted[pick(rng)];
      boot.add(interquartile_range(res));
    }
    const double se = std::max(std::sqrt(boot.variance()), 1e-12);
    t.ns.push_back(n);
    t.iqr.push_back(iqr);
    t.iqr_se.push_back(se);
    xs.push_back(n);
    w.push_back(1.0 / (se * se));
  }
  if (xs.size() >= 2) {
    const LinearFit f = least_squares(xs, t.iqr, w);
    double sw = 0.0, sx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sw += w[i];
      sx += w[i] * xs[i];
    }
    double sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) sxx += w[i] * std::pow(xs[i] - sx / sw, 2);
    t.slope = f.slope;
    t.slope_se = std::sqrt(1.0 / sxx);
  }
  t.non_growing = t.slope - normal_quantile(0.975) * t.slope_se <= threshold;
  return t;
}

}  // namespace sidgff
