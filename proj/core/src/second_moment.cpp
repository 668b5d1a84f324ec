#include "sidgff/second_moment.hpp"

#include <algorithm>
#include <cmath>

#include "sidgff/error.hpp"
#include "sidgff/rng.hpp"

namespace sidgff {
namespace {

constexpr std::uint64_t kTagPath = 0x5A7E;
constexpr std::uint64_t kTagBridge = 0xB81D;
constexpr std::size_t kBlock = 2048;

// P(a <= X <= b) for X ~ N(0, var).
double normal_mass(double a, double b, double var) {
  if (!(b > a)) return 0.0;
  const double s = std::sqrt(2.0 * var);
  if (a >= 0.0) return 0.5 * (std::erfc(a / s) - std::erfc(b / s));
  if (b <= 0.0) return 0.5 * (std::erfc(-b / s) - std::erfc(-a / s));
  return 1.0 - 0.5 * (std::erfc(-a / s) + std::erfc(b / s));
}

// Cumulative path variances V(l) = sum_{j < l} sigma^2(j / n).
std::vector<double> path_variances(const StepProfile& p, int n) {
  std::vector<double> v(n + 1, 0.0);
  for (int l = 1; l <= n; ++l) v[l] = v[l - 1] + p.sigma2(static_cast<double>(l - 1) / n);
  return v;
}

double path_value(const FieldSample& s, std::size_t idx, int level) {
  return level == 0 ? 0.0 : s.partial_sums[level - 1][idx];
}

void check_sample(const FieldSample& s, const PathEventSpec& spec) {
  if (s.grid.n != spec.n || s.partial_sums.size() != static_cast<std::size_t>(spec.n) + 1) {
    throw ValidationError("path events need an MIBRW sample of the spec's size with partial sums");
  }
}

// Product over scales of P(x_i in I(i), tube of scale i) given one bridge
// draw per scale; z holds n standard normals.
double bridge_mass(const PathEventSpec& spec, const std::vector<double>& var,
                   const std::vector<double>& z, std::vector<double>& w) {
  double mass = 1.0;
  for (std::size_t i = 1; i <= spec.m(); ++i) {
    const int t0 = spec.t[i - 1];
    const int t1 = spec.t[i];
    const double vtot = var[t1] - var[t0];
    w.assign(t1 - t0 + 1, 0.0);
    for (int l = t0 + 1; l <= t1; ++l) {
      w[l - t0] = w[l - t0 - 1] + std::sqrt(var[l] - var[l - 1]) * z[l - 1];
    }
    Interval iv = spec.interval(i);
    double lo = iv.lo;
    double hi = iv.hi;
    for (int l = t0 + 1; l < t1 && lo < hi; ++l) {
      const double frac = (var[l] - var[t0]) / vtot;
      const double b = w[l - t0] - frac * w[t1 - t0];
      const double d = frac - spec.coef[l];
      const double f = spec.half_width[l];
      if (std::abs(d) < 1e-14) {
        if (std::abs(b) > f) hi = lo;
        continue;
      }
      double a0 = (-f - b) / d;
      double a1 = (f - b) / d;
      if (a0 > a1) std::swap(a0, a1);
      lo = std::max(lo, a0);
      hi = std::min(hi, a1);
    }
    mass *= normal_mass(lo, hi, vtot);
    if (mass == 0.0) break;
  }
  return mass;
}

MomentEstimate bridge_estimate(const PathEventSpec& spec, const MomentOptions& opt) {
  if (opt.replicates < 2) throw RangeError("bridge estimate needs at least two replicates");
  const std::vector<double> var = path_variances(spec.profile, spec.n);
  std::vector<double> masses(static_cast<std::size_t>(opt.replicates));
  parallel_for(masses.size(), opt.threads, [&](std::size_t r) {
    NormalStream normals(derive_key(opt.seed, {kTagBridge, r}));
    std::vector<double> z(spec.n);
    std::vector<double> w;
    normals.fill(z.data(), z.size());
    masses[r] = bridge_mass(spec, var, z, w);
  });
  RunningStats acc;
  for (double x : masses) acc.add(x);
  return {acc.mean(), acc.standard_error(), MomentMethod::semi_analytic};
}

}  // namespace

PathEventSpec PathEventSpec::make(const StepProfile& p, int n, double y, double cf) {
  if (n < 2) throw RangeError("path events need n >= 2");
  if (!(y >= 0.0) || !std::isfinite(y)) throw DomainError("path events need finite y >= 0");
  if (!(cf > 0.0) || !std::isfinite(cf)) throw DomainError("tube constant C_f must be positive");
  PathEventSpec s;
  s.profile = p;
  s.effective = effective_profile(p);
  s.n = n;
  s.y = y;
  s.cf = cf;
  const EffectiveProfile& e = s.effective;
  s.t.push_back(0);
  for (std::size_t j = 1; j <= e.m(); ++j) {
    const int tj = j == e.m() ? n : static_cast<int>(std::lround(e.bar_lambdas[j] * n));
    if (tj <= s.t.back()) {
      throw DomainError("effective scales collapse after rounding to integer levels at n = " +
                        std::to_string(n));
    }
    s.t.push_back(tj);
  }
  s.delta_m.assign(e.m() + 1, 0.0);
  for (std::size_t j = 1; j <= e.m(); ++j) {
    s.delta_m[j] = mibrw_centring(e, n, s.t[j]) - mibrw_centring(e, n, s.t[j - 1]);
  }
  s.scale.assign(n + 1, 0);
  s.coef.assign(n + 1, 0.0);
  s.half_width.assign(n + 1, 0.0);
  for (int l = 1; l <= n; ++l) {
    std::size_t i = 1;
    while (s.t[i] < l) ++i;
    s.scale[l] = static_cast<int>(i);
    const double lo = e.bar_lambdas[i - 1];
    const double hi = e.bar_lambdas[i];
    // Level l placed proportionally inside the rounded scale, so the path
    // coefficient is exactly 1 at t^i.
    const double frac = static_cast<double>(l - s.t[i - 1]) / (s.t[i] - s.t[i - 1]);
    const double sl = lo + frac * (hi - lo);
    const double denom = p.integrated(lo, hi);
    s.coef[l] = denom > 0.0 ? p.integrated(lo, sl) / denom : 0.0;
    s.half_width[l] = barrier(p, e, n, sl * n, cf);
  }
  return s;
}

Interval PathEventSpec::interval(std::size_t i) const {
  if (i < 1 || i > m()) throw RangeError("interval index must lie in [1, m]");
  const double top = delta_m[i] + (i == 1 ? y : 0.0);
  return {top - 1.0, top};
}

Rect PathEventSpec::window() const {
  const int N = 1 << n;
  return {N / 4, N / 4, N / 4 + N / 2 - 1, N / 4 + N / 2 - 1};
}

std::int64_t PathEventSpec::window_size() const {
  const std::int64_t h = std::int64_t(1) << (n - 1);
  return h * h;
}

bool path_event(const FieldSample& sample, Vertex v, const PathEventSpec& spec, int r) {
  check_sample(sample, spec);
  const std::size_t idx = static_cast<std::size_t>(vertex_index(v, sample.grid.side()));
  for (std::size_t i = 1; i <= spec.m(); ++i) {
    const int t0 = spec.t[i - 1];
    const int t1 = spec.t[i];
    if (t0 >= r) break;
    const double base = path_value(sample, idx, t0);
    const double x = path_value(sample, idx, t1) - base;
    if (t1 <= r) {
      const Interval iv = spec.interval(i);
      if (x < iv.lo || x > iv.hi) return false;
    }
    const int last = std::min(t1 - 1, r);
    for (int l = t0 + 1; l <= last; ++l) {
      const double dev = path_value(sample, idx, l) - base - spec.coef[l] * x;
      if (std::abs(dev) > spec.half_width[l]) return false;
    }
  }
  return true;
}

bool path_event(const FieldSample& sample, Vertex v, const PathEventSpec& spec) {
  return path_event(sample, v, spec, spec.n);
}

std::vector<Vertex> path_event_hits(const FieldSample& sample, const PathEventSpec& spec) {
  check_sample(sample, spec);
  const Rect w = spec.window();
  // Cheap endpoint screen on the first interval before the full check.
  const Interval first = spec.interval(1);
  const int N = sample.grid.side();
  std::vector<Vertex> hits;
  for (int y = w.y0; y <= w.y1; ++y) {
    for (int x = w.x0; x <= w.x1; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y * N + x);
      const double x1 = path_value(sample, idx, spec.t[1]);
      if (x1 < first.lo || x1 > first.hi) continue;
      if (path_event(sample, {x, y}, spec)) hits.push_back({x, y});
    }
  }
  return hits;
}

std::string to_string(MomentMethod m) {
  switch (m) {
    case MomentMethod::monte_carlo: return "monte-carlo";
    case MomentMethod::semi_analytic: return "semi-analytic";
    case MomentMethod::brute_force: return "brute-force";
  }
  return "?";
}

MomentMethod parse_moment_method(const std::string& name) {
  if (name == "monte-carlo" || name == "mc") return MomentMethod::monte_carlo;
  if (name == "semi-analytic") return MomentMethod::semi_analytic;
  if (name == "brute-force") return MomentMethod::brute_force;
  throw ValidationError("unknown moment method '" + name +
                        "' (expected monte-carlo, semi-analytic or brute-force)");
}

double endpoint_probability(const PathEventSpec& spec) {
  if (spec.m() != 1) throw Unsupported("endpoint probability is implemented for m = 1 only");
  const std::vector<double> var = path_variances(spec.profile, spec.n);
  const Interval iv = spec.interval(1);
  return normal_mass(iv.lo, iv.hi, var[spec.n]);
}

double bridge_variance(const StepProfile& p, int n, int k) {
  if (k < 0 || k > n) throw RangeError("bridge_variance needs 0 <= k <= n");
  const double ik = p.integrated(static_cast<double>(k) / n);
  return n * ik * (1.0 - ik / p.integrated(1.0));
}

MomentEstimate tube_probability(const PathEventSpec& spec, const MomentOptions& opt) {
  const std::vector<double> var = path_variances(spec.profile, spec.n);
  double endpoint = 1.0;
  for (std::size_t i = 1; i <= spec.m(); ++i) {
    const Interval iv = spec.interval(i);
    endpoint *= normal_mass(iv.lo, iv.hi, var[spec.t[i]] - var[spec.t[i - 1]]);
  }
  if (endpoint <= 0.0) throw InsufficientData("endpoint intervals carry no probability mass");
  MomentEstimate est = bridge_estimate(spec, opt);
  est.value /= endpoint;
  est.se /= endpoint;
  return est;
}

double default_cf(const StepProfile& p) {
  for (double cf : {1.0, 2.0, 4.0}) {
    const PathEventSpec spec = PathEventSpec::make(p, 6, 0.0, cf);
    if (tube_probability(spec, {20000, 0xCF, 1}).value >= 0.5) return cf;
  }
  return 8.0;
}

MomentEstimate first_moment(const PathEventSpec& spec, MomentMethod method,
                            const MomentOptions& opt) {
  if (method == MomentMethod::semi_analytic) {
    if (spec.m() != 1) {
      throw Unsupported("semi-analytic first moment needs a single effective scale (m = 1)");
    }
    MomentEstimate est = bridge_estimate(spec, opt);
    const double scale = static_cast<double>(spec.window_size());
    est.value *= scale;
    est.se *= scale;
    return est;
  }
  return second_moment(spec, method, opt).first;
}

double SecondMomentEstimate::c_tilde() const {
  if (first.value <= 0.0) return 0.0;
  return std::max(0.0, (second.value - first.value * first.value - first.value) / first.value);
}

std::vector<SecondMomentEstimate> moment_sweep(const StepProfile& p, int n, double cf,
                                               const std::vector<double>& ys,
                                               const MomentOptions& opt, MomentMethod method) {
  if (method == MomentMethod::semi_analytic) {
    throw Unsupported("second moments are estimated by Monte Carlo only");
  }
  if (method == MomentMethod::brute_force && n > 5) {
    throw SizeLimitError("brute-force box enumeration is limited to n <= 5");
  }
  if (opt.replicates < 2) throw RangeError("moment estimates need at least two replicates");
  if (ys.empty()) throw RangeError("moment sweep needs at least one y");
  std::vector<PathEventSpec> specs;
  for (double y : ys) specs.push_back(PathEventSpec::make(p, n, y, cf));
  const GridSize g(n);
  const MibrwSampler sampler(p, g, 0, true);
  const double mstar = mibrw_centring(specs.front().effective, n, n);
  const std::size_t ny = ys.size();
  const std::size_t nr = static_cast<std::size_t>(n) + 1;
  const std::size_t stride = nr + 1;  // by_r counts then the tail bit

  std::vector<RunningStats> h1(ny), h2(ny);
  std::vector<double> cross(ny, 0.0);
  std::vector<std::vector<RunningStats>> strata(ny, std::vector<RunningStats>(nr));
  std::vector<std::int64_t> tails(ny, 0);

  const std::size_t total = static_cast<std::size_t>(opt.replicates);
  std::vector<double> block;
  for (std::size_t start = 0; start < total; start += kBlock) {
    const std::size_t count = std::min(kBlock, total - start);
    block.assign(count * ny * stride, 0.0);
    parallel_for(count, opt.threads, [&](std::size_t b) {
      const std::uint64_t key = derive_key(opt.seed, {kTagPath, start + b});
      const FieldSample s =
          method == MomentMethod::brute_force ? sampler.sample_naive(key) : sampler.sample(key);
      const double smax = s.max();
      for (std::size_t j = 0; j < ny; ++j) {
        double* rec = &block[(b * ny + j) * stride];
        const std::vector<Vertex> hits = path_event_hits(s, specs[j]);
        for (const Vertex& u : hits) {
          for (const Vertex& v : hits) rec[shared_scale_count(u, v, g)] += 1.0;
        }
        rec[nr] = smax > mstar + ys[j] ? 1.0 : 0.0;
      }
    });
    for (std::size_t b = 0; b < count; ++b) {
      for (std::size_t j = 0; j < ny; ++j) {
        const double* rec = &block[(b * ny + j) * stride];
        const double sq = rec[n];  // v = w pairs count h
        double pairs = 0.0;
        for (std::size_t r = 0; r < nr; ++r) {
          strata[j][r].add(rec[r]);
          pairs += rec[r];
        }
        h1[j].add(sq);
        h2[j].add(pairs);
        cross[j] += sq * pairs;
        tails[j] += rec[nr] > 0.5 ? 1 : 0;
      }
    }
  }

  std::vector<SecondMomentEstimate> out(ny);
  const double R = static_cast<double>(total);
  for (std::size_t j = 0; j < ny; ++j) {
    SecondMomentEstimate& e = out[j];
    e.y = ys[j];
    e.first = {h1[j].mean(), h1[j].standard_error(), method};
    e.second = {h2[j].mean(), h2[j].standard_error(), method};
    for (std::size_t r = 0; r < nr; ++r) {
      e.by_r.push_back(strata[j][r].mean());
      e.by_r_se.push_back(strata[j][r].standard_error());
    }
    e.cov_first_second = (cross[j] - R * h1[j].mean() * h2[j].mean()) / (R - 1.0) / R;
    e.tail_hits = tails[j];
    e.replicates = opt.replicates;
  }
  return out;
}

SecondMomentEstimate second_moment(const PathEventSpec& spec, MomentMethod method,
                                   const MomentOptions& opt) {
  return moment_sweep(spec.profile, spec.n, spec.cf, {spec.y}, opt, method).front();
}

SecondMomentCheck second_moment_check(const SecondMomentEstimate& est, double c_tilde,
                                      double conf) {
  const double m1 = est.first.value;
  const double m2 = est.second.value;
  SecondMomentCheck c;
  c.c_tilde = c_tilde;
  c.excess = m2 - m1 * m1 - (1.0 + c_tilde) * m1;
  const double g1 = -2.0 * m1 - (1.0 + c_tilde);
  const double var = g1 * g1 * est.first.se * est.first.se + est.second.se * est.second.se +
                     2.0 * g1 * est.cov_first_second;
  c.excess_se = std::sqrt(std::max(0.0, var));
  c.holds = c.excess - normal_quantile(conf) * c.excess_se <= 0.0;
  return c;
}

PaleyZygmund paley_zygmund_bound(const SecondMomentEstimate& est, double conf) {
  const double m1 = est.first.value;
  const double m2 = est.second.value;
  if (!(m1 > 0.0)) {
    throw InsufficientData("Paley-Zygmund bound needs a positive first moment estimate");
  }
  PaleyZygmund pz;
  pz.bound = m1 * m1 / m2;
  const double g1 = 2.0 * m1 / m2;
  const double g2 = -m1 * m1 / (m2 * m2);
  const double var = g1 * g1 * est.first.se * est.first.se +
                     g2 * g2 * est.second.se * est.second.se +
                     2.0 * g1 * g2 * est.cov_first_second;
  pz.se = std::sqrt(std::max(0.0, var));
  pz.direct = static_cast<double>(est.tail_hits) / static_cast<double>(est.replicates);
  pz.direct_ci = wilson_interval(est.tail_hits, est.replicates, conf);
  pz.holds = pz.bound - normal_quantile(conf) * pz.se <=
             wilson_upper(est.tail_hits, est.replicates, conf);
  return pz;
}

}  // namespace sidgff
