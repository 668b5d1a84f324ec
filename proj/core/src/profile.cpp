#include "sidgff/profile.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sidgff/error.hpp"

namespace sidgff {

namespace {

constexpr double kLambdaTolerance = 1e-12;
constexpr double kTouchTolerance = 1e-12;

double clamp_unit(double s) {
  if (s < -kLambdaTolerance || s > 1.0 + kLambdaTolerance || std::isnan(s)) {
    std::ostringstream os;
    os << "scale argument " << s << " outside [0, 1]";
    throw RangeError(os.str());
  }
  return std::clamp(s, 0.0, 1.0);
}

double cross(const HullVertex& o, const HullVertex& a, const HullVertex& b) {
  return (a.lambda - o.lambda) * (b.value - o.value) -
         (a.value - o.value) * (b.lambda - o.lambda);
}

std::vector<HullVertex> breakpoints(const StepProfile& p) {
  std::vector<HullVertex> pts;
  pts.reserve(p.size() + 1);
  pts.push_back({0.0, 0.0, 0});
  for (std::size_t i = 0; i < p.size(); ++i) {
    pts.push_back({p.lambdas()[i], p.integrated(p.lambdas()[i]), i + 1});
  }
  return pts;
}

// Monotone chain; sign = +1 keeps clockwise turns (upper hull), -1 keeps
// counter-clockwise turns (lower hull). Collinear points are dropped.
std::vector<HullVertex> monotone_chain(const StepProfile& p, double sign) {
  constexpr double kCollinear = 1e-14;
  std::vector<HullVertex> hull;
  for (const HullVertex& pt : breakpoints(p)) {
    while (hull.size() >= 2 &&
           sign * cross(hull[hull.size() - 2], hull.back(), pt) >= -kCollinear) {
      hull.pop_back();
    }
    hull.push_back(pt);
  }
  return hull;
}

double hull_value(const std::vector<HullVertex>& hull, double s) {
  for (std::size_t j = 1; j < hull.size(); ++j) {
    if (s <= hull[j].lambda || j + 1 == hull.size()) {
      const HullVertex& a = hull[j - 1];
      const HullVertex& b = hull[j];
      const double t = (s - a.lambda) / (b.lambda - a.lambda);
      return a.value + t * (b.value - a.value);
    }
  }
  return hull.front().value;
}

}  // namespace

StepProfile::StepProfile(std::vector<double> sigmas, std::vector<double> lambdas,
                         Normalization mode)
    : sigmas_(std::move(sigmas)), lambdas_(std::move(lambdas)) {
  if (sigmas_.empty() || sigmas_.size() != lambdas_.size()) {
    throw ValidationError("profile needs equally many sigmas and lambdas (>= 1)");
  }
  double prev = 0.0;
  for (double l : lambdas_) {
    if (!(l > prev)) {
      throw ValidationError("profile lambdas must be strictly increasing in (0, 1]");
    }
    prev = l;
  }
  if (std::abs(lambdas_.back() - 1.0) > kLambdaTolerance) {
    throw ValidationError("last profile lambda must equal 1");
  }
  lambdas_.back() = 1.0;
  bool any_positive = false;
  for (double s : sigmas_) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw ValidationError("profile sigmas must be finite and non-negative");
    }
    any_positive = any_positive || s > 0.0;
  }
  if (!any_positive) {
    throw ValidationError("profile needs at least one positive sigma");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < sigmas_.size(); ++i) {
    total += sigmas_[i] * sigmas_[i] * (lambdas_[i] - lambda_start(i));
  }
  if (std::abs(total - 1.0) > 1e-12) {
    if (mode == Normalization::strict) {
      std::ostringstream os;
      os << "profile is not normalized: I(1) = " << total;
      throw ValidationError(os.str());
    }
    rescale_ = 1.0 / std::sqrt(total);
    for (double& s : sigmas_) {
      s *= rescale_;
    }
  }
}

StepProfile StepProfile::homogeneous() { return StepProfile({1.0}, {1.0}); }

StepProfile StepProfile::from_variances(const std::vector<double>& sigma2,
                                        std::vector<double> lambdas,
                                        Normalization mode) {
  std::vector<double> sigmas(sigma2.size());
  for (std::size_t i = 0; i < sigma2.size(); ++i) {
    if (!(sigma2[i] >= 0.0)) {
      throw ValidationError("variances must be non-negative");
    }
    sigmas[i] = std::sqrt(sigma2[i]);
  }
  return StepProfile(std::move(sigmas), std::move(lambdas), mode);
}

double StepProfile::sigma(double s) const {
  s = clamp_unit(s);
  const auto it = std::upper_bound(lambdas_.begin(), lambdas_.end(), s);
  const std::size_t idx =
      std::min<std::size_t>(it - lambdas_.begin(), sigmas_.size() - 1);
  return sigmas_[idx];
}

double StepProfile::integrated(double s) const {
  s = clamp_unit(s);
  double acc = 0.0;
  for (std::size_t i = 0; i < sigmas_.size(); ++i) {
    const double a = lambda_start(i);
    if (s <= a) {
      break;
    }
    acc += sigmas_[i] * sigmas_[i] * (std::min(s, lambdas_[i]) - a);
  }
  return acc;
}

double StepProfile::integrated(double a, double b) const {
  a = clamp_unit(a);
  b = clamp_unit(b);
  if (a > b) {
    throw RangeError("integrated variance needs a <= b");
  }
  return integrated(b) - integrated(a);
}

double StepProfile::integrated_sigma(double s) const {
  s = clamp_unit(s);
  double acc = 0.0;
  for (std::size_t i = 0; i < sigmas_.size(); ++i) {
    const double a = lambda_start(i);
    if (s <= a) {
      break;
    }
    acc += sigmas_[i] * (std::min(s, lambdas_[i]) - a);
  }
  return acc;
}

double StepProfile::sigma_min() const {
  return *std::min_element(sigmas_.begin(), sigmas_.end());
}

double StepProfile::sigma_max() const {
  return *std::max_element(sigmas_.begin(), sigmas_.end());
}

StepProfile named_profile(const std::string& name) {
  if (name == "homogeneous" || name == "flat") {
    return StepProfile::homogeneous();
  }
  if (name == "convex2") {
    return StepProfile::from_variances({0.5, 1.5}, {0.5, 1.0});
  }
  if (name == "decreasing2") {
    return StepProfile::from_variances({1.5, 0.5}, {0.5, 1.0});
  }
  if (name == "three-scale") {
    std::vector<double> lambdas(7);
    for (int i = 0; i < 7; ++i) {
      lambdas[i] = (i + 1) / 7.0;
    }
    return StepProfile::from_variances({1.0, 2.2, 1.2, 1.2, 0.3, 0.5, 0.9},
                                       lambdas);
  }
  throw ValidationError("unknown profile name '" + name + "'");
}

std::vector<std::string> named_profile_list() {
  return {"homogeneous", "convex2", "decreasing2", "three-scale"};
}

double integrated_variance(const StepProfile& p, double a, double b) {
  return p.integrated(a, b);
}

std::vector<HullVertex> concave_hull(const StepProfile& p) {
  return monotone_chain(p, 1.0);
}

std::vector<HullVertex> convex_envelope(const StepProfile& p) {
  return monotone_chain(p, -1.0);
}

double EffectiveProfile::integrated(double s) const {
  s = clamp_unit(s);
  double acc = 0.0;
  for (std::size_t j = 0; j < m(); ++j) {
    const double a = bar_lambdas[j];
    if (s <= a) {
      break;
    }
    acc += bar_sigmas[j] * bar_sigmas[j] * (std::min(s, bar_lambdas[j + 1]) - a);
  }
  return acc;
}

StepProfile EffectiveProfile::as_step() const {
  return StepProfile(bar_sigmas,
                     std::vector<double>(bar_lambdas.begin() + 1, bar_lambdas.end()));
}

EffectiveProfile effective_profile(const StepProfile& p) {
  const std::vector<HullVertex> hull = concave_hull(p);
  const std::vector<HullVertex> pts = breakpoints(p);
  EffectiveProfile e;
  e.bar_lambdas.push_back(0.0);
  for (std::size_t j = 1; j < hull.size(); ++j) {
    const HullVertex& a = hull[j - 1];
    const HullVertex& b = hull[j];
    const double slope = (b.value - a.value) / (b.lambda - a.lambda);
    const double tol = kSlopeTolerance * std::max(1.0, std::abs(slope));
    bool all_on_hull = true;
    for (std::size_t i = a.index + 1; i <= b.index; ++i) {
      const double s2 = p.sigmas()[i - 1] * p.sigmas()[i - 1];
      all_on_hull = all_on_hull && std::abs(s2 - slope) <= tol;
    }
    bool touches = false;
    for (std::size_t i = a.index + 1; i < b.index; ++i) {
      const double gap = hull_value(hull, pts[i].lambda) - pts[i].value;
      touches = touches || gap <= kTouchTolerance;
    }
    if (!all_on_hull && touches) {
      std::ostringstream os;
      os << "integrated variance meets its concave hull on part of the piece ("
         << a.lambda << ", " << b.lambda << "] only";
      throw ValidationError(os.str());
    }
    e.bar_sigmas.push_back(std::sqrt(std::max(0.0, slope)));
    e.bar_lambdas.push_back(b.lambda);
    e.weights.push_back(all_on_hull ? 3 : 1);
    e.pis.push_back(b.index);
  }
  e.bar_lambdas.back() = 1.0;
  return e;
}

double expected_max(const StepProfile& p, int n) {
  return expected_max(effective_profile(p), n);
}

double expected_max(const EffectiveProfile& e, int n) {
  const double log2v = std::log(2.0);
  double m = 0.0;
  for (std::size_t j = 0; j < e.m(); ++j) {
    const double dt = (e.bar_lambdas[j + 1] - e.bar_lambdas[j]) * n;
    if (!(dt > 1.0)) {
      std::ostringstream os;
      os << "m_N needs every effective scale to span more than one level; "
         << "scale " << j + 1 << " spans " << dt << " at n = " << n;
      throw DomainError(os.str());
    }
    m += 2.0 * log2v * e.bar_sigmas[j] * dt -
         e.weights[j] * e.bar_sigmas[j] * std::log(dt) / 4.0;
  }
  return m;
}

double mibrw_centring(const StepProfile& p, int n, double t) {
  return mibrw_centring(effective_profile(p), n, t);
}

double mibrw_centring(const EffectiveProfile& e, int n, double t) {
  if (!(t >= 0.0 && t <= n)) {
    throw RangeError("M*_N(t) needs t in [0, n]");
  }
  const double sl2 = std::sqrt(std::log(2.0));
  double acc = 0.0;
  for (std::size_t j = 0; j < e.m(); ++j) {
    const double t0 = e.bar_lambdas[j] * n;
    const double t1 = e.bar_lambdas[j + 1] * n;
    const double dt = t1 - t0;
    if (!(dt > 1.0)) {
      throw DomainError("M*_N needs every effective scale to span more than one level");
    }
    const double weight = std::clamp((std::min(t, t1) - t0) / dt, 0.0, 1.0);
    acc += weight * (2.0 * sl2 * e.bar_sigmas[j] * dt -
                     e.weights[j] * e.bar_sigmas[j] * std::log(dt) / (4.0 * sl2));
  }
  return acc;
}

namespace {

// Index i (1-based) of the effective scale with lambda^{i-1} < s <= lambda^i.
std::size_t scale_index(const EffectiveProfile& e, double s) {
  for (std::size_t j = 1; j <= e.m(); ++j) {
    if (s <= e.bar_lambdas[j] + kLambdaTolerance) {
      return j;
    }
  }
  return e.m();
}

}  // namespace

double optimal_path(const StepProfile& p, const EffectiveProfile& e, int n,
                    double k, double x) {
  if (k < 0 || k > n) {
    throw RangeError("optimal_path needs 0 <= k <= n");
  }
  if (k == 0) {
    return 0.0;
  }
  const double s = k / n;
  const std::size_t i = scale_index(e, s);
  const double lo = e.bar_lambdas[i - 1];
  const double denom = p.integrated(lo, e.bar_lambdas[i]);
  if (denom <= 0.0) {
    return 0.0;
  }
  return p.integrated(lo, std::max(lo, s)) / denom * x;
}

double optimal_path(const StepProfile& p, int n, double k, double x) {
  return optimal_path(p, effective_profile(p), n, k, x);
}

double barrier(const StepProfile& p, const EffectiveProfile& e, int n, double k,
               double cf) {
  if (k < 0 || k > n) {
    throw RangeError("barrier needs 0 <= k <= n");
  }
  if (!(cf > 0.0)) {
    throw DomainError("barrier constant C_f must be positive");
  }
  const double s = k / n;
  auto f = [&](double a, double b) {
    return cf * std::pow(std::max(0.0, p.integrated(a, b)) * n, 2.0 / 3.0);
  };
  const double lambda_1 = p.lambdas().front();
  if (s <= lambda_1 + kLambdaTolerance) {
    return f(0.0, s);
  }
  if (s <= e.bar_lambdas[1] + kLambdaTolerance) {
    return f(s, e.bar_lambdas[1]);
  }
  const std::size_t next = scale_index(e, s);  // t^{i} < k <= t^{i+1}, i = next - 1
  const std::size_t i = next - 1;
  const double lam_i = e.bar_lambdas[i];
  const double lam_after = p.lambdas()[std::min(e.pis[i - 1], p.size() - 1)];
  if (s <= lam_after + kLambdaTolerance) {
    return f(lam_i, s);
  }
  return f(s, e.bar_lambdas[next]);
}

double barrier(const StepProfile& p, int n, double k, double cf) {
  return barrier(p, effective_profile(p), n, k, cf);
}

ComparisonProfile build_comparison_profile(const StepProfile& p, int n, int kappa) {
  if (n < 1 || kappa < 1) {
    throw RangeError("comparison profile needs n >= 1 and kappa >= 1");
  }
  const EffectiveProfile e = effective_profile(p);
  ComparisonProfile out;
  out.n = n;
  out.kappa = kappa;

  std::vector<double> sig2;
  std::vector<double> lams;
  auto push = [&](double level2, double end) {
    const double start = lams.empty() ? 0.0 : lams.back();
    if (end > start + 1e-15) {
      sig2.push_back(level2);
      lams.push_back(end);
    }
  };

  if (e.m() == 1) {
    out.single_scale = true;
    const std::vector<HullVertex> env = convex_envelope(p);
    for (std::size_t j = 1; j < env.size(); ++j) {
      push((env[j].value - env[j - 1].value) / (env[j].lambda - env[j - 1].lambda),
           env[j].lambda);
    }
    out.breakpoints = {0.0, 0.0, 0.0};
  } else {
    const double smin2 = std::pow(p.sigma_min(), 2);
    const double smax2 = std::pow(p.sigma_max(), 2);
    const double sbar2 = std::pow(e.bar_sigmas[0], 2);
    const double span = smax2 - smin2;
    const double lt = e.bar_lambdas[1] * n / static_cast<double>(n + kappa);
    const double l1 = lt * (smax2 - sbar2) / span;
    const double l2 = lt;
    const double l3 = (lt * (sbar2 - smin2) + (smax2 - 1.0)) / span;
    out.breakpoints = {l1, l2, l3};
    if (!(l1 >= -1e-12 && l1 <= l2 + 1e-12 && l3 >= l2 - 1e-12 && l3 <= 1.0 + 1e-12)) {
      throw ConstructionError("comparison profile breakpoints are not ordered in [0, 1]");
    }
    const double s1sq = std::pow(p.sigmas().front(), 2);
    if (std::abs(s1sq - sbar2) <= kSlopeTolerance * std::max(1.0, sbar2)) {
      push(sbar2, l2);
    } else {
      push(smin2, l1);
      push(smax2, l2);
    }
    push(smin2, std::min(1.0, l3));
    push(smax2, 1.0);
  }
  if (lams.empty() || lams.back() < 1.0) {
    throw ConstructionError("comparison profile does not reach scale 1");
  }
  lams.back() = 1.0;
  double total = 0.0;
  for (std::size_t i = 0; i < sig2.size(); ++i) {
    total += sig2[i] * (lams[i] - (i == 0 ? 0.0 : lams[i - 1]));
  }
  if (std::abs(total - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "comparison profile violates I(1) = 1 (got " << total << ")";
    throw ConstructionError(os.str());
  }
  out.sigma_tilde = StepProfile::from_variances(sig2, lams);

  const EffectiveProfile et = effective_profile(out.sigma_tilde);
  if (std::abs(et.bar_sigmas[0] - e.bar_sigmas[0]) > 1e-9) {
    throw ConstructionError("comparison profile changes the first effective variance");
  }
  double margin = -1e300;
  constexpr int kGrid = 2000;
  for (int g = 0; g <= kGrid + n; ++g) {
    const double x = g <= kGrid ? n * static_cast<double>(g) / kGrid
                                : static_cast<double>(g - kGrid - 1);
    const double lhs = (n + kappa) * out.sigma_tilde.integrated((n - x) / (n + kappa));
    const double rhs = n * p.integrated((n - x) / n);
    margin = std::max(margin, lhs - rhs);
  }
  out.domination_margin = margin;
  if (margin > 1e-10) {
    std::ostringstream os;
    os << "comparison profile violates the domination inequality by " << margin;
    throw ConstructionError(os.str());
  }
  return out;
}

}  // namespace sidgff
