#pragma once

// Step variance profiles sigma(s), their integrated variance I(s), the
// concave hull / effective profile and the centring quantities built on it.

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace sidgff {

enum class Normalization { rescale, strict };

/// Right-continuous step function sigma with sigma = sigmas[i] on
/// [lambdas[i-1], lambdas[i]) (lambdas[-1] = 0) and sigma(1) = sigmas.back().
class StepProfile {
 public:
  StepProfile(std::vector<double> sigmas, std::vector<double> lambdas,
              Normalization mode = Normalization::rescale);

  static StepProfile homogeneous();
  static StepProfile from_variances(const std::vector<double>& sigma2,
                                    std::vector<double> lambdas,
                                    Normalization mode = Normalization::rescale);

  std::size_t size() const { return sigmas_.size(); }
  const std::vector<double>& sigmas() const { return sigmas_; }
  const std::vector<double>& lambdas() const { return lambdas_; }
  /// Scale factor applied to the raw sigmas during normalization.
  double rescale_factor() const { return rescale_; }

  double sigma(double s) const;
  double sigma2(double s) const { const double v = sigma(s); return v * v; }
  double lambda_start(std::size_t i) const { return i == 0 ? 0.0 : lambdas_[i - 1]; }

  /// I(s) = int_0^s sigma^2.
  double integrated(double s) const;
  /// I(a, b) = I(b) - I(a).
  double integrated(double a, double b) const;
  /// int_0^s sigma (used for the first-order constant).
  double integrated_sigma(double s) const;

  double sigma_min() const;
  double sigma_max() const;

  friend bool operator==(const StepProfile&, const StepProfile&) = default;

 private:
  std::vector<double> sigmas_;
  std::vector<double> lambdas_;
  double rescale_ = 1.0;
};

/// Profiles used throughout the experiments: "homogeneous", "convex2"
/// (sigma^2 = 0.5, 1.5), "decreasing2" (sigma^2 = 1.5, 0.5) and "three-scale".
StepProfile named_profile(const std::string& name);
std::vector<std::string> named_profile_list();

double integrated_variance(const StepProfile& p, double a, double b);

struct HullVertex {
  double lambda = 0.0;
  double value = 0.0;
  std::size_t index = 0;  ///< position in {0, lambda_1, ..., lambda_M}
};

/// Vertices of the least concave majorant of I over the breakpoints, with
/// collinear points dropped (so consecutive slopes strictly decrease).
std::vector<HullVertex> concave_hull(const StepProfile& p);
/// Vertices of the greatest convex minorant of I.
std::vector<HullVertex> convex_envelope(const StepProfile& p);

struct EffectiveProfile {
  std::vector<double> bar_sigmas;   ///< sigma-bar_1 .. sigma-bar_m
  std::vector<double> bar_lambdas;  ///< 0 = lambda^0 < ... < lambda^m = 1
  std::vector<int> weights;         ///< w_j in {1, 3}
  std::vector<std::size_t> pis;     ///< lambda^j = lambda_{pi_j}

  std::size_t m() const { return bar_sigmas.size(); }
  /// Hull value I-hat(s).
  double integrated(double s) const;
  /// The effective profile as a StepProfile (sigma = sigma-bar).
  StepProfile as_step() const;
};

/// Relative slope tolerance used when classifying hull pieces.
inline constexpr double kSlopeTolerance = 1e-12;

/// Throws ValidationError for pieces where I touches its hull only on part of
/// the piece.
EffectiveProfile effective_profile(const StepProfile& p);

/// m_N = sum_j 2 log2 sigma-bar_j dt^j - w_j sigma-bar_j log(dt^j) / 4 with
/// t^j = lambda^j n. Throws DomainError if some dt^j <= 1.
double expected_max(const StepProfile& p, int n);
double expected_max(const EffectiveProfile& e, int n);

/// M*_N(t); equals m_N / sqrt(log 2) at t = n.
double mibrw_centring(const StepProfile& p, int n, double t);
double mibrw_centring(const EffectiveProfile& e, int n, double t);

/// Conditional-mean path at level k for an increment x over the effective
/// scale containing k: I(lambda^{i-1}, k/n) / I(lambda^{i-1}, lambda^i) * x.
double optimal_path(const StepProfile& p, const EffectiveProfile& e, int n,
                    double k, double x);
double optimal_path(const StepProfile& p, int n, double k, double x);

/// Four-branch (2/3)-power barrier f_{k,n}.
double barrier(const StepProfile& p, const EffectiveProfile& e, int n,
               double k, double cf);
double barrier(const StepProfile& p, int n, double k, double cf);

struct ComparisonProfile {
  StepProfile sigma_tilde = StepProfile::homogeneous();
  std::array<double, 3> breakpoints{};  ///< lambda-tilde_1, _2, _3
  int n = 0;
  int kappa = 0;
  bool single_scale = false;
  /// Largest violation of the domination inequality on the check grid
  /// (<= 0 when it holds).
  double domination_margin = 0.0;
};

/// Builds sigma-tilde for the upper comparison and validates its guarantees.
/// Throws ConstructionError naming the violated guarantee.
ComparisonProfile build_comparison_profile(const StepProfile& p, int n,
                                           int kappa);

}  // namespace sidgff
