#pragma once

// Gaussian comparison utilities (Slepian, Sudakov-Fernique, Borell) and the
// explicit couplings between psi, the IBRW R and the MIBRW S.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sidgff/covariance.hpp"
#include "sidgff/lattice.hpp"
#include "sidgff/profile.hpp"

namespace sidgff {

struct SlepianReport {
  bool equal_diagonals = true;
  bool ordered = true;
  double max_diagonal_gap = 0.0;
  /// min over pairs of E[X_i X_j] - E[Y_i Y_j] (>= 0 when ordered).
  double min_margin = 0.0;
  /// Index pairs (i, j), i < j, where E[X_i X_j] < E[Y_i Y_j].
  std::vector<std::pair<int, int>> violations;
  bool passes() const { return equal_diagonals && ordered; }
};

/// Equal variances (to diag_tol) and E[X_i X_j] >= E[Y_i Y_j] for i != j.
SlepianReport check_slepian_hypotheses(const Eigen::MatrixXd& cov_x,
                                       const Eigen::MatrixXd& cov_y, double diag_tol = 1e-9,
                                       std::size_t max_listed = 100);
SlepianReport check_slepian_hypotheses(const CovEvaluator& cov_x, const CovEvaluator& cov_y,
                                       const std::vector<Vertex>& vertices,
                                       double diag_tol = 1e-9);

struct SudakovFerniqueReport {
  /// max over pairs of |E(X_i - X_j)^2 - E(Y_i - Y_j)^2|.
  double gamma = 0.0;
  /// sqrt(gamma log |I|).
  double bound = 0.0;
  /// E(X_i - X_j)^2 <= E(Y_i - Y_j)^2 at every pair.
  bool one_sided = true;
  /// max over pairs of E(X_i - X_j)^2 - E(Y_i - Y_j)^2.
  double worst_excess = 0.0;
};

SudakovFerniqueReport sudakov_fernique_gap(const Eigen::MatrixXd& cov_x,
                                           const Eigen::MatrixXd& cov_y);
SudakovFerniqueReport sudakov_fernique_gap(const CovEvaluator& cov_x, const CovEvaluator& cov_y,
                                           const std::vector<Vertex>& vertices);

/// 2 exp(-x^2 / (2 varmax)).
double borell_tail(double varmax, double x);

enum class CouplingDirection { upper, lower, mean_upper, mean_lower };

std::string to_string(CouplingDirection d);
CouplingDirection parse_coupling_direction(const std::string& name);

struct CouplingSpec {
  CouplingDirection direction = CouplingDirection::upper;
  StepProfile profile = StepProfile::homogeneous();
  int n = 0;
  int kappa = 0;
  /// Grid of the field that receives a_v X (psi for upper, S for lower).
  GridSize base;
  /// Grid of the field it is compared with.
  GridSize target;
  std::vector<Vertex> points;    ///< vertices of the base grid
  std::vector<Vertex> embedded;  ///< their images in the target grid
  std::vector<double> a;         ///< a_v >= 0 per point
  std::optional<ComparisonProfile> tilde;
  /// Covariances of (coupled field, comparison field) over the points; the
  /// coupled side includes a_u a_v.
  Eigen::MatrixXd cov_coupled;
  Eigen::MatrixXd cov_compared;
  SlepianReport slepian;
};

/// Lemma-style upper coupling: psi on V_N plus a_v X against the IBRW with
/// sigma-tilde on V_{2^kappa N} at 2^kappa v, over interior vertices. Throws
/// KappaTooSmall naming the first vertex with a_v^2 < 0.
CouplingSpec build_upper_coupling(const StepProfile& p, int n, int kappa);
/// Lower coupling: sqrt(log 2)(S + a_v X) on V_{N/2^kappa} against psi at
/// (N/4, N/4) + 2^{kappa-3} v, 3 <= kappa <= n.
CouplingSpec build_lower_coupling(const StepProfile& p, int n, int kappa);

/// Smallest kappa in [lo, hi] whose coupling builds and passes Slepian's
/// hypotheses. Throws KappaTooSmall when none does.
CouplingSpec auto_upper_coupling(const StepProfile& p, int n, int max_kappa = 12);
CouplingSpec auto_lower_coupling(const StepProfile& p, int n);

struct MeanUpperReport {
  int n = 0;
  /// Smallest C_1 making E(psi_v - psi_w)^2 <= log 2 E((S_v + C_1 g_v) - (S_w + C_1 g_w))^2.
  double c1 = 0.0;
  SudakovFerniqueReport before;  ///< psi vs sqrt(log 2) S
  SudakovFerniqueReport after;   ///< psi vs sqrt(log 2)(S + C_1 g)
};

/// psi on V_N against the MIBRW on V_N (dense psi covariance, so N <= 64).
MeanUpperReport mean_upper_noise(const StepProfile& p, int n);

struct MeanLowerReport {
  int n = 0;
  int k0 = 0;
  /// One-sided hypothesis per k0 = 0..n-2 (true when psi increments dominate).
  std::vector<bool> holds;
  SudakovFerniqueReport report;
};

/// psi on the window V_{N/4} + (N/2, N/2) against sqrt(log 2) S^{N/4, k0};
/// k0 is the smallest truncation satisfying the one-sided hypothesis.
MeanLowerReport mean_lower_truncation(const StepProfile& p, int n);

struct InequalityRow {
  double lambda = 0.0;
  std::int64_t lhs_hits = 0;  ///< exceedances of the smaller side
  std::int64_t rhs_hits = 0;  ///< exceedances of the larger side
  double lhs = 0.0;           ///< P-hat of the side claimed smaller (scaled)
  double rhs = 0.0;           ///< P-hat of the side claimed larger (scaled)
  double lhs_lower = 0.0;     ///< one-sided lower confidence bound of lhs
  double rhs_upper = 0.0;     ///< one-sided upper confidence bound of rhs
  bool holds = true;          ///< lhs_lower <= rhs_upper
};

struct InequalityCheck {
  CouplingDirection direction = CouplingDirection::upper;
  std::int64_t replicates = 0;
  std::vector<InequalityRow> rows;
  bool holds() const;
};

/// Eight evenly spaced levels up to 1.25 times the first-order maximum
/// 2 log N int sigma-bar of the psi side.
std::vector<double> default_levels(const CouplingSpec& spec, int count = 8);

/// Upper: P(max_A psi >= l) <= 2 P(max_{2^kappa A} R >= l).
/// Lower: (1/2) P(max sqrt(log 2) S >= l) <= P(max psi >= l).
/// The two sides use independent streams derived from seed. Throws
/// HypothesisViolation if the spec fails Slepian's hypotheses.
InequalityCheck coupling_inequality(const CouplingSpec& spec, const std::vector<double>& lambdas,
                                    std::int64_t replicates, std::uint64_t seed,
                                    int threads = 1, double conf = 0.95);

}  // namespace sidgff
