#pragma once

// Exact covariances of the four field families and the numerical checks of
// the covariance comparison lemmas.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sidgff/lattice.hpp"
#include "sidgff/profile.hpp"
#include "sidgff/samplers.hpp"

namespace sidgff {

using CovEvaluator = std::function<double(Vertex, Vertex)>;

/// A G A^T over the interior of V_N (InteriorIndex order).
Eigen::MatrixXd cov_psi(const StepProfile& p, GridSize g, int max_side = kDefaultMaxDenseSide);

/// Covariance of psi at the listed vertices, by sparse solves (no dense G).
/// Vertices on the outer ring have zero rows.
Eigen::MatrixXd cov_psi_subset(const StepProfile& p, GridSize g,
                               const std::vector<Vertex>& points);

/// Covariance of the DGFF between each source and each target vertex.
Eigen::MatrixXd cov_dgff_block(GridSize g, const std::vector<Vertex>& sources,
                               const std::vector<Vertex>& targets);

/// log 2 * sum of sigma^2((n-k)/n) over levels k >= n - t with BD_k(v) = BD_k(w).
class IbrwCovariance {
 public:
  IbrwCovariance(const StepProfile& p, GridSize g, int t = -1);
  double operator()(Vertex v, Vertex w) const;
  double variance() const;

 private:
  GridSize g_;
  int t_;
  std::vector<double> level_var_;  ///< indexed by k
};

/// E[S_v S_w] = sum_{k >= k0} 2^{-2k} sigma^2((n-k)/n) common_box_count(v, w, k).
class MibrwCovariance {
 public:
  MibrwCovariance(const StepProfile& p, GridSize g, int k0 = 0);
  double operator()(Vertex v, Vertex w) const;
  double variance() const;
  /// rho_{N,k0}(v, w) = E[(S_v - S_w)^2].
  double rho(Vertex v, Vertex w) const;
  GridSize grid() const { return g_; }
  int k0() const { return k0_; }

 private:
  GridSize g_;
  int k0_;
  std::vector<double> level_weight_;  ///< 2^{-2k} sigma^2, indexed by k
};

/// Deviations of one quantity across grid sizes, with a non-growth verdict:
/// the least-squares slope of deviation against n must stay below threshold.
struct DeviationSeries {
  std::string item;
  std::map<int, double> deviation;  ///< n -> sup deviation
  double slope = 0.0;
  double threshold = 0.0;
  bool bounded = true;
};

/// Fits the slope and sets the verdict. The threshold is rel * max(1, max
/// deviation) unless abs_threshold > 0.
void finalize_series(DeviationSeries& s, double rel = 0.05, double abs_threshold = 0.0);

struct CovarianceReport {
  std::string lemma;
  std::vector<DeviationSeries> items;
  bool bounded() const;
};

struct CovCompOptions {
  std::vector<int> ns{3, 4, 5, 6};
  /// Grid exponents for item iv (psi on V_{4N} is dense-limited).
  std::vector<int> iv_ns{3, 4};
  /// Item iii source vertices per n beyond the window corners and centre.
  int sources = 64;
  std::uint64_t seed = 1;
  double rel_threshold = 0.05;
  /// Items to run, any of "i", "ii", "iii", "iv".
  std::vector<std::string> items{"i", "ii", "iii", "iv"};
  /// Previously computed values (item -> n -> deviation) are reused.
  std::map<std::string, std::map<int, double>> resume;
  /// Called after each (item, n) value is computed.
  std::function<void(const std::string&, int, double)> on_result;
};

/// Sup deviations of the four covariance comparison items.
CovarianceReport verify_cov_comp(const StepProfile& p, const CovCompOptions& opt = {});

/// Single-n evaluations behind verify_cov_comp.
double cov_comp_item_i(int n);
double cov_comp_item_ii(const StepProfile& p, int n);
double cov_comp_item_iii(int n, int sources, std::uint64_t seed);
double cov_comp_item_iv(const StepProfile& p, int n);

struct IncrementLemmaResult {
  GridSize grid;
  double delta = 0.0;
  std::size_t eligible_pairs = 0;
  std::size_t checked_pairs = 0;
  /// sup |E[dphi_v(l_i) dphi_w(l_j)] - dl_i log N 1_{i=j}| over checked pairs.
  double sup_deviation = 0.0;
  /// sup |E[dphi_v(l_i) dphi_v(l_j)]| over i != j (zero by the martingale
  /// property of nested boxes).
  double same_vertex_cross = 0.0;
};

/// Exact increment covariances at pairs whose grid branching scale equals a
/// scale parameter. Throws HypothesisViolation when N is too small.
IncrementLemmaResult verify_increment_lemma(const StepProfile& p, GridSize g, double delta,
                                            std::size_t max_pairs = 300,
                                            std::uint64_t seed = 1);

/// sup_v Var[psi_v] - log N * I(1) over the interior (the constant alpha_0).
double psi_variance_excess(const StepProfile& p, GridSize g);

struct PairCheck {
  Vertex v, w;
  double oracle = 0.0;
  double empirical = 0.0;
  double se = 0.0;
  bool within(double z = 3.0) const;
};

/// Draws a full row-major field for a replicate index.
using FieldDraw = std::function<void(std::uint64_t replicate, std::vector<double>& out)>;

/// Mean of x_v x_w over replicates (fields are centred) against the oracle.
std::vector<PairCheck> empirical_covariance(const FieldDraw& draw, GridSize g,
                                            const std::vector<std::pair<Vertex, Vertex>>& pairs,
                                            const CovEvaluator& oracle,
                                            std::int64_t replicates, int threads = 1);

/// Seeded random pairs of distinct or equal vertices, optionally interior only.
std::vector<std::pair<Vertex, Vertex>> random_pairs(GridSize g, std::size_t count,
                                                    std::uint64_t seed, bool interior);

}  // namespace sidgff
