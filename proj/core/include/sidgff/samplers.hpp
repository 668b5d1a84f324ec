#pragma once

// Exact seeded samplers for the DGFF, the scale-inhomogeneous DGFF psi, the
// inhomogeneous branching random walk (IBRW), its torus-averaged modification
// (MIBRW) and the truncated MIBRW.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sidgff/green.hpp"
#include "sidgff/lattice.hpp"
#include "sidgff/profile.hpp"

namespace sidgff {

enum class FieldKind { dgff, psi, ibrw, mibrw, tmibrw, coupled };

std::string to_string(FieldKind kind);
FieldKind parse_field_kind(const std::string& name);

struct FieldSample {
  FieldKind kind = FieldKind::dgff;
  GridSize grid;
  std::uint64_t seed = 0;
  std::vector<double> values;  ///< row-major over V_N
  std::optional<StepProfile> profile;
  int k0 = 0;
  int t = -1;
  std::vector<double> a;  ///< coupling weights (kind == coupled)
  double shared_x = 0.0;  ///< coupling normal (kind == coupled)
  /// partial_sums[t][v] = S_v(t) for MIBRW samples drawn with partials kept.
  std::vector<std::vector<double>> partial_sums;

  double at(Vertex v) const { return values[vertex_index(v, grid.side())]; }
  double max() const;
};

/// Default largest side for dense covariance factorizations.
inline constexpr int kDefaultMaxDenseSide = 64;

enum class DgffMethod {
  cholesky,   ///< lower Cholesky factor of G (dense)
  precision,  ///< sparse LDL^T factor of the Laplacian, solved backwards
};

std::string to_string(DgffMethod method);
DgffMethod parse_dgff_method(const std::string& name);

class DgffSampler {
 public:
  explicit DgffSampler(GridSize g, DgffMethod method = DgffMethod::cholesky,
                       int max_side = kDefaultMaxDenseSide);
  GridSize grid() const { return g_; }
  const InteriorIndex& index() const { return idx_; }
  /// Values on the interior of V_N (InteriorIndex order).
  void sample_interior(std::uint64_t seed, Eigen::VectorXd& out) const;
  FieldSample sample(std::uint64_t seed) const;

 private:
  GridSize g_;
  DgffMethod method_;
  InteriorIndex idx_;
  Eigen::MatrixXd chol_;
  std::unique_ptr<GreenSolver> precision_;
  Eigen::VectorXd inv_sqrt_d_;
};

/// The psi linear map A = sum_i sigma_i (M_{lambda_i} - M_{lambda_{i-1}}) on
/// the interior of V_N, where M_lambda is scale_harmonic_map. With `rows`
/// only the listed vertices' rows are built.
Eigen::SparseMatrix<double, Eigen::RowMajor> psi_linear_map(
    const StepProfile& p, GridSize g, BoxSolver& solver,
    const std::vector<Vertex>* rows = nullptr);

class PsiSampler {
 public:
  PsiSampler(const StepProfile& p, GridSize g, DgffMethod method = DgffMethod::cholesky,
             int max_side = kDefaultMaxDenseSide);
  const StepProfile& profile() const { return p_; }
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& map() const { return a_; }
  const DgffSampler& dgff() const { return dgff_; }
  void sample_interior(std::uint64_t seed, Eigen::VectorXd& phi, Eigen::VectorXd& out) const;
  FieldSample sample(std::uint64_t seed) const;

 private:
  StepProfile p_;
  DgffSampler dgff_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> a_;
};

/// R_z(t) = sum_{k=n-t}^{n} sqrt(log 2) sigma((n-k)/n) a_{k, BD_k(z)}. The
/// Gaussians a_{k,B} are keyed by (seed, k, anchor of B).
class IbrwSampler {
 public:
  IbrwSampler(const StepProfile& p, GridSize g, int t = -1);
  FieldSample sample(std::uint64_t seed) const;
  /// Field values at selected vertices only (same keys as sample()).
  std::vector<double> sample_at(std::uint64_t seed, const std::vector<Vertex>& points) const;

 private:
  StepProfile p_;
  GridSize g_;
  int t_;
};

/// S_z = sum_{k=k0}^{n} 2^{-k} sigma((n-k)/n) sum_{B in B_k^N(z)} b_{k,B}. The
/// level-k Gaussians are one N x N grid indexed by canonical box anchor and
/// drawn from a stream keyed by (seed, k). Box sums use cyclic running sums.
class MibrwSampler {
 public:
  MibrwSampler(const StepProfile& p, GridSize g, int k0 = 0, bool keep_partials = false);
  GridSize grid() const { return g_; }
  int k0() const { return k0_; }
  FieldSample sample(std::uint64_t seed) const;
  /// Reference evaluation by explicit enumeration of the covering boxes.
  FieldSample sample_naive(std::uint64_t seed) const;
  /// Level-k noise grid (canonical anchor order) for a seed.
  std::vector<double> level_noise(std::uint64_t seed, int k) const;
  /// Scalar 2^{-k} sigma((n-k)/n).
  double level_weight(int k) const;

 private:
  StepProfile p_;
  GridSize g_;
  int k0_;
  bool keep_partials_;
};

/// Exact sampler for the MIBRW field alone (no partial sums): the field is
/// stationary on the torus, so its covariance is diagonalized by the 2-D DFT
/// and one complex transform yields two independent samples.
class MibrwSpectralSampler {
 public:
  MibrwSpectralSampler(const StepProfile& p, GridSize g, int k0 = 0);
  ~MibrwSpectralSampler();
  MibrwSpectralSampler(const MibrwSpectralSampler&) = delete;
  MibrwSpectralSampler& operator=(const MibrwSpectralSampler&) = delete;

  GridSize grid() const { return g_; }
  /// Two independent fields (row-major) from one key.
  void sample_pair(std::uint64_t seed, std::vector<double>& first,
                   std::vector<double>& second) const;
  const std::vector<double>& eigenvalues() const { return eig_; }

 private:
  struct Plan;
  GridSize g_;
  std::vector<double> eig_;
  std::vector<double> scale_;  ///< sqrt(eig / N^2)
  std::unique_ptr<Plan> plan_;
};

/// base + a_v X with one shared standard normal X keyed by seed.
FieldSample sample_coupled(const FieldSample& base, const std::vector<double>& a,
                           std::uint64_t seed);

}  // namespace sidgff
