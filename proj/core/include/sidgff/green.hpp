#pragma once

// Dirichlet Green functions of simple random walk, normalized by pi/2, and the
// harmonic-measure operators that realize conditional expectations of the
// DGFF given its values outside a box.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include "sidgff/lattice.hpp"

namespace sidgff {

inline constexpr double kGreenNormalization = 1.5707963267948966;  // pi / 2

/// Indexing of the interior vertices of a rectangle.
class InteriorIndex {
 public:
  explicit InteriorIndex(const Rect& domain);
  int size() const { return w_ * h_; }
  int width() const { return w_; }
  int height() const { return h_; }
  const Rect& domain() const { return domain_; }
  std::optional<int> index(Vertex v) const;
  Vertex vertex(int i) const { return {domain_.x0 + 1 + i % w_, domain_.y0 + 1 + i / w_}; }

 private:
  Rect domain_;
  int w_ = 0;
  int h_ = 0;
};

/// Graph Laplacian 4I - A on the interior of a rectangle.
Eigen::SparseMatrix<double> interior_laplacian(const InteriorIndex& idx);

/// Sparse LDL^T factorization of the interior Laplacian; returns columns of
/// G = (pi/2) * 4 * Laplacian^{-1}.
class GreenSolver {
 public:
  explicit GreenSolver(const Rect& domain);
  const InteriorIndex& index() const { return idx_; }
  /// G(u, .) over the interior; u must be interior.
  Eigen::VectorXd row(Vertex u) const;
  /// Solves Laplacian x = b (no normalization).
  Eigen::VectorXd solve_laplacian(const Eigen::VectorXd& b) const;
  Eigen::MatrixXd solve_laplacian(const Eigen::MatrixXd& b) const;
  const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>& factor() const { return ldlt_; }

 private:
  InteriorIndex idx_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

class GreenMatrix {
 public:
  GreenMatrix(const Rect& domain, Eigen::MatrixXd values);
  const Rect& domain() const { return idx_.domain(); }
  const InteriorIndex& index() const { return idx_; }
  const Eigen::MatrixXd& values() const { return values_; }
  /// G(u, v); zero when u or v is not interior.
  double operator()(Vertex u, Vertex v) const;

 private:
  InteriorIndex idx_;
  Eigen::MatrixXd values_;
};

/// Exact G by solving the Dirichlet system for every interior source.
GreenMatrix green_matrix(const Rect& domain);
/// green_matrix(V_N) memoized in-process and, when SIDGFF_CACHE_DIR is set,
/// on disk.
std::shared_ptr<const GreenMatrix> green_matrix_cached(GridSize g);

/// Independent evaluation of G(u, v) by the separable sine expansion of the
/// Laplacian on a rectangle (used as an oracle).
double green_spectral(const Rect& domain, Vertex u, Vertex v);

struct WalkEstimate {
  double value = 0.0;
  double se = 0.0;
};

/// (pi/2) times the mean number of visits to v (time 0 included) of `walks`
/// simple random walks started at u and killed on the outer ring.
WalkEstimate green_random_walk(const Rect& domain, Vertex u, Vertex v, std::int64_t walks,
                               std::uint64_t seed);

struct GreenAsymptotics {
  GridSize grid;
  double sup_deviation = 0.0;
  Vertex u, v;  ///< a pair attaining the sup
};

/// sup over u, v in V_N^delta of |G(u, v) - (log N - log(|u - v|_2 v 1))|.
GreenAsymptotics green_asymptotic_deviation(GridSize g, double delta = 0.25);

/// A weighted list of vertices.
using SparseRow = std::vector<std::pair<Vertex, double>>;

/// Caches factorizations of interior Laplacians keyed by interior shape; the
/// factorization of a box depends only on its width and height.
class BoxSolver {
 public:
  /// Exit distribution of SRW started at v on the outer ring of box.
  /// For v outside the box interior the result is the point mass at v.
  SparseRow exit_distribution(const Rect& box, Vertex v);
  std::size_t cached_shapes() const;

 private:
  struct Entry {
    std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt;
  };
  const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>& factor(int w, int h);

  mutable std::mutex mutex_;
  std::map<std::pair<int, int>, Entry> cache_;
};

/// H_B on a domain: rows indexed by all domain vertices (row-major within the
/// domain rectangle). Interior rows of B hold exit distributions on the ring
/// of B; all other rows are point masses.
class HarmonicOperator {
 public:
  HarmonicOperator(const Rect& box, const Rect& domain, BoxSolver& solver);
  const Rect& box() const { return box_; }
  const Rect& domain() const { return domain_; }
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& matrix() const { return m_; }
  int domain_index(Vertex v) const {
    return (v.y - domain_.y0) * domain_.width() + (v.x - domain_.x0);
  }

 private:
  Rect box_;
  Rect domain_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> m_;
};

HarmonicOperator harmonic_operator(const ScaleBox& box, const Rect& domain,
                                   BoxSolver& solver);

/// Per-vertex scale operator on the interior of V_N: row v is the row of
/// H_{[v]_lambda} at v, restricted to interior columns (the field vanishes on
/// the outer ring). lambda = 0 gives the zero map, lambda = 1 the identity.
Eigen::SparseMatrix<double, Eigen::RowMajor> scale_harmonic_map(
    GridSize g, double lambda, BoxSolver& solver,
    const std::vector<Vertex>* rows = nullptr);

}  // namespace sidgff
