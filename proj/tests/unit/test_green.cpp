#include <doctest.h>

#include <cmath>

#include "sidgff/green.hpp"

using namespace sidgff;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Dense inverse of the interior Laplacian built from scratch.
Eigen::MatrixXd dense_green(const Rect& r) {
  const int w = r.width() - 2;
  const int h = r.height() - 2;
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(w * h, w * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      lap(i, i) = 4.0;
      if (x > 0) lap(i, i - 1) = -1.0;
      if (x + 1 < w) lap(i, i + 1) = -1.0;
      if (y > 0) lap(i, i - w) = -1.0;
      if (y + 1 < h) lap(i, i + w) = -1.0;
    }
  }
  return 2.0 * kPi * lap.inverse();
}

}  // namespace

TEST_CASE("hand values") {
  const GreenMatrix g3 = green_matrix({0, 0, 2, 2});
  CHECK(g3({1, 1}, {1, 1}) == doctest::Approx(kPi / 2).epsilon(1e-14));
  const GreenMatrix g4 = green_matrix(grid_rect(GridSize(2)));
  for (Vertex u : {Vertex{1, 1}, Vertex{2, 1}, Vertex{1, 2}, Vertex{2, 2}}) {
    CHECK(std::abs(g4(u, u) - 7 * kPi / 12) < 1e-12);
  }
  CHECK(g4({0, 1}, {1, 1}) == 0.0);
}

TEST_CASE("sparse solve agrees with dense inverse and spectral oracle") {
  for (const Rect r : {Rect{0, 0, 7, 7}, Rect{2, 1, 9, 5}, Rect{0, 0, 15, 15}}) {
    const GreenMatrix g = green_matrix(r);
    const Eigen::MatrixXd ref = dense_green(r);
    CHECK((g.values() - ref).cwiseAbs().maxCoeff() < 1e-10);
    const InteriorIndex& idx = g.index();
    for (int i = 0; i < idx.size(); i += 3) {
      for (int j = 0; j < idx.size(); j += 5) {
        CHECK(std::abs(green_spectral(r, idx.vertex(i), idx.vertex(j)) - g.values()(i, j)) < 1e-10);
      }
    }
  }
}

TEST_CASE("symmetric positive definite and harmonic") {
  const Rect r = grid_rect(GridSize(3));
  const GreenMatrix g = green_matrix(r);
  const Eigen::MatrixXd& G = g.values();
  CHECK((G - G.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
  // Discrete harmonicity off the diagonal, point mass on it.
  const InteriorIndex& idx = g.index();
  const Vertex u{3, 4};
  for (int i = 0; i < idx.size(); ++i) {
    const Vertex v = idx.vertex(i);
    const double lap = 4 * g(u, v) - g(u, {v.x + 1, v.y}) - g(u, {v.x - 1, v.y}) -
                       g(u, {v.x, v.y + 1}) - g(u, {v.x, v.y - 1});
    CHECK(lap == doctest::Approx(v == u ? 2 * kPi : 0.0).epsilon(1e-10));
  }
}

TEST_CASE("domain monotonicity") {
  const GreenMatrix small = green_matrix({2, 2, 9, 9});
  const GreenMatrix big = green_matrix({0, 0, 11, 11});
  for (int i = 0; i < small.index().size(); ++i) {
    for (int j = 0; j < small.index().size(); ++j) {
      const Vertex u = small.index().vertex(i);
      const Vertex v = small.index().vertex(j);
      CHECK(small(u, v) <= big(u, v) + 1e-12);
    }
  }
}

TEST_CASE("random walk visits") {
  const Rect r = grid_rect(GridSize(3));
  const GreenMatrix g = green_matrix(r);
  const WalkEstimate on = green_random_walk(r, {3, 3}, {3, 3}, 40000, 11);
  CHECK(std::abs(on.value - g({3, 3}, {3, 3})) < 4 * on.se);
  const WalkEstimate off = green_random_walk(r, {2, 3}, {5, 5}, 40000, 12);
  CHECK(std::abs(off.value - g({2, 3}, {5, 5})) < 4 * off.se);
  const WalkEstimate again = green_random_walk(r, {2, 3}, {5, 5}, 40000, 12);
  CHECK(again.value == off.value);
}

TEST_CASE("exit distributions") {
  BoxSolver solver;
  const Rect box{1, 1, 6, 5};
  const SparseRow row = solver.exit_distribution(box, {3, 3});
  double total = 0.0;
  for (const auto& [v, w] : row) {
    CHECK(w >= 0.0);
    CHECK_FALSE(box.interior_contains(v));
    CHECK(box.contains(v));
    total += w;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  // Symmetric box and start give a symmetric distribution.
  const Rect sq{0, 0, 6, 6};
  const SparseRow s = solver.exit_distribution(sq, {3, 3});
  for (const auto& [v, w] : s) {
    for (const auto& [v2, w2] : s) {
      if (v2.x == v.y && v2.y == v.x) CHECK(w2 == doctest::Approx(w).epsilon(1e-12));
    }
  }
  const SparseRow point = solver.exit_distribution(box, {0, 0});
  REQUIRE(point.size() == 1);
  CHECK(point[0].second == 1.0);
  const std::size_t shapes = solver.cached_shapes();
  solver.exit_distribution({3, 2, 8, 6}, {4, 4});
  CHECK(solver.cached_shapes() == shapes);
}

TEST_CASE("scale harmonic map endpoints") {
  BoxSolver solver;
  const GridSize g(3);
  const auto zero = scale_harmonic_map(g, 0.0, solver);
  CHECK(zero.nonZeros() == 0);
  const auto id = scale_harmonic_map(g, 1.0, solver);
  CHECK(id.rows() == 36);
  Eigen::MatrixXd dense = Eigen::MatrixXd(id);
  CHECK((dense - Eigen::MatrixXd::Identity(36, 36)).cwiseAbs().maxCoeff() == 0.0);
  // Rows of an intermediate map are sub-probability vectors.
  const auto mid = scale_harmonic_map(g, 0.5, solver);
  Eigen::VectorXd rows = Eigen::MatrixXd(mid).rowwise().sum();
  CHECK(rows.maxCoeff() <= 1.0 + 1e-12);
  CHECK(Eigen::MatrixXd(mid).minCoeff() >= 0.0);
}
