#include <doctest.h>

#include <set>

#include "sidgff/error.hpp"
#include "sidgff/lattice.hpp"

using namespace sidgff;

namespace {

// Brute-force count of torus boxes of side 2^k containing both vertices.
std::int64_t brute_common_boxes(Vertex v, Vertex w, int k, GridSize g) {
  const int N = g.side();
  const int L = 1 << k;
  auto inside = [&](int a, int c) { return ((c - a) % N + N) % N < L; };
  std::int64_t count = 0;
  for (int ay = 0; ay < N; ++ay) {
    for (int ax = 0; ax < N; ++ax) {
      if (inside(ax, v.x) && inside(ay, v.y) && inside(ax, w.x) && inside(ay, w.y)) ++count;
    }
  }
  return count;
}

}  // namespace

TEST_CASE("grid size and indexing") {
  const GridSize g(3);
  CHECK(g.side() == 8);
  CHECK(g.volume() == 64);
  for (int i = 0; i < 64; ++i) CHECK(vertex_index(vertex_at(i, 8), 8) == i);
  CHECK(in_grid({7, 7}, g));
  CHECK_FALSE(in_grid({8, 0}, g));
  CHECK(is_interior({1, 6}, g));
  CHECK_FALSE(is_interior({0, 3}, g));
  CHECK(in_bulk({3, 4}, g, 0.25));
  CHECK_FALSE(in_bulk({2, 4}, g, 0.25));
}

TEST_CASE("torus distances") {
  CHECK(torus_distance({0, 0}, {3, 0}, GridSize(2), Metric::euclidean) == doctest::Approx(1.0));
  CHECK(torus_distance({0, 0}, {4, 4}, GridSize(3), Metric::max) == doctest::Approx(4.0));
  CHECK(torus_distance({0, 0}, {3, 4}, GridSize(4), Metric::euclidean) == doctest::Approx(5.0));
  CHECK(torus_max_distance({1, 7}, {6, 0}, GridSize(3)) == 3);
}

TEST_CASE("log_plus and ceil_log2") {
  CHECK(log_plus(0.5) == 0.0);
  CHECK(log_plus(8.0) == doctest::Approx(3.0));
  CHECK_THROWS_AS(log_plus(0.0), DomainError);
  CHECK(ceil_log2(1) == 0);
  CHECK(ceil_log2(2) == 1);
  CHECK(ceil_log2(5) == 3);
  CHECK_THROWS_AS(ceil_log2(0), DomainError);
}

TEST_CASE("shared scale count examples and range") {
  CHECK(shared_scale_count({0, 0}, {1, 0}, GridSize(3)) == 2);
  CHECK(shared_scale_count({0, 0}, {5, 0}, GridSize(4)) == 1);
  const GridSize g(3);
  for (int i = 0; i < 64; ++i) {
    for (int j = 0; j < 64; ++j) {
      const int r = shared_scale_count(vertex_at(i, 8), vertex_at(j, 8), g);
      CHECK(r >= 0);
      CHECK(r <= 3);
      CHECK((r == 3) == (i == j));
    }
  }
}

TEST_CASE("common box count matches enumeration") {
  CHECK(common_box_count({0, 0}, {1, 0}, 1, GridSize(2)) == 2);
  for (int n = 1; n <= 3; ++n) {
    const GridSize g(n);
    const int N = g.side();
    for (int k = 0; k <= n; ++k) {
      for (int i = 0; i < N * N; ++i) {
        for (int j = 0; j < N * N; ++j) {
          const Vertex v = vertex_at(i, N);
          const Vertex w = vertex_at(j, N);
          REQUIRE(common_box_count(v, w, k, g) == brute_common_boxes(v, w, k, g));
        }
      }
    }
  }
}

TEST_CASE("dyadic box families") {
  const GridSize g(3);
  for (int k = 0; k <= 3; ++k) {
    std::set<DyadicBoxId> seen;
    for (int i = 0; i < 64; ++i) {
      const Vertex v = vertex_at(i, 8);
      const DyadicBoxId b = disjoint_box(v, k, g);
      CHECK(box_contains(b, v, g));
      seen.insert(b);
      const auto torus = torus_boxes_containing(v, k, g);
      CHECK(torus.size() == static_cast<std::size_t>(1) << (2 * k));
      std::set<DyadicBoxId> unique(torus.begin(), torus.end());
      CHECK(unique.size() == torus.size());
      for (const auto& t : torus) CHECK(box_contains(t, v, g));
    }
    // BD_k partitions V_N.
    CHECK(seen.size() == static_cast<std::size_t>(64 >> (2 * k)));
  }
  CHECK(canonical_torus_box(1, -1, 9, g).anchor == Vertex{7, 1});
  CHECK_THROWS_AS(disjoint_box({0, 0}, 4, g), RangeError);
}

TEST_CASE("scale boxes") {
  const GridSize g(4);
  CHECK(scale_box_side(0.0, g) == 16);
  CHECK(scale_box_side(1.0, g) == 1);
  CHECK(scale_box_side(0.5, g) == 4);
  CHECK(scale_box({5, 5}, 0.0, g).extent == grid_rect(g));
  CHECK(scale_box({5, 5}, 1.0, g).extent == Rect{5, 5, 5, 5});
  CHECK(scale_box({5, 5}, 0.5, g).extent == Rect{3, 3, 7, 7});
  CHECK(scale_box({0, 15}, 0.5, g).extent == Rect{0, 13, 2, 15});
  // Nesting: boxes shrink as lambda grows.
  for (double a = 0.0; a <= 1.0; a += 0.125) {
    const Rect outer = scale_box({6, 9}, a, g).extent;
    const Rect inner = scale_box({6, 9}, std::min(1.0, a + 0.125), g).extent;
    CHECK(outer.x0 <= inner.x0);
    CHECK(outer.x1 >= inner.x1);
    CHECK(outer.y0 <= inner.y0);
    CHECK(outer.y1 >= inner.y1);
  }
}

TEST_CASE("branching scale") {
  const GridSize g(4);
  CHECK(branching_scale({3, 3}, {3, 3}, g) == 1.0);
  for (int res : {1, 4}) {
    const double b = branching_scale({2, 3}, {9, 3}, g, res);
    CHECK(scale_boxes_intersect({2, 3}, {9, 3}, b, g));
    const double step = 1.0 / (g.n * res);
    if (b + step <= 1.0) CHECK_FALSE(scale_boxes_intersect({2, 3}, {9, 3}, b + step, g));
  }
  CHECK(branching_scale({2, 3}, {9, 3}, g, 0) >= branching_scale({2, 3}, {9, 3}, g, 1));
}
