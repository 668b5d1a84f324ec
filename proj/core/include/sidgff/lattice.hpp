#pragma once

// Square lattices V_N = [0, N)^2 with N = 2^n, torus distances and the
// dyadic box families used by the branching random walks.

#include <compare>
#include <cstdint>
#include <vector>

namespace sidgff {

struct GridSize {
  int n = 0;

  GridSize() = default;
  explicit GridSize(int exponent);

  int side() const { return 1 << n; }
  std::int64_t volume() const {
    return static_cast<std::int64_t>(side()) * side();
  }
  friend bool operator==(GridSize, GridSize) = default;
};

struct Vertex {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Vertex&, const Vertex&) = default;
};

/// Row-major index of v in a grid of side N.
inline int vertex_index(Vertex v, int side) { return v.y * side + v.x; }
inline Vertex vertex_at(int index, int side) {
  return {index % side, index / side};
}

bool in_grid(Vertex v, GridSize g);
/// V_N^o: both coordinates in [1, N-2].
bool is_interior(Vertex v, GridSize g);
/// V_N^delta: both coordinates strictly between delta*N and (1-delta)*N.
bool in_bulk(Vertex v, GridSize g, double delta);

/// Closed lattice rectangle [x0, x1] x [y0, y1].
struct Rect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  bool contains(Vertex v) const {
    return v.x >= x0 && v.x <= x1 && v.y >= y0 && v.y <= y1;
  }
  bool interior_contains(Vertex v) const {
    return v.x > x0 && v.x < x1 && v.y > y0 && v.y < y1;
  }
  int interior_width() const { return width() > 2 ? width() - 2 : 0; }
  int interior_height() const { return height() > 2 ? height() - 2 : 0; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

Rect grid_rect(GridSize g);

enum class Metric { euclidean, max };

/// max(0, log2 x); throws DomainError for x <= 0.
double log_plus(double x);

/// min(|a-b|, N-|a-b|) for coordinates in [0, N).
int torus_coord_distance(int a, int b, int side);
double torus_distance(Vertex v, Vertex w, GridSize g, Metric metric);
int torus_max_distance(Vertex v, Vertex w, GridSize g);

/// Smallest c >= 0 with 2^c >= x (x >= 1).
int ceil_log2(std::int64_t x);

/// r(v,w) = n - ceil(log2(d_inf^N(v,w) + 1)).
int shared_scale_count(Vertex v, Vertex w, GridSize g);

/// Number of torus classes of side-2^k boxes that contain both v and w.
/// For 2^k < N this is (2^k - r1)_+ (2^k - r2)_+; at k = n every class
/// contains every vertex and the count is N^2.
std::int64_t common_box_count(Vertex v, Vertex w, int k, GridSize g);

enum class BoxFamily { disjoint, torus };

struct DyadicBoxId {
  int level = 0;
  Vertex anchor;
  BoxFamily family = BoxFamily::disjoint;
  friend auto operator<=>(const DyadicBoxId&, const DyadicBoxId&) = default;
};

/// The unique box of the partition BD_k containing v.
DyadicBoxId disjoint_box(Vertex v, int k, GridSize g);
/// Canonical representative (anchor reduced mod N) of a torus box.
DyadicBoxId canonical_torus_box(int k, std::int64_t ax, std::int64_t ay,
                                GridSize g);
/// All 2^{2k} torus classes of side-2^k boxes containing v.
std::vector<DyadicBoxId> torus_boxes_containing(Vertex v, int k, GridSize g);
bool box_contains(const DyadicBoxId& box, Vertex v, GridSize g);

/// side(lambda) = max(1, round(N^{1-lambda})), with side(0) = N.
int scale_box_side(double lambda, GridSize g);

struct ScaleBox {
  Vertex center;
  double lambda = 0.0;
  int side = 1;
  Rect extent;
};

/// [v]_lambda clipped to V_N. lambda = 0 gives V_N and lambda = 1 gives {v};
/// in between the box is v +- floor(side/2) in each coordinate.
ScaleBox scale_box(Vertex v, double lambda, GridSize g);
bool scale_boxes_intersect(Vertex v, Vertex w, double lambda, GridSize g);

/// Largest lambda on the grid {i / (n * resolution)} at which [v]_lambda and
/// [w]_lambda intersect. resolution = 0 returns the continuum supremum.
double branching_scale(Vertex v, Vertex w, GridSize g, int resolution = 1);

}  // namespace sidgff
