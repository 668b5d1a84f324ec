#include "sidgff/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include "sidgff/error.hpp"

namespace sidgff {

GridSize::GridSize(int exponent) : n(exponent) {
  if (exponent < 0 || exponent > 20) {
    throw RangeError("grid exponent n must lie in [0, 20], got " +
                     std::to_string(exponent));
  }
}

bool in_grid(Vertex v, GridSize g) {
  const int N = g.side();
  return v.x >= 0 && v.x < N && v.y >= 0 && v.y < N;
}

bool is_interior(Vertex v, GridSize g) {
  const int N = g.side();
  return v.x >= 1 && v.x <= N - 2 && v.y >= 1 && v.y <= N - 2;
}

bool in_bulk(Vertex v, GridSize g, double delta) {
  const double N = g.side();
  auto inside = [&](int c) { return c > delta * N && c < (1.0 - delta) * N; };
  return inside(v.x) && inside(v.y);
}

Rect grid_rect(GridSize g) { return {0, 0, g.side() - 1, g.side() - 1}; }

double log_plus(double x) {
  if (!(x > 0.0)) {
    throw DomainError("log_plus requires x > 0");
  }
  return std::max(0.0, std::log2(x));
}

int torus_coord_distance(int a, int b, int side) {
  const int d = std::abs(a - b) % side;
  return std::min(d, side - d);
}

int torus_max_distance(Vertex v, Vertex w, GridSize g) {
  const int N = g.side();
  return std::max(torus_coord_distance(v.x, w.x, N),
                  torus_coord_distance(v.y, w.y, N));
}

double torus_distance(Vertex v, Vertex w, GridSize g, Metric metric) {
  const int N = g.side();
  const int r1 = torus_coord_distance(v.x, w.x, N);
  const int r2 = torus_coord_distance(v.y, w.y, N);
  if (metric == Metric::max) {
    return std::max(r1, r2);
  }
  return std::hypot(static_cast<double>(r1), static_cast<double>(r2));
}

int ceil_log2(std::int64_t x) {
  if (x < 1) {
    throw DomainError("ceil_log2 requires x >= 1");
  }
  int c = 0;
  while ((std::int64_t{1} << c) < x) {
    ++c;
  }
  return c;
}

int shared_scale_count(Vertex v, Vertex w, GridSize g) {
  return g.n - ceil_log2(torus_max_distance(v, w, g) + 1);
}

namespace {

// Number of cyclic windows of length L on Z_N covering two points at cyclic
// distance d. For L < N the windows containing both points sit on the short
// arc only, since L <= N/2.
std::int64_t cyclic_cover_count(int d, std::int64_t L, int N) {
  if (L >= N) {
    return N;
  }
  return std::max<std::int64_t>(0, L - d);
}

}  // namespace

std::int64_t common_box_count(Vertex v, Vertex w, int k, GridSize g) {
  if (k < 0 || k > g.n) {
    throw RangeError("box level k must lie in [0, n]");
  }
  const int N = g.side();
  const std::int64_t L = std::int64_t{1} << k;
  return cyclic_cover_count(torus_coord_distance(v.x, w.x, N), L, N) *
         cyclic_cover_count(torus_coord_distance(v.y, w.y, N), L, N);
}

DyadicBoxId disjoint_box(Vertex v, int k, GridSize g) {
  if (k < 0 || k > g.n) {
    throw RangeError("box level k must lie in [0, n]");
  }
  const int mask = ~((1 << k) - 1);
  return {k, {v.x & mask, v.y & mask}, BoxFamily::disjoint};
}

DyadicBoxId canonical_torus_box(int k, std::int64_t ax, std::int64_t ay,
                                GridSize g) {
  const std::int64_t N = g.side();
  auto wrap = [N](std::int64_t a) { return static_cast<int>(((a % N) + N) % N); };
  return {k, {wrap(ax), wrap(ay)}, BoxFamily::torus};
}

std::vector<DyadicBoxId> torus_boxes_containing(Vertex v, int k, GridSize g) {
  if (k < 0 || k > g.n) {
    throw RangeError("box level k must lie in [0, n]");
  }
  const int L = 1 << k;
  std::vector<DyadicBoxId> out;
  out.reserve(static_cast<std::size_t>(L) * L);
  for (int j = 0; j < L; ++j) {
    for (int i = 0; i < L; ++i) {
      out.push_back(canonical_torus_box(k, v.x - i, v.y - j, g));
    }
  }
  return out;
}

bool box_contains(const DyadicBoxId& box, Vertex v, GridSize g) {
  const int L = 1 << box.level;
  if (box.family == BoxFamily::disjoint) {
    return v.x >= box.anchor.x && v.x < box.anchor.x + L &&
           v.y >= box.anchor.y && v.y < box.anchor.y + L;
  }
  const int N = g.side();
  const int dx = ((v.x - box.anchor.x) % N + N) % N;
  const int dy = ((v.y - box.anchor.y) % N + N) % N;
  return dx < L && dy < L;
}

int scale_box_side(double lambda, GridSize g) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw RangeError("scale lambda must lie in [0, 1]");
  }
  if (lambda == 0.0) {
    return g.side();
  }
  const double raw = std::pow(static_cast<double>(g.side()), 1.0 - lambda);
  return std::max(1, static_cast<int>(std::lround(raw)));
}

ScaleBox scale_box(Vertex v, double lambda, GridSize g) {
  const int side = scale_box_side(lambda, g);
  const int N = g.side();
  ScaleBox box{v, lambda, side, grid_rect(g)};
  if (lambda == 0.0) {
    return box;
  }
  const int h = lambda == 1.0 ? 0 : side / 2;
  box.extent = {std::max(0, v.x - h), std::max(0, v.y - h),
                std::min(N - 1, v.x + h), std::min(N - 1, v.y + h)};
  return box;
}

bool scale_boxes_intersect(Vertex v, Vertex w, double lambda, GridSize g) {
  const Rect a = scale_box(v, lambda, g).extent;
  const Rect b = scale_box(w, lambda, g).extent;
  return a.x0 <= b.x1 && b.x0 <= a.x1 && a.y0 <= b.y1 && b.y0 <= a.y1;
}

double branching_scale(Vertex v, Vertex w, GridSize g, int resolution) {
  if (v == w) {
    return 1.0;
  }
  if (resolution < 0) {
    throw RangeError("branching_scale resolution must be >= 0");
  }
  if (resolution == 0) {
    // Boxes meet iff 2 floor(side/2) >= d_inf; solve for the smallest side.
    const int d = std::max(std::abs(v.x - w.x), std::abs(v.y - w.y));
    const int s_min = (d % 2 == 0) ? d : d + 1;
    const double lambda =
        1.0 - std::log(s_min - 0.5) / std::log(static_cast<double>(g.side()));
    return std::clamp(lambda, 0.0, 1.0);
  }
  const int steps = g.n * resolution;
  for (int i = steps; i >= 0; --i) {
    const double lambda = static_cast<double>(i) / steps;
    if (scale_boxes_intersect(v, w, lambda, g)) {
      return lambda;
    }
  }
  return 0.0;
}

}  // namespace sidgff
