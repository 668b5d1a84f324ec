#include "sidgff/green.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "sidgff/error.hpp"
#include "sidgff/rng.hpp"

namespace sidgff {

InteriorIndex::InteriorIndex(const Rect& domain)
    : domain_(domain), w_(domain.interior_width()), h_(domain.interior_height()) {}

std::optional<int> InteriorIndex::index(Vertex v) const {
  if (!domain_.interior_contains(v)) {
    return std::nullopt;
  }
  return (v.y - domain_.y0 - 1) * w_ + (v.x - domain_.x0 - 1);
}

Eigen::SparseMatrix<double> interior_laplacian(const InteriorIndex& idx) {
  const int w = idx.width();
  const int h = idx.height();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(idx.size()) * 5);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      trips.emplace_back(i, i, 4.0);
      if (x > 0) trips.emplace_back(i, i - 1, -1.0);
      if (x + 1 < w) trips.emplace_back(i, i + 1, -1.0);
      if (y > 0) trips.emplace_back(i, i - w, -1.0);
      if (y + 1 < h) trips.emplace_back(i, i + w, -1.0);
    }
  }
  Eigen::SparseMatrix<double> lap(idx.size(), idx.size());
  lap.setFromTriplets(trips.begin(), trips.end());
  return lap;
}

GreenSolver::GreenSolver(const Rect& domain) : idx_(domain) {
  if (idx_.size() < 1) {
    throw DomainError("Green function needs a domain with an interior vertex");
  }
  ldlt_.compute(interior_laplacian(idx_));
  if (ldlt_.info() != Eigen::Success) {
    throw Error("internal failure: Dirichlet Laplacian factorization failed");
  }
}

Eigen::VectorXd GreenSolver::solve_laplacian(const Eigen::VectorXd& b) const {
  return ldlt_.solve(b);
}

Eigen::MatrixXd GreenSolver::solve_laplacian(const Eigen::MatrixXd& b) const {
  return ldlt_.solve(b);
}

Eigen::VectorXd GreenSolver::row(Vertex u) const {
  const auto i = idx_.index(u);
  if (!i) {
    throw RangeError("Green row requested for a non-interior vertex");
  }
  Eigen::VectorXd e = Eigen::VectorXd::Zero(idx_.size());
  e[*i] = 1.0;
  // visits = 4 * Laplacian^{-1}
  return (4.0 * kGreenNormalization) * ldlt_.solve(e);
}

GreenMatrix::GreenMatrix(const Rect& domain, Eigen::MatrixXd values)
    : idx_(domain), values_(std::move(values)) {}

double GreenMatrix::operator()(Vertex u, Vertex v) const {
  const auto i = idx_.index(u);
  const auto j = idx_.index(v);
  if (!i || !j) {
    return 0.0;
  }
  return values_(*i, *j);
}

GreenMatrix green_matrix(const Rect& domain) {
  GreenSolver solver(domain);
  const int n = solver.index().size();
  Eigen::MatrixXd g(n, n);
  constexpr int kBlock = 256;
  for (int start = 0; start < n; start += kBlock) {
    const int cols = std::min(kBlock, n - start);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, cols);
    for (int c = 0; c < cols; ++c) {
      rhs(start + c, c) = 1.0;
    }
    g.middleCols(start, cols) = solver.solve_laplacian(rhs);
  }
  g *= 4.0 * kGreenNormalization;
  // Symmetrize away round-off so downstream factorizations see an exact
  // symmetric matrix.
  Eigen::MatrixXd sym = 0.5 * (g + g.transpose());
  return GreenMatrix(domain, std::move(sym));
}

namespace {

std::optional<std::filesystem::path> cache_path(GridSize g) {
  const char* dir = std::getenv("SIDGFF_CACHE_DIR");
  if (dir == nullptr || *dir == '\0') {
    return std::nullopt;
  }
  return std::filesystem::path(dir) / ("green_n" + std::to_string(g.n) + ".bin");
}

constexpr char kCacheMagic[8] = {'S', 'I', 'D', 'G', 'F', 'F', 'G', '1'};

std::optional<Eigen::MatrixXd> load_cached(const std::filesystem::path& path, int size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    return std::nullopt;
  }
  char magic[8];
  std::int64_t stored = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&stored), sizeof(stored));
  if (!in || std::memcmp(magic, kCacheMagic, 8) != 0 || stored != size) {
    return std::nullopt;
  }
  Eigen::MatrixXd m(size, size);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double)) * size * size);
  if (!in) {
    return std::nullopt;
  }
  return m;
}

void store_cached(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  const auto tmp = path.string() + ".tmp";
  std::ofstream out(tmp, std::ios::binary);
  if (!out) {
    return;
  }
  const std::int64_t size = m.rows();
  out.write(kCacheMagic, 8);
  out.write(reinterpret_cast<const char*>(&size), sizeof(size));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double)) * size * size);
  out.close();
  if (out) {
    std::filesystem::rename(tmp, path, ec);
  }
}

}  // namespace

std::shared_ptr<const GreenMatrix> green_matrix_cached(GridSize g) {
  static std::mutex mutex;
  static std::map<int, std::shared_ptr<const GreenMatrix>> memo;
  std::lock_guard<std::mutex> lock(mutex);
  if (auto it = memo.find(g.n); it != memo.end()) {
    return it->second;
  }
  const Rect domain = grid_rect(g);
  const int size = InteriorIndex(domain).size();
  std::shared_ptr<const GreenMatrix> result;
  if (auto path = cache_path(g)) {
    if (auto m = load_cached(*path, size)) {
      result = std::make_shared<GreenMatrix>(domain, std::move(*m));
    }
  }
  if (!result) {
    auto fresh = std::make_shared<GreenMatrix>(green_matrix(domain));
    if (auto path = cache_path(g)) {
      store_cached(*path, fresh->values());
    }
    result = std::move(fresh);
  }
  // Keep memory bounded: only the few most recent sizes stay resident.
  if (memo.size() >= 3) {
    memo.erase(memo.begin());
  }
  memo[g.n] = result;
  return result;
}

namespace {

// Green function of (mu + T) on {1..L-1} with Dirichlet ends, T = 2I - A.
double green_1d(double mu, int L, int i, int j) {
  const double theta = std::acosh(1.0 + mu / 2.0);
  const int a = std::min(i, j);
  const int b = L - std::max(i, j);
  const double num = std::exp(theta * (a + b - L)) * (-std::expm1(-2.0 * theta * a)) *
                     (-std::expm1(-2.0 * theta * b));
  const double den = 2.0 * std::sinh(theta) * (-std::expm1(-2.0 * theta * L));
  return num / den;
}

}  // namespace

double green_spectral(const Rect& domain, Vertex u, Vertex v) {
  if (!domain.interior_contains(u) || !domain.interior_contains(v)) {
    return 0.0;
  }
  const int Lx = domain.x1 - domain.x0;
  const int Ly = domain.y1 - domain.y0;
  const int i = u.x - domain.x0;
  const int ip = v.x - domain.x0;
  const int j = u.y - domain.y0;
  const int jp = v.y - domain.y0;
  const double pi = std::numbers::pi;
  double acc = 0.0;
  for (int a = 1; a < Lx; ++a) {
    const double mu = 2.0 - 2.0 * std::cos(a * pi / Lx);
    const double phase = (2.0 / Lx) * std::sin(a * pi * i / Lx) * std::sin(a * pi * ip / Lx);
    acc += phase * green_1d(mu, Ly, j, jp);
  }
  return 4.0 * kGreenNormalization * acc;
}

WalkEstimate green_random_walk(const Rect& domain, Vertex u, Vertex v, std::int64_t walks,
                               std::uint64_t seed) {
  if (!domain.interior_contains(u)) throw DomainError("random walk must start in the interior");
  if (walks < 2) throw RangeError("green_random_walk needs at least two walks");
  std::mt19937_64 eng(derive_key(seed, {0x6A1C, std::uint64_t(u.x), std::uint64_t(u.y),
                                        std::uint64_t(v.x), std::uint64_t(v.y)}));
  std::uint64_t bits = 0;
  int left = 0;
  double sum = 0.0;
  double sum2 = 0.0;
  for (std::int64_t w = 0; w < walks; ++w) {
    Vertex z = u;
    double visits = 0.0;
    while (domain.interior_contains(z)) {
      if (z == v) visits += 1.0;
      if (left == 0) {
        bits = eng();
        left = 32;
      }
      switch (bits & 3u) {
        case 0: ++z.x; break;
        case 1: --z.x; break;
        case 2: ++z.y; break;
        default: --z.y; break;
      }
      bits >>= 2;
      --left;
    }
    sum += visits;
    sum2 += visits * visits;
  }
  const double mean = sum / walks;
  const double var = (sum2 - walks * mean * mean) / (walks - 1);
  return {kGreenNormalization * mean, kGreenNormalization * std::sqrt(var / walks)};
}

GreenAsymptotics green_asymptotic_deviation(GridSize g, double delta) {
  const auto green = green_matrix_cached(g);
  std::vector<Vertex> bulk;
  for (int y = 0; y < g.side(); ++y) {
    for (int x = 0; x < g.side(); ++x) {
      if (in_bulk({x, y}, g, delta)) bulk.push_back({x, y});
    }
  }
  if (bulk.empty()) throw DomainError("V_N^delta is empty");
  const double logn = std::log(static_cast<double>(g.side()));
  GreenAsymptotics out;
  out.grid = g;
  for (std::size_t i = 0; i < bulk.size(); ++i) {
    for (std::size_t j = i; j < bulk.size(); ++j) {
      const double dx = bulk[i].x - bulk[j].x;
      const double dy = bulk[i].y - bulk[j].y;
      const double dist = std::max(1.0, std::hypot(dx, dy));
      const double dev = std::abs((*green)(bulk[i], bulk[j]) - (logn - std::log(dist)));
      if (dev > out.sup_deviation) {
        out.sup_deviation = dev;
        out.u = bulk[i];
        out.v = bulk[j];
      }
    }
  }
  return out;
}

const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>& BoxSolver::factor(int w, int h) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto& entry = cache_[{w, h}];
  if (!entry.ldlt) {
    InteriorIndex idx(Rect{0, 0, w + 1, h + 1});
    entry.ldlt = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    entry.ldlt->compute(interior_laplacian(idx));
    if (entry.ldlt->info() != Eigen::Success) {
      throw Error("internal failure: box Laplacian factorization failed");
    }
  }
  return *entry.ldlt;
}

std::size_t BoxSolver::cached_shapes() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.size();
}

SparseRow BoxSolver::exit_distribution(const Rect& box, Vertex v) {
  if (!box.interior_contains(v)) {
    return {{v, 1.0}};
  }
  const int w = box.interior_width();
  const int h = box.interior_height();
  const auto& ldlt = factor(w, h);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(w * h);
  const int lx = v.x - box.x0 - 1;
  const int ly = v.y - box.y0 - 1;
  e[ly * w + lx] = 1.0;
  const Eigen::VectorXd g = ldlt.solve(e);
  // P(exit at z) = sum over interior neighbours u of z of Laplacian^{-1}(v, u).
  SparseRow row;
  row.reserve(static_cast<std::size_t>(2 * (w + h)));
  for (int x = 0; x < w; ++x) {
    row.push_back({{box.x0 + 1 + x, box.y0}, g[x]});
    row.push_back({{box.x0 + 1 + x, box.y1}, g[(h - 1) * w + x]});
  }
  for (int y = 0; y < h; ++y) {
    row.push_back({{box.x0, box.y0 + 1 + y}, g[y * w]});
    row.push_back({{box.x1, box.y0 + 1 + y}, g[y * w + w - 1]});
  }
  return row;
}

HarmonicOperator::HarmonicOperator(const Rect& box, const Rect& domain, BoxSolver& solver)
    : box_(box), domain_(domain) {
  if (box.x0 < domain.x0 || box.y0 < domain.y0 || box.x1 > domain.x1 || box.y1 > domain.y1) {
    throw RangeError("harmonic operator box must lie inside the domain");
  }
  const int size = domain.width() * domain.height();
  std::vector<Eigen::Triplet<double>> trips;
  for (int y = domain.y0; y <= domain.y1; ++y) {
    for (int x = domain.x0; x <= domain.x1; ++x) {
      const Vertex v{x, y};
      const int r = domain_index(v);
      for (const auto& [z, weight] : solver.exit_distribution(box, v)) {
        trips.emplace_back(r, domain_index(z), weight);
      }
    }
  }
  m_.resize(size, size);
  m_.setFromTriplets(trips.begin(), trips.end());
}

HarmonicOperator harmonic_operator(const ScaleBox& box, const Rect& domain, BoxSolver& solver) {
  return HarmonicOperator(box.extent, domain, solver);
}

Eigen::SparseMatrix<double, Eigen::RowMajor> scale_harmonic_map(
    GridSize g, double lambda, BoxSolver& solver, const std::vector<Vertex>* rows) {
  const InteriorIndex idx(grid_rect(g));
  std::vector<Vertex> all;
  if (rows == nullptr) {
    all.reserve(idx.size());
    for (int i = 0; i < idx.size(); ++i) {
      all.push_back(idx.vertex(i));
    }
    rows = &all;
  }
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t r = 0; r < rows->size(); ++r) {
    const Vertex v = (*rows)[r];
    if (!idx.index(v)) {
      continue;  // outer ring: the field is zero there
    }
    if (lambda == 0.0) {
      continue;  // harmonic extension of zero boundary data
    }
    const ScaleBox box = scale_box(v, lambda, g);
    for (const auto& [z, weight] : solver.exit_distribution(box.extent, v)) {
      if (const auto c = idx.index(z)) {
        trips.emplace_back(static_cast<int>(r), *c, weight);
      }
    }
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> m(static_cast<int>(rows->size()), idx.size());
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

}  // namespace sidgff
