#include "sidgff/samplers.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <sstream>

#include "sidgff/error.hpp"
#include "sidgff/rng.hpp"

namespace sidgff {

namespace {

// Stream tags keep the key spaces of different field kinds disjoint.
constexpr std::uint64_t kTagDgff = 0xD6FF;
constexpr std::uint64_t kTagIbrw = 0x1B12;
constexpr std::uint64_t kTagMibrw = 0x31B2;
constexpr std::uint64_t kTagSpectral = 0x5EC7;
constexpr std::uint64_t kTagCoupled = 0xC0C0;

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

void check_dense_limit(GridSize g, int max_side) {
  if (g.side() > max_side) {
    std::ostringstream os;
    os << "grid side " << g.side() << " exceeds the dense-factorization limit " << max_side;
    throw SizeLimitError(os.str());
  }
}

// out[x] = sum_{j=0}^{L-1} in[(x - j) mod N] along one line with a stride.
void cyclic_window(const double* in, double* out, int N, int L, int stride) {
  if (L >= N) {
    double total = 0.0;
    for (int x = 0; x < N; ++x) total += in[x * stride];
    for (int x = 0; x < N; ++x) out[x * stride] = total;
    return;
  }
  double s = 0.0;
  for (int j = 0; j < L; ++j) s += in[((N - j) % N) * stride];
  out[0] = s;
  for (int x = 1; x < N; ++x) {
    s += in[x * stride] - in[((x - L + N) % N) * stride];
    out[x * stride] = s;
  }
}

}  // namespace

std::string to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::dgff: return "dgff";
    case FieldKind::psi: return "psi";
    case FieldKind::ibrw: return "ibrw";
    case FieldKind::mibrw: return "mibrw";
    case FieldKind::tmibrw: return "tmibrw";
    case FieldKind::coupled: return "coupled";
  }
  return "unknown";
}

FieldKind parse_field_kind(const std::string& name) {
  for (FieldKind k : {FieldKind::dgff, FieldKind::psi, FieldKind::ibrw, FieldKind::mibrw,
                      FieldKind::tmibrw, FieldKind::coupled}) {
    if (to_string(k) == name) return k;
  }
  throw ValidationError("unknown field kind '" + name + "'");
}

std::string to_string(DgffMethod method) {
  return method == DgffMethod::cholesky ? "cholesky" : "precision";
}

DgffMethod parse_dgff_method(const std::string& name) {
  if (name == "cholesky") return DgffMethod::cholesky;
  if (name == "precision") return DgffMethod::precision;
  throw ValidationError("unknown DGFF method '" + name + "'");
}

double FieldSample::max() const {
  return *std::max_element(values.begin(), values.end());
}

DgffSampler::DgffSampler(GridSize g, DgffMethod method, int max_side)
    : g_(g), method_(method), idx_(grid_rect(g)) {
  if (g.n < 1) {
    throw RangeError("sampling needs n >= 1");
  }
  if (idx_.size() == 0) {
    return;  // V_2: every vertex is on the outer ring
  }
  if (method == DgffMethod::cholesky) {
    check_dense_limit(g, max_side);
    const auto green = green_matrix_cached(g);
    Eigen::LLT<Eigen::MatrixXd> llt(green->values());
    if (llt.info() != Eigen::Success) {
      throw Error("internal failure: Green matrix is not positive definite");
    }
    chol_ = llt.matrixL();
  } else {
    precision_ = std::make_unique<GreenSolver>(grid_rect(g));
    const Eigen::VectorXd d = precision_->factor().vectorD();
    inv_sqrt_d_ = d.cwiseSqrt().cwiseInverse();
  }
}

void DgffSampler::sample_interior(std::uint64_t seed, Eigen::VectorXd& out) const {
  const int m = idx_.size();
  out.resize(m);
  if (m == 0) return;
  NormalStream normals(derive_key(seed, {kTagDgff}));
  Eigen::VectorXd z(m);
  normals.fill(z.data(), m);
  if (method_ == DgffMethod::cholesky) {
    out.noalias() = chol_.triangularView<Eigen::Lower>() * z;
    return;
  }
  // Laplacian = Pinv L D L^T P  =>  Pinv L^{-T} D^{-1/2} z has covariance
  // Laplacian^{-1}; G = 2 pi Laplacian^{-1}.
  const auto& f = precision_->factor();
  Eigen::VectorXd y = z.cwiseProduct(inv_sqrt_d_);
  f.matrixU().solveInPlace(y);
  out = f.permutationPinv() * y;
  out *= std::sqrt(4.0 * kGreenNormalization);
}

FieldSample DgffSampler::sample(std::uint64_t seed) const {
  FieldSample s;
  s.kind = FieldKind::dgff;
  s.grid = g_;
  s.seed = seed;
  s.values.assign(static_cast<std::size_t>(g_.volume()), 0.0);
  Eigen::VectorXd inner;
  sample_interior(seed, inner);
  for (int i = 0; i < idx_.size(); ++i) {
    s.values[vertex_index(idx_.vertex(i), g_.side())] = inner[i];
  }
  return s;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> psi_linear_map(
    const StepProfile& p, GridSize g, BoxSolver& solver, const std::vector<Vertex>* rows) {
  Eigen::SparseMatrix<double, Eigen::RowMajor> prev =
      scale_harmonic_map(g, 0.0, solver, rows);
  Eigen::SparseMatrix<double, Eigen::RowMajor> a = prev;  // zero map with the right shape
  for (std::size_t i = 0; i < p.size(); ++i) {
    Eigen::SparseMatrix<double, Eigen::RowMajor> cur =
        scale_harmonic_map(g, p.lambdas()[i], solver, rows);
    a += p.sigmas()[i] * (cur - prev);
    prev = std::move(cur);
  }
  a.prune(0.0);
  return a;
}

PsiSampler::PsiSampler(const StepProfile& p, GridSize g, DgffMethod method, int max_side)
    : p_(p), dgff_(g, method, max_side) {
  BoxSolver solver;
  a_ = psi_linear_map(p, g, solver);
}

void PsiSampler::sample_interior(std::uint64_t seed, Eigen::VectorXd& phi,
                                 Eigen::VectorXd& out) const {
  dgff_.sample_interior(seed, phi);
  out.noalias() = a_ * phi;
}

FieldSample PsiSampler::sample(std::uint64_t seed) const {
  const GridSize g = dgff_.grid();
  FieldSample s;
  s.kind = FieldKind::psi;
  s.grid = g;
  s.seed = seed;
  s.profile = p_;
  s.values.assign(static_cast<std::size_t>(g.volume()), 0.0);
  Eigen::VectorXd phi, psi;
  sample_interior(seed, phi, psi);
  const InteriorIndex& idx = dgff_.index();
  for (int i = 0; i < idx.size(); ++i) {
    s.values[vertex_index(idx.vertex(i), g.side())] = psi[i];
  }
  return s;
}

IbrwSampler::IbrwSampler(const StepProfile& p, GridSize g, int t)
    : p_(p), g_(g), t_(t < 0 ? g.n : t) {
  if (t_ > g.n) {
    throw RangeError("IBRW time t must lie in [0, n]");
  }
}

FieldSample IbrwSampler::sample(std::uint64_t seed) const {
  const int n = g_.n;
  const int N = g_.side();
  FieldSample s;
  s.kind = FieldKind::ibrw;
  s.grid = g_;
  s.seed = seed;
  s.profile = p_;
  s.t = t_;
  s.values.assign(static_cast<std::size_t>(g_.volume()), 0.0);
  const double sl2 = std::sqrt(std::log(2.0));
  for (int k = n - t_; k <= n; ++k) {
    const double c = sl2 * p_.sigma(static_cast<double>(n - k) / n);
    const int L = 1 << k;
    for (int ay = 0; ay < N; ay += L) {
      for (int ax = 0; ax < N; ax += L) {
        const double a = c * keyed_normal(derive_key(seed, {kTagIbrw, std::uint64_t(k),
                                                            std::uint64_t(ax), std::uint64_t(ay)}));
        for (int y = ay; y < ay + L; ++y) {
          for (int x = ax; x < ax + L; ++x) {
            s.values[vertex_index({x, y}, N)] += a;
          }
        }
      }
    }
  }
  return s;
}

std::vector<double> IbrwSampler::sample_at(std::uint64_t seed,
                                           const std::vector<Vertex>& points) const {
  const int n = g_.n;
  const double sl2 = std::sqrt(std::log(2.0));
  std::vector<double> out(points.size(), 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!in_grid(points[i], g_)) {
      throw RangeError("IBRW evaluation point outside the grid");
    }
    for (int k = n - t_; k <= n; ++k) {
      const DyadicBoxId b = disjoint_box(points[i], k, g_);
      out[i] += sl2 * p_.sigma(static_cast<double>(n - k) / n) *
                keyed_normal(derive_key(seed, {kTagIbrw, std::uint64_t(k),
                                               std::uint64_t(b.anchor.x),
                                               std::uint64_t(b.anchor.y)}));
    }
  }
  return out;
}

MibrwSampler::MibrwSampler(const StepProfile& p, GridSize g, int k0, bool keep_partials)
    : p_(p), g_(g), k0_(k0), keep_partials_(keep_partials) {
  if (k0 < 0 || k0 > g.n) {
    throw RangeError("MIBRW truncation k0 must lie in [0, n]");
  }
}

double MibrwSampler::level_weight(int k) const {
  const int n = g_.n;
  return std::ldexp(1.0, -k) * p_.sigma(n == 0 ? 0.0 : static_cast<double>(n - k) / n);
}

std::vector<double> MibrwSampler::level_noise(std::uint64_t seed, int k) const {
  std::vector<double> b(static_cast<std::size_t>(g_.volume()));
  NormalStream normals(derive_key(seed, {kTagMibrw, std::uint64_t(k)}));
  normals.fill(b.data(), b.size());
  return b;
}

FieldSample MibrwSampler::sample(std::uint64_t seed) const {
  const int n = g_.n;
  const int N = g_.side();
  FieldSample s;
  s.kind = k0_ > 0 ? FieldKind::tmibrw : FieldKind::mibrw;
  s.grid = g_;
  s.seed = seed;
  s.profile = p_;
  s.k0 = k0_;
  s.values.assign(static_cast<std::size_t>(g_.volume()), 0.0);
  std::vector<double> tmp(s.values.size());
  std::vector<double> win(s.values.size());
  // Coarse levels first so that partial_sums[t] holds levels n..n-t.
  for (int k = n; k >= k0_; --k) {
    const std::vector<double> b = level_noise(seed, k);
    const int L = 1 << k;
    for (int y = 0; y < N; ++y) cyclic_window(&b[y * N], &tmp[y * N], N, L, 1);
    for (int x = 0; x < N; ++x) cyclic_window(&tmp[x], &win[x], N, L, N);
    const double c = level_weight(k);
    for (std::size_t i = 0; i < win.size(); ++i) s.values[i] += c * win[i];
    if (keep_partials_) s.partial_sums.push_back(s.values);
  }
  return s;
}

FieldSample MibrwSampler::sample_naive(std::uint64_t seed) const {
  const int n = g_.n;
  const int N = g_.side();
  FieldSample s;
  s.kind = k0_ > 0 ? FieldKind::tmibrw : FieldKind::mibrw;
  s.grid = g_;
  s.seed = seed;
  s.profile = p_;
  s.k0 = k0_;
  s.values.assign(static_cast<std::size_t>(g_.volume()), 0.0);
  for (int k = n; k >= k0_; --k) {
    const std::vector<double> b = level_noise(seed, k);
    const double c = level_weight(k);
    for (int y = 0; y < N; ++y) {
      for (int x = 0; x < N; ++x) {
        double acc = 0.0;
        for (const DyadicBoxId& box : torus_boxes_containing({x, y}, k, g_)) {
          acc += b[vertex_index(box.anchor, N)];
        }
        s.values[vertex_index({x, y}, N)] += c * acc;
      }
    }
    if (keep_partials_) s.partial_sums.push_back(s.values);
  }
  return s;
}

struct MibrwSpectralSampler::Plan {
  fftw_plan plan = nullptr;
  int size = 0;
};

MibrwSpectralSampler::MibrwSpectralSampler(const StepProfile& p, GridSize g, int k0)
    : g_(g), plan_(std::make_unique<Plan>()) {
  if (k0 < 0 || k0 > g.n) {
    throw RangeError("MIBRW truncation k0 must lie in [0, n]");
  }
  const int n = g.n;
  const int N = g.side();
  const std::size_t M = static_cast<std::size_t>(N) * N;
  plan_->size = N;
  fftw_complex* in = fftw_alloc_complex(M);
  fftw_complex* out = fftw_alloc_complex(M);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan_->plan = fftw_plan_dft_2d(N, N, in, out, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  // Covariance as a function of the torus displacement.
  std::vector<std::vector<double>> cover(n + 1, std::vector<double>(N));
  for (int k = k0; k <= n; ++k) {
    const int L = 1 << k;
    for (int d = 0; d < N; ++d) {
      const int r = std::min(d, N - d);
      cover[k][d] = L >= N ? N : std::max(0, L - r);
    }
  }
  for (int dy = 0; dy < N; ++dy) {
    for (int dx = 0; dx < N; ++dx) {
      double c = 0.0;
      for (int k = k0; k <= n; ++k) {
        const double sig = p.sigma(n == 0 ? 0.0 : static_cast<double>(n - k) / n);
        c += sig * sig * std::ldexp(1.0, -2 * k) * cover[k][dx] * cover[k][dy];
      }
      in[dy * N + dx][0] = c;
      in[dy * N + dx][1] = 0.0;
    }
  }
  fftw_execute_dft(plan_->plan, in, out);
  eig_.resize(M);
  scale_.resize(M);
  for (std::size_t i = 0; i < M; ++i) {
    eig_[i] = std::max(0.0, out[i][0]);
    scale_[i] = std::sqrt(eig_[i] / static_cast<double>(M));
  }
  fftw_free(in);
  fftw_free(out);
}

MibrwSpectralSampler::~MibrwSpectralSampler() {
  if (plan_ && plan_->plan) {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_->plan);
  }
}

void MibrwSpectralSampler::sample_pair(std::uint64_t seed, std::vector<double>& first,
                                       std::vector<double>& second) const {
  const int N = plan_->size;
  const std::size_t M = static_cast<std::size_t>(N) * N;
  fftw_complex* in = fftw_alloc_complex(M);
  fftw_complex* out = fftw_alloc_complex(M);
  NormalStream normals(derive_key(seed, {kTagSpectral}));
  double* z = &in[0][0];
  normals.fill(z, 2 * M);
  for (std::size_t i = 0; i < M; ++i) {
    z[2 * i] *= scale_[i];
    z[2 * i + 1] *= scale_[i];
  }
  fftw_execute_dft(plan_->plan, in, out);
  first.resize(M);
  second.resize(M);
  for (std::size_t i = 0; i < M; ++i) {
    first[i] = out[i][0];
    second[i] = out[i][1];
  }
  fftw_free(in);
  fftw_free(out);
}

FieldSample sample_coupled(const FieldSample& base, const std::vector<double>& a,
                           std::uint64_t seed) {
  if (a.size() != base.values.size()) {
    throw ValidationError("coupling weights must cover every vertex");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0.0) {
      std::ostringstream os;
      const Vertex v = vertex_at(static_cast<int>(i), base.grid.side());
      os << "negative coupling weight at (" << v.x << ", " << v.y << "); kappa too small";
      throw KappaTooSmall(os.str());
    }
  }
  FieldSample s = base;
  s.kind = FieldKind::coupled;
  s.seed = seed;
  s.a = a;
  s.shared_x = keyed_normal(derive_key(seed, {kTagCoupled}));
  for (std::size_t i = 0; i < a.size(); ++i) {
    s.values[i] += a[i] * s.shared_x;
  }
  return s;
}

}  // namespace sidgff
