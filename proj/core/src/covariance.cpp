#include "sidgff/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "sidgff/error.hpp"
#include "sidgff/green.hpp"
#include "sidgff/rng.hpp"
#include "sidgff/stats.hpp"

namespace sidgff {

namespace {

constexpr double kGreenScale = 4.0 * kGreenNormalization;  // G = 2 pi Laplacian^{-1}

double level_fraction(int n, int k) {
  return n == 0 ? 0.0 : static_cast<double>(n - k) / n;
}

std::vector<Vertex> window_vertices(int x0, int y0, int side) {
  std::vector<Vertex> out;
  out.reserve(static_cast<std::size_t>(side) * side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      out.push_back({x0 + x, y0 + y});
    }
  }
  return out;
}

std::size_t keyed_index(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::size_t range) {
  const auto i = static_cast<std::size_t>(keyed_uniform(derive_key(seed, {a, b})) * range);
  return std::min(i, range - 1);
}

}  // namespace

Eigen::MatrixXd cov_psi(const StepProfile& p, GridSize g, int max_side) {
  if (g.side() > max_side) {
    std::ostringstream os;
    os << "cov_psi: grid side " << g.side() << " exceeds the dense limit " << max_side;
    throw SizeLimitError(os.str());
  }
  const auto green = green_matrix_cached(g);
  BoxSolver solver;
  const Eigen::SparseMatrix<double, Eigen::RowMajor> a = psi_linear_map(p, g, solver);
  const Eigen::MatrixXd ag = a * green->values();
  Eigen::MatrixXd c = ag * a.transpose();
  return 0.5 * (c + c.transpose());
}

Eigen::MatrixXd cov_psi_subset(const StepProfile& p, GridSize g,
                               const std::vector<Vertex>& points) {
  BoxSolver boxes;
  const Eigen::SparseMatrix<double, Eigen::RowMajor> a = psi_linear_map(p, g, boxes, &points);
  const GreenSolver solver(grid_rect(g));
  const Eigen::MatrixXd at = Eigen::MatrixXd(a.transpose());
  const Eigen::MatrixXd y = solver.solve_laplacian(at);
  Eigen::MatrixXd c = kGreenScale * (a * y);
  return 0.5 * (c + c.transpose());
}

Eigen::MatrixXd cov_dgff_block(GridSize g, const std::vector<Vertex>& sources,
                               const std::vector<Vertex>& targets) {
  const GreenSolver solver(grid_rect(g));
  const InteriorIndex& idx = solver.index();
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(idx.size(), static_cast<int>(sources.size()));
  for (std::size_t s = 0; s < sources.size(); ++s) {
    if (const auto i = idx.index(sources[s])) rhs(*i, static_cast<int>(s)) = 1.0;
  }
  const Eigen::MatrixXd y = solver.solve_laplacian(rhs);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<int>(sources.size()),
                                              static_cast<int>(targets.size()));
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const auto j = idx.index(targets[t]);
    if (!j) continue;
    for (std::size_t s = 0; s < sources.size(); ++s) {
      if (idx.index(sources[s])) out(static_cast<int>(s), static_cast<int>(t)) = kGreenScale * y(*j, static_cast<int>(s));
    }
  }
  return out;
}

IbrwCovariance::IbrwCovariance(const StepProfile& p, GridSize g, int t)
    : g_(g), t_(t < 0 ? g.n : t), level_var_(static_cast<std::size_t>(g.n) + 1) {
  if (t_ > g.n) throw RangeError("IBRW time t must lie in [0, n]");
  for (int k = 0; k <= g.n; ++k) {
    level_var_[k] = std::log(2.0) * p.sigma2(level_fraction(g.n, k));
  }
}

double IbrwCovariance::operator()(Vertex v, Vertex w) const {
  double c = 0.0;
  for (int k = g_.n - t_; k <= g_.n; ++k) {
    if ((v.x >> k) == (w.x >> k) && (v.y >> k) == (w.y >> k)) c += level_var_[k];
  }
  return c;
}

double IbrwCovariance::variance() const { return (*this)({0, 0}, {0, 0}); }

MibrwCovariance::MibrwCovariance(const StepProfile& p, GridSize g, int k0)
    : g_(g), k0_(k0), level_weight_(static_cast<std::size_t>(g.n) + 1) {
  if (k0 < 0 || k0 > g.n) throw RangeError("MIBRW truncation k0 must lie in [0, n]");
  for (int k = 0; k <= g.n; ++k) {
    level_weight_[k] = std::ldexp(1.0, -2 * k) * p.sigma2(level_fraction(g.n, k));
  }
}

double MibrwCovariance::operator()(Vertex v, Vertex w) const {
  const int start = std::max(k0_, ceil_log2(torus_max_distance(v, w, g_) + 1));
  double c = 0.0;
  for (int k = start; k <= g_.n; ++k) {
    c += level_weight_[k] * static_cast<double>(common_box_count(v, w, k, g_));
  }
  return c;
}

double MibrwCovariance::variance() const { return (*this)({0, 0}, {0, 0}); }

double MibrwCovariance::rho(Vertex v, Vertex w) const {
  return std::max(0.0, 2.0 * variance() - 2.0 * (*this)(v, w));
}

void finalize_series(DeviationSeries& s, double rel, double abs_threshold) {
  double top = 0.0;
  std::vector<double> x, y;
  for (const auto& [n, d] : s.deviation) {
    x.push_back(n);
    y.push_back(d);
    top = std::max(top, d);
  }
  s.threshold = abs_threshold > 0.0 ? abs_threshold : rel * std::max(1.0, top);
  s.slope = x.size() >= 2 ? least_squares(x, y).slope : 0.0;
  s.bounded = s.slope < s.threshold;
}

bool CovarianceReport::bounded() const {
  return std::all_of(items.begin(), items.end(), [](const auto& s) { return s.bounded; });
}

double cov_comp_item_i(int n) {
  const GridSize g(n);
  const MibrwCovariance cov(StepProfile::homogeneous(), g);
  double sup = 0.0;
  for (int dy = 0; dy < g.side(); ++dy) {
    for (int dx = 0; dx < g.side(); ++dx) {
      const Vertex o{0, 0}, w{dx, dy};
      const double d = std::max(1.0, torus_distance(o, w, g, Metric::euclidean));
      sup = std::max(sup, std::abs(cov(o, w) - (n - log_plus(d))));
    }
  }
  return sup;
}

double cov_comp_item_ii(const StepProfile& p, int n) {
  const GridSize g(n);
  const MibrwCovariance cov(p, g);
  double sup = 0.0;
  for (int dy = 0; dy < g.side(); ++dy) {
    for (int dx = 0; dx < g.side(); ++dx) {
      const Vertex o{0, 0}, w{dx, dy};
      const double d = std::max(1.0, torus_distance(o, w, g, Metric::euclidean));
      const double target = n * p.integrated((n - log_plus(d)) / n);
      sup = std::max(sup, std::abs(cov(o, w) - target));
    }
  }
  return sup;
}

double cov_comp_item_iii(int n, int sources, std::uint64_t seed) {
  const int N = 1 << n;
  const GridSize big(n + 2);
  const std::vector<Vertex> window = window_vertices(2 * N, 2 * N, N);
  std::vector<Vertex> src;
  if (static_cast<int>(window.size()) <= sources + 5) {
    src = window;
  } else {
    std::set<Vertex> chosen{{2 * N, 2 * N}, {3 * N - 1, 2 * N}, {2 * N, 3 * N - 1},
                            {3 * N - 1, 3 * N - 1}, {2 * N + N / 2, 2 * N + N / 2}};
    for (std::uint64_t i = 0; static_cast<int>(chosen.size()) < sources + 5; ++i) {
      chosen.insert(window[keyed_index(seed, n, i, window.size())]);
    }
    src.assign(chosen.begin(), chosen.end());
  }
  const Eigen::MatrixXd c = cov_dgff_block(big, src, window);
  const double l2 = std::log(2.0);
  double sup = 0.0;
  for (std::size_t s = 0; s < src.size(); ++s) {
    for (std::size_t t = 0; t < window.size(); ++t) {
      const double dx = src[s].x - window[t].x, dy = src[s].y - window[t].y;
      const double d = std::max(1.0, std::hypot(dx, dy));
      const double target = l2 * (n - log_plus(d));
      sup = std::max(sup, std::abs(c(static_cast<int>(s), static_cast<int>(t)) - target));
    }
  }
  return sup;
}

double cov_comp_item_iv(const StepProfile& p, int n) {
  const int N = 1 << n;
  const GridSize big(n + 2);
  const std::vector<Vertex> window = window_vertices(2 * N, 2 * N, N);
  const Eigen::MatrixXd c = cov_psi_subset(p, big, window);
  const MibrwCovariance s(p, GridSize(n));
  const double l2 = std::log(2.0);
  double sup = 0.0;
  for (std::size_t a = 0; a < window.size(); ++a) {
    const Vertex va{window[a].x - 2 * N, window[a].y - 2 * N};
    for (std::size_t b = a; b < window.size(); ++b) {
      const Vertex vb{window[b].x - 2 * N, window[b].y - 2 * N};
      sup = std::max(sup, std::abs(c(static_cast<int>(a), static_cast<int>(b)) - l2 * s(va, vb)));
    }
  }
  return sup;
}

CovarianceReport verify_cov_comp(const StepProfile& p, const CovCompOptions& opt) {
  CovarianceReport report;
  report.lemma = "cov_comp";
  for (const std::string& item : opt.items) {
    DeviationSeries s;
    s.item = item;
    const std::vector<int>& ns = item == "iv" ? opt.iv_ns : opt.ns;
    for (int n : ns) {
      if (auto it = opt.resume.find(item); it != opt.resume.end()) {
        if (auto jt = it->second.find(n); jt != it->second.end()) {
          s.deviation[n] = jt->second;
          continue;
        }
      }
      double d = 0.0;
      if (item == "i") {
        d = cov_comp_item_i(n);
      } else if (item == "ii") {
        d = cov_comp_item_ii(p, n);
      } else if (item == "iii") {
        d = cov_comp_item_iii(n, opt.sources, opt.seed);
      } else if (item == "iv") {
        d = cov_comp_item_iv(p, n);
      } else {
        throw ValidationError("unknown cov_comp item '" + item + "'");
      }
      s.deviation[n] = d;
      if (opt.on_result) opt.on_result(item, n, d);
    }
    finalize_series(s, opt.rel_threshold);
    report.items.push_back(std::move(s));
  }
  return report;
}

IncrementLemmaResult verify_increment_lemma(const StepProfile& p, GridSize g, double delta,
                                            std::size_t max_pairs, std::uint64_t seed) {
  const double N = g.side();
  std::vector<std::string> failed;
  double min_pow = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double dl = p.lambdas()[i] - p.lambda_start(i);
    min_pow = std::min(min_pow, std::pow(2.0, 2.0 / dl));
  }
  if (!(delta > 0.0 && delta < 0.5)) failed.push_back("delta in (0, 1/2)");
  if (min_pow > N) failed.push_back("min_i 2^(2/dlambda_i) <= N");
  if (!(std::pow(N, p.lambdas().front()) > 1.0 / delta)) failed.push_back("N^lambda_1 > 1/delta");
  if (!failed.empty()) {
    std::ostringstream os;
    os << "increment lemma hypotheses fail at N = " << g.side() << ":";
    for (const auto& f : failed) os << " [" << f << "]";
    throw HypothesisViolation(os.str());
  }

  std::vector<Vertex> bulk;
  for (int y = 0; y < g.side(); ++y) {
    for (int x = 0; x < g.side(); ++x) {
      if (in_bulk({x, y}, g, delta)) bulk.push_back({x, y});
    }
  }
  // Scale index i whose box size class contains the branching scale: the
  // boxes of half-width floor(side(lambda_i)/2) are the smallest that meet.
  auto scale_of = [&](Vertex v, Vertex w) {
    const int d = std::max(std::abs(v.x - w.x), std::abs(v.y - w.y));
    const int need = (d + 1) / 2;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (scale_box_side(p.lambdas()[i], g) / 2 == need) return static_cast<int>(i);
    }
    return -1;
  };
  std::vector<std::pair<std::size_t, std::size_t>> eligible;
  for (std::size_t a = 0; a < bulk.size(); ++a) {
    for (std::size_t b = a; b < bulk.size(); ++b) {
      if (scale_of(bulk[a], bulk[b]) >= 0) eligible.emplace_back(a, b);
    }
  }
  IncrementLemmaResult res;
  res.grid = g;
  res.delta = delta;
  res.eligible_pairs = eligible.size();
  if (eligible.empty()) return res;

  std::vector<std::pair<std::size_t, std::size_t>> chosen;
  if (eligible.size() <= max_pairs) {
    chosen = eligible;
  } else {
    std::set<std::size_t> picks;
    for (std::uint64_t i = 0; picks.size() < max_pairs; ++i) {
      picks.insert(keyed_index(seed, 0xB1, i, eligible.size()));
    }
    for (std::size_t i : picks) chosen.push_back(eligible[i]);
  }
  res.checked_pairs = chosen.size();

  std::map<Vertex, int> slot;
  std::vector<Vertex> verts;
  for (const auto& [a, b] : chosen) {
    for (std::size_t i : {a, b}) {
      if (slot.emplace(bulk[i], static_cast<int>(verts.size())).second) verts.push_back(bulk[i]);
    }
  }
  BoxSolver boxes;
  const std::size_t m = p.size();
  std::vector<Eigen::SparseMatrix<double, Eigen::RowMajor>> inc;
  Eigen::SparseMatrix<double, Eigen::RowMajor> prev = scale_harmonic_map(g, 0.0, boxes, &verts);
  for (std::size_t i = 0; i < m; ++i) {
    auto cur = scale_harmonic_map(g, p.lambdas()[i], boxes, &verts);
    inc.push_back(cur - prev);
    prev = std::move(cur);
  }
  const GreenSolver solver(grid_rect(g));
  std::vector<Eigen::MatrixXd> gy;  // G D_j^T
  for (const auto& d : inc) {
    gy.push_back(kGreenScale * solver.solve_laplacian(Eigen::MatrixXd(d.transpose())));
  }
  const double log_n = std::log(N);
  for (const auto& [a, b] : chosen) {
    const int sa = slot.at(bulk[a]), sb = slot.at(bulk[b]);
    const int top = scale_of(bulk[a], bulk[b]);
    for (int i = 0; i <= top; ++i) {
      for (int j = 0; j <= top; ++j) {
        const double c = inc[i].row(sa).dot(gy[j].col(sb));
        const double dl = p.lambdas()[i] - p.lambda_start(i);
        const double target = i == j ? dl * log_n : 0.0;
        res.sup_deviation = std::max(res.sup_deviation, std::abs(c - target));
        if (a == b && i != j) res.same_vertex_cross = std::max(res.same_vertex_cross, std::abs(c));
      }
    }
  }
  return res;
}

double psi_variance_excess(const StepProfile& p, GridSize g) {
  const Eigen::MatrixXd c = cov_psi(p, g);
  return c.diagonal().maxCoeff() - std::log(static_cast<double>(g.side())) * p.integrated(1.0);
}

bool PairCheck::within(double z) const {
  return std::abs(empirical - oracle) <= z * se + 1e-12;
}

std::vector<PairCheck> empirical_covariance(const FieldDraw& draw, GridSize g,
                                            const std::vector<std::pair<Vertex, Vertex>>& pairs,
                                            const CovEvaluator& oracle,
                                            std::int64_t replicates, int threads) {
  constexpr std::int64_t kBlock = 1024;
  const std::int64_t blocks = (replicates + kBlock - 1) / kBlock;
  std::vector<std::vector<RunningStats>> acc(static_cast<std::size_t>(blocks),
                                             std::vector<RunningStats>(pairs.size()));
  const int side = g.side();
  parallel_for(static_cast<std::size_t>(blocks), threads, [&](std::size_t b) {
    std::vector<double> field;
    const std::int64_t end = std::min<std::int64_t>(replicates, (b + 1) * kBlock);
    for (std::int64_t r = static_cast<std::int64_t>(b) * kBlock; r < end; ++r) {
      draw(static_cast<std::uint64_t>(r), field);
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        acc[b][i].add(field[vertex_index(pairs[i].first, side)] *
                      field[vertex_index(pairs[i].second, side)]);
      }
    }
  });
  std::vector<PairCheck> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    RunningStats total;
    for (const auto& block : acc) total.merge(block[i]);
    PairCheck c;
    c.v = pairs[i].first;
    c.w = pairs[i].second;
    c.oracle = oracle(c.v, c.w);
    c.empirical = total.mean();
    c.se = total.standard_error();
    out.push_back(c);
  }
  return out;
}

std::vector<std::pair<Vertex, Vertex>> random_pairs(GridSize g, std::size_t count,
                                                    std::uint64_t seed, bool interior) {
  const int lo = interior ? 1 : 0;
  const int span = interior ? g.side() - 2 : g.side();
  if (span <= 0) throw RangeError("grid has no interior vertices");
  std::vector<std::pair<Vertex, Vertex>> out;
  for (std::size_t i = 0; i < count; ++i) {
    auto coord = [&](std::uint64_t c) {
      return lo + static_cast<int>(keyed_index(seed, i, c, static_cast<std::size_t>(span)));
    };
    out.push_back({{coord(0), coord(1)}, {coord(2), coord(3)}});
  }
  return out;
}

}  // namespace sidgff
