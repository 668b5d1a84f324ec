#include "sidgff/comparison.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sidgff/error.hpp"
#include "sidgff/rng.hpp"
#include "sidgff/samplers.hpp"
#include "sidgff/stats.hpp"

namespace sidgff {

namespace {

Eigen::MatrixXd evaluate(const CovEvaluator& cov, const std::vector<Vertex>& vs) {
  const int m = static_cast<int>(vs.size());
  Eigen::MatrixXd c(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      c(i, j) = c(j, i) = cov(vs[i], vs[j]);
    }
  }
  return c;
}

std::vector<Vertex> all_vertices(GridSize g) {
  std::vector<Vertex> out;
  for (int y = 0; y < g.side(); ++y) {
    for (int x = 0; x < g.side(); ++x) out.push_back({x, y});
  }
  return out;
}

std::vector<Vertex> interior_vertices(GridSize g) {
  std::vector<Vertex> out;
  for (int y = 1; y + 1 < g.side(); ++y) {
    for (int x = 1; x + 1 < g.side(); ++x) out.push_back({x, y});
  }
  return out;
}

std::string vertex_text(Vertex v) {
  std::ostringstream os;
  os << "(" << v.x << ", " << v.y << ")";
  return os.str();
}

}  // namespace

SlepianReport check_slepian_hypotheses(const Eigen::MatrixXd& cx, const Eigen::MatrixXd& cy,
                                       double diag_tol, std::size_t max_listed) {
  if (cx.rows() != cy.rows() || cx.cols() != cy.cols() || cx.rows() != cx.cols()) {
    throw ValidationError("Slepian check needs square covariances of equal size");
  }
  SlepianReport r;
  r.min_margin = std::numeric_limits<double>::infinity();
  const int m = static_cast<int>(cx.rows());
  for (int i = 0; i < m; ++i) {
    const double gap = std::abs(cx(i, i) - cy(i, i));
    r.max_diagonal_gap = std::max(r.max_diagonal_gap, gap);
    if (gap > diag_tol * std::max(1.0, std::abs(cy(i, i)))) r.equal_diagonals = false;
    for (int j = i + 1; j < m; ++j) {
      const double margin = cx(i, j) - cy(i, j);
      r.min_margin = std::min(r.min_margin, margin);
      if (margin < 0.0) {
        r.ordered = false;
        if (r.violations.size() < max_listed) r.violations.emplace_back(i, j);
      }
    }
  }
  if (m < 2) r.min_margin = 0.0;
  return r;
}

SlepianReport check_slepian_hypotheses(const CovEvaluator& cov_x, const CovEvaluator& cov_y,
                                       const std::vector<Vertex>& vertices, double diag_tol) {
  return check_slepian_hypotheses(evaluate(cov_x, vertices), evaluate(cov_y, vertices), diag_tol);
}

SudakovFerniqueReport sudakov_fernique_gap(const Eigen::MatrixXd& cx, const Eigen::MatrixXd& cy) {
  if (cx.rows() != cy.rows() || cx.cols() != cy.cols() || cx.rows() != cx.cols()) {
    throw ValidationError("Sudakov-Fernique check needs square covariances of equal size");
  }
  SudakovFerniqueReport r;
  r.worst_excess = -std::numeric_limits<double>::infinity();
  const int m = static_cast<int>(cx.rows());
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const double dx = cx(i, i) + cx(j, j) - 2.0 * cx(i, j);
      const double dy = cy(i, i) + cy(j, j) - 2.0 * cy(i, j);
      r.gamma = std::max(r.gamma, std::abs(dx - dy));
      r.worst_excess = std::max(r.worst_excess, dx - dy);
    }
  }
  if (m < 2) r.worst_excess = 0.0;
  r.one_sided = r.worst_excess <= 1e-9;
  r.bound = m > 1 ? std::sqrt(r.gamma * std::log(static_cast<double>(m))) : 0.0;
  return r;
}

SudakovFerniqueReport sudakov_fernique_gap(const CovEvaluator& cov_x, const CovEvaluator& cov_y,
                                           const std::vector<Vertex>& vertices) {
  return sudakov_fernique_gap(evaluate(cov_x, vertices), evaluate(cov_y, vertices));
}

double borell_tail(double varmax, double x) {
  if (!(varmax > 0.0)) throw DomainError("borell_tail needs varmax > 0");
  if (!(x >= 0.0)) throw DomainError("borell_tail needs x >= 0");
  return 2.0 * std::exp(-x * x / (2.0 * varmax));
}

std::string to_string(CouplingDirection d) {
  switch (d) {
    case CouplingDirection::upper: return "upper";
    case CouplingDirection::lower: return "lower";
    case CouplingDirection::mean_upper: return "mean-upper";
    case CouplingDirection::mean_lower: return "mean-lower";
  }
  return "unknown";
}

CouplingDirection parse_coupling_direction(const std::string& name) {
  for (auto d : {CouplingDirection::upper, CouplingDirection::lower,
                 CouplingDirection::mean_upper, CouplingDirection::mean_lower}) {
    if (to_string(d) == name) return d;
  }
  throw ValidationError("unknown coupling direction '" + name + "'");
}

CouplingSpec build_upper_coupling(const StepProfile& p, int n, int kappa) {
  if (n < 2) throw RangeError("upper coupling needs n >= 2");
  if (kappa < 1) throw KappaTooSmall("upper coupling needs kappa >= 1");
  CouplingSpec s;
  s.direction = CouplingDirection::upper;
  s.profile = p;
  s.n = n;
  s.kappa = kappa;
  s.base = GridSize(n);
  s.target = GridSize(n + kappa);
  s.tilde = build_comparison_profile(p, n, kappa);
  s.points = interior_vertices(s.base);
  for (Vertex v : s.points) s.embedded.push_back({v.x << kappa, v.y << kappa});

  const Eigen::MatrixXd cpsi = cov_psi(p, s.base);  // InteriorIndex order = points order
  const IbrwCovariance rcov(s.tilde->sigma_tilde, s.target);
  const double var_r = rcov.variance();
  s.a.resize(s.points.size());
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const double a2 = var_r - cpsi(static_cast<int>(i), static_cast<int>(i));
    if (a2 < 0.0) {
      std::ostringstream os;
      os << "kappa = " << kappa << " too small: Var[psi] exceeds Var[R] at "
         << vertex_text(s.points[i]) << " (a^2 = " << a2 << ")";
      throw KappaTooSmall(os.str());
    }
    s.a[i] = std::sqrt(a2);
  }
  const Eigen::Map<const Eigen::VectorXd> a(s.a.data(), static_cast<int>(s.a.size()));
  s.cov_coupled = cpsi + a * a.transpose();
  s.cov_compared = evaluate(rcov, s.embedded);
  s.slepian = check_slepian_hypotheses(s.cov_coupled, s.cov_compared);
  return s;
}

CouplingSpec build_lower_coupling(const StepProfile& p, int n, int kappa) {
  if (kappa < 3 || kappa > n) {
    std::ostringstream os;
    os << "lower coupling needs 3 <= kappa <= n (kappa = " << kappa << ", n = " << n << ")";
    throw KappaTooSmall(os.str());
  }
  CouplingSpec s;
  s.direction = CouplingDirection::lower;
  s.profile = p;
  s.n = n;
  s.kappa = kappa;
  s.base = GridSize(n - kappa);
  s.target = GridSize(n);
  s.points = all_vertices(s.base);
  const int shift = s.target.side() / 4;
  for (Vertex v : s.points) {
    s.embedded.push_back({shift + (v.x << (kappa - 3)), shift + (v.y << (kappa - 3))});
  }
  const Eigen::MatrixXd cpsi = cov_psi_subset(p, s.target, s.embedded);
  const Eigen::MatrixXd cs = evaluate(MibrwCovariance(p, s.base), s.points);
  const double l2 = std::log(2.0);
  s.a.resize(s.points.size());
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const int ii = static_cast<int>(i);
    const double a2 = cpsi(ii, ii) / l2 - cs(ii, ii);
    if (a2 < 0.0) {
      std::ostringstream os;
      os << "kappa = " << kappa << " too small: log 2 Var[S] exceeds Var[psi] at "
         << vertex_text(s.embedded[i]) << " (a^2 = " << a2 << ")";
      throw KappaTooSmall(os.str());
    }
    s.a[i] = std::sqrt(a2);
  }
  const Eigen::Map<const Eigen::VectorXd> a(s.a.data(), static_cast<int>(s.a.size()));
  s.cov_coupled = l2 * (cs + a * a.transpose());
  s.cov_compared = cpsi;
  s.slepian = check_slepian_hypotheses(s.cov_coupled, s.cov_compared);
  return s;
}

CouplingSpec auto_upper_coupling(const StepProfile& p, int n, int max_kappa) {
  std::string last = "no kappa tried";
  for (int kappa = 1; kappa <= max_kappa; ++kappa) {
    try {
      CouplingSpec s = build_upper_coupling(p, n, kappa);
      if (s.slepian.passes()) return s;
      last = "kappa = " + std::to_string(kappa) + ": covariance ordering fails";
    } catch (const KappaTooSmall& e) {
      last = e.what();
    } catch (const ConstructionError& e) {
      last = e.what();
    }
  }
  throw KappaTooSmall("no kappa <= " + std::to_string(max_kappa) +
                      " gives a valid upper coupling; last: " + last);
}

CouplingSpec auto_lower_coupling(const StepProfile& p, int n) {
  std::string last = "no kappa tried";
  for (int kappa = 3; kappa <= n; ++kappa) {
    try {
      CouplingSpec s = build_lower_coupling(p, n, kappa);
      if (s.slepian.passes()) return s;
      last = "kappa = " + std::to_string(kappa) + ": covariance ordering fails";
    } catch (const KappaTooSmall& e) {
      last = e.what();
    }
  }
  throw KappaTooSmall("no kappa in [3, n] gives a valid lower coupling; last: " + last);
}

MeanUpperReport mean_upper_noise(const StepProfile& p, int n) {
  const GridSize g(n);
  const std::vector<Vertex> vs = all_vertices(g);
  const int m = static_cast<int>(vs.size());
  const Eigen::MatrixXd inner = cov_psi(p, g);
  const InteriorIndex idx(grid_rect(g));
  std::vector<int> slot(static_cast<std::size_t>(m), -1);
  for (int i = 0; i < m; ++i) {
    if (auto k = idx.index(vs[i])) slot[i] = *k;
  }
  Eigen::MatrixXd cpsi = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (slot[i] >= 0 && slot[j] >= 0) cpsi(i, j) = inner(slot[i], slot[j]);
    }
  }
  const double l2 = std::log(2.0);
  const Eigen::MatrixXd cs = l2 * evaluate(MibrwCovariance(p, g), vs);
  MeanUpperReport r;
  r.n = n;
  r.before = sudakov_fernique_gap(cpsi, cs);
  double need = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const double dpsi = cpsi(i, i) + cpsi(j, j) - 2.0 * cpsi(i, j);
      const double ds = cs(i, i) + cs(j, j) - 2.0 * cs(i, j);
      need = std::max(need, (dpsi - ds) / (2.0 * l2));
    }
  }
  r.c1 = std::sqrt(need);
  const Eigen::MatrixXd noisy = cs + l2 * need * Eigen::MatrixXd::Identity(m, m);
  r.after = sudakov_fernique_gap(cpsi, noisy);
  return r;
}

MeanLowerReport mean_lower_truncation(const StepProfile& p, int n) {
  if (n < 3) throw RangeError("mean-lower comparison needs n >= 3");
  const GridSize g(n);
  const GridSize small(n - 2);
  const int half = g.side() / 2;
  const std::vector<Vertex> base = all_vertices(small);
  std::vector<Vertex> window;
  for (Vertex v : base) window.push_back({half + v.x, half + v.y});
  const Eigen::MatrixXd cpsi = cov_psi_subset(p, g, window);
  const double l2 = std::log(2.0);
  MeanLowerReport r;
  r.n = n;
  r.k0 = -1;
  for (int k0 = 0; k0 <= small.n; ++k0) {
    const Eigen::MatrixXd cs = l2 * evaluate(MibrwCovariance(p, small, k0), base);
    const SudakovFerniqueReport sf = sudakov_fernique_gap(cs, cpsi);
    r.holds.push_back(sf.one_sided);
    if (sf.one_sided && r.k0 < 0) {
      r.k0 = k0;
      r.report = sf;
    }
  }
  if (r.k0 < 0) {
    throw HypothesisViolation("no truncation level k0 satisfies the one-sided hypothesis");
  }
  return r;
}

bool InequalityCheck::holds() const {
  return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.holds; });
}

std::vector<double> default_levels(const CouplingSpec& spec, int count) {
  if (count < 1) throw RangeError("default_levels needs count >= 1");
  const EffectiveProfile e = effective_profile(spec.profile);
  double first_order = 0.0;
  for (std::size_t j = 0; j < e.m(); ++j) {
    first_order += e.bar_sigmas[j] * (e.bar_lambdas[j + 1] - e.bar_lambdas[j]);
  }
  const double top = 1.25 * 2.0 * spec.n * std::log(2.0) * first_order;
  std::vector<double> out;
  for (int j = 1; j <= count; ++j) out.push_back(top * j / count);
  return out;
}

InequalityCheck coupling_inequality(const CouplingSpec& spec, const std::vector<double>& lambdas,
                                    std::int64_t replicates, std::uint64_t seed, int threads,
                                    double conf) {
  if (spec.direction != CouplingDirection::upper && spec.direction != CouplingDirection::lower) {
    throw ValidationError("probability inequality needs an upper or lower coupling");
  }
  if (!spec.slepian.passes()) {
    throw HypothesisViolation("coupling fails Slepian's hypotheses; no Monte Carlo run");
  }
  if (replicates < 1) throw ValidationError("replicates must be >= 1");
  const bool upper = spec.direction == CouplingDirection::upper;
  std::vector<double> psi_max(static_cast<std::size_t>(replicates));
  std::vector<double> other_max(static_cast<std::size_t>(replicates));

  // psi always lives on GridSize(n); its points are the spec's points (upper)
  // or embedded images (lower).
  const GridSize psi_grid(spec.n);
  const PsiSampler psi(spec.profile, psi_grid, DgffMethod::cholesky);
  const std::vector<Vertex>& psi_points = upper ? spec.points : spec.embedded;
  const InteriorIndex& idx = psi.dgff().index();
  std::vector<int> psi_slots;
  for (Vertex v : psi_points) {
    const auto k = idx.index(v);
    if (!k) throw Error("internal failure: coupling point outside the psi interior");
    psi_slots.push_back(*k);
  }
  std::optional<IbrwSampler> ibrw;
  std::optional<MibrwSampler> mibrw;
  if (upper) {
    ibrw.emplace(spec.tilde->sigma_tilde, spec.target);
  } else {
    mibrw.emplace(spec.profile, spec.base);
  }
  const double sl2 = std::sqrt(std::log(2.0));
  parallel_for(static_cast<std::size_t>(replicates), threads, [&](std::size_t r) {
    Eigen::VectorXd phi, field;
    psi.sample_interior(derive_key(seed, {1, r}), phi, field);
    double best = -std::numeric_limits<double>::infinity();
    for (int k : psi_slots) best = std::max(best, field[k]);
    psi_max[r] = best;
    if (upper) {
      const std::vector<double> rv = ibrw->sample_at(derive_key(seed, {2, r}), spec.embedded);
      other_max[r] = *std::max_element(rv.begin(), rv.end());
    } else {
      other_max[r] = sl2 * mibrw->sample(derive_key(seed, {2, r})).max();
    }
  });

  InequalityCheck out;
  out.direction = spec.direction;
  out.replicates = replicates;
  for (double l : lambdas) {
    InequalityRow row;
    row.lambda = l;
    const auto psi_hits = std::count_if(psi_max.begin(), psi_max.end(), [&](double x) { return x >= l; });
    const auto other_hits = std::count_if(other_max.begin(), other_max.end(), [&](double x) { return x >= l; });
    const double inv = 1.0 / static_cast<double>(replicates);
    if (upper) {
      row.lhs_hits = psi_hits;
      row.rhs_hits = other_hits;
      row.lhs = psi_hits * inv;
      row.rhs = 2.0 * other_hits * inv;
      row.lhs_lower = wilson_lower(psi_hits, replicates, conf);
      row.rhs_upper = 2.0 * wilson_upper(other_hits, replicates, conf);
    } else {
      row.lhs_hits = other_hits;
      row.rhs_hits = psi_hits;
      row.lhs = 0.5 * other_hits * inv;
      row.rhs = psi_hits * inv;
      row.lhs_lower = 0.5 * wilson_lower(other_hits, replicates, conf);
      row.rhs_upper = wilson_upper(psi_hits, replicates, conf);
    }
    row.holds = row.lhs_lower <= row.rhs_upper;
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace sidgff
