#include <doctest.h>

#include <cmath>

#include "sidgff/comparison.hpp"
#include "sidgff/error.hpp"

using namespace sidgff;

TEST_CASE("slepian hypotheses on matrices") {
  Eigen::MatrixXd x(3, 3), y(3, 3);
  x << 1.0, 0.5, 0.4, 0.5, 1.0, 0.3, 0.4, 0.3, 1.0;
  y << 1.0, 0.2, 0.4, 0.2, 1.0, 0.1, 0.4, 0.1, 1.0;
  SlepianReport r = check_slepian_hypotheses(x, y);
  CHECK(r.passes());
  CHECK(r.min_margin == doctest::Approx(0.0));
  r = check_slepian_hypotheses(y, x);
  CHECK_FALSE(r.ordered);
  CHECK(r.violations.size() == 2);
  CHECK(r.min_margin == doctest::Approx(-0.3));
  Eigen::MatrixXd z = x;
  z(2, 2) = 1.1;
  r = check_slepian_hypotheses(z, y);
  CHECK_FALSE(r.equal_diagonals);
  CHECK(r.max_diagonal_gap == doctest::Approx(0.1));
}

TEST_CASE("sudakov fernique gap by hand") {
  Eigen::MatrixXd x(2, 2), y(2, 2);
  x << 1.0, 0.5, 0.5, 1.0;  // E(X1 - X2)^2 = 1
  y << 2.0, 0.0, 0.0, 1.0;  // E(Y1 - Y2)^2 = 3
  const SudakovFerniqueReport r = sudakov_fernique_gap(x, y);
  CHECK(r.gamma == doctest::Approx(2.0));
  CHECK(r.bound == doctest::Approx(std::sqrt(2.0 * std::log(2.0))));
  CHECK(r.one_sided);
  CHECK(r.worst_excess == doctest::Approx(-2.0));
  const SudakovFerniqueReport s = sudakov_fernique_gap(y, x);
  CHECK_FALSE(s.one_sided);
}

TEST_CASE("evaluator overloads agree with matrices") {
  const StepProfile p = named_profile("convex2");
  const GridSize g(2);
  const MibrwCovariance a(p, g);
  const IbrwCovariance b(p, g);
  std::vector<Vertex> pts;
  for (int i = 0; i < 16; ++i) pts.push_back(vertex_at(i, 4));
  Eigen::MatrixXd ma(16, 16), mb(16, 16);
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j < 16; ++j) {
      ma(i, j) = std::log(2.0) * a(pts[i], pts[j]);
      mb(i, j) = b(pts[i], pts[j]);
    }
  }
  CovEvaluator ea = [&](Vertex v, Vertex w) { return std::log(2.0) * a(v, w); };
  CovEvaluator eb = [&](Vertex v, Vertex w) { return b(v, w); };
  const SudakovFerniqueReport m = sudakov_fernique_gap(ma, mb);
  const SudakovFerniqueReport e = sudakov_fernique_gap(ea, eb, pts);
  CHECK(m.gamma == doctest::Approx(e.gamma));
  CHECK(check_slepian_hypotheses(ma, mb).passes() == check_slepian_hypotheses(ea, eb, pts).passes());
}

TEST_CASE("borell tail") {
  CHECK(borell_tail(2.0, 0.0) == doctest::Approx(2.0));
  CHECK(borell_tail(2.0, 3.0) == doctest::Approx(2.0 * std::exp(-9.0 / 4.0)));
}

TEST_CASE("coupling directions parse") {
  for (auto d : {CouplingDirection::upper, CouplingDirection::lower, CouplingDirection::mean_upper,
                 CouplingDirection::mean_lower}) {
    CHECK(parse_coupling_direction(to_string(d)) == d);
  }
  CHECK_THROWS_AS(parse_coupling_direction("sideways"), ValidationError);
}

TEST_CASE("upper coupling at n = 3") {
  const CouplingSpec spec = auto_upper_coupling(StepProfile::homogeneous(), 3);
  CHECK(spec.slepian.passes());
  CHECK(spec.kappa >= 1);
  CHECK(spec.points.size() == spec.a.size());
  for (double a : spec.a) CHECK(a >= 0.0);
  // The coupled variances equal the comparison variances.
  for (int i = 0; i < spec.cov_coupled.rows(); ++i) {
    CHECK(spec.cov_coupled(i, i) == doctest::Approx(spec.cov_compared(i, i)).epsilon(1e-9));
  }
  if (spec.kappa > 1) CHECK_THROWS_AS(build_upper_coupling(StepProfile::homogeneous(), 3, 0), Error);
}

TEST_CASE("lower coupling at n = 4") {
  const CouplingSpec spec = auto_lower_coupling(named_profile("convex2"), 4);
  CHECK(spec.slepian.passes());
  CHECK(spec.kappa >= 3);
  CHECK(spec.kappa <= 4);
  const auto levels = default_levels(spec);
  CHECK(levels.size() == 8);
  for (std::size_t i = 1; i < levels.size(); ++i) CHECK(levels[i] > levels[i - 1]);
  const InequalityCheck a = coupling_inequality(spec, levels, 400, 5, 1);
  const InequalityCheck b = coupling_inequality(spec, levels, 400, 5, 2);
  REQUIRE(a.rows.size() == levels.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].lhs_hits == b.rows[i].lhs_hits);
    CHECK(a.rows[i].rhs_hits == b.rows[i].rhs_hits);
    CHECK(a.rows[i].lhs_lower <= a.rows[i].lhs + 1e-12);
    CHECK(a.rows[i].rhs_upper >= a.rows[i].rhs - 1e-12);
  }
}

TEST_CASE("mean comparisons") {
  const MeanUpperReport up = mean_upper_noise(named_profile("convex2"), 3);
  CHECK(up.c1 >= 0.0);
  CHECK(up.after.one_sided);
  const MeanLowerReport low = mean_lower_truncation(named_profile("convex2"), 4);
  CHECK(low.holds.size() == 3);
  CHECK(low.k0 >= 0);
}
