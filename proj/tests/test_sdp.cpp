// Interior-point SDP solver: analytic ground truths, detection of infeasible
// and unbounded instances, epigraph helper, and the SDPA text export.

#include "doctest.h"

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "parafit/errors.hpp"
#include "parafit/sdp.hpp"

using namespace parafit;

namespace {

SdpOptions quiet() {
  SdpOptions o;
  return o;
}

}  // namespace

TEST_CASE("one-variable scalar block: min x s.t. x >= 1") {
  SdpProblem p;
  p.add_vars(1);
  p.objective(0) = 1.0;
  SdpBlock& b = p.add_block(1);
  b.F0(0, 0) = -1.0;  // x - 1 >= 0
  b.add_entry(0, 1.0, 0, 0);
  const SdpSolution s = solve(p, quiet());
  REQUIRE(s.status == SdpStatus::optimal);
  CHECK(s.x(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.objective == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("diagonal block: min x+y s.t. diag(x,y) >= diag(1,2)") {
  SdpProblem p;
  p.add_vars(2);
  p.objective(0) = 1.0;
  p.objective(1) = 1.0;
  SdpBlock& b = p.add_block(2);
  b.F0 << -1.0, 0.0, 0.0, -2.0;
  b.add_entry(0, 1.0, 0, 0);
  b.add_entry(1, 1.0, 1, 1);
  const SdpSolution s = solve(p, quiet());
  REQUIRE(s.status == SdpStatus::optimal);
  CHECK(s.x(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.x(1) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("off-diagonal coupling: min t s.t. [[t,1],[1,t]] >= 0") {
  SdpProblem p;
  p.add_vars(1);
  p.objective(0) = 1.0;
  SdpBlock& b = p.add_block(2);
  b.F0 << 0.0, 1.0, 1.0, 0.0;
  b.add_entry(0, 1.0, 0, 0);
  b.add_entry(0, 1.0, 1, 1);
  const SdpSolution s = solve(p, quiet());
  REQUIRE(s.status == SdpStatus::optimal);
  CHECK(s.x(0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("smallest eigenvalue: max lambda s.t. A - lambda I >= 0") {
  Eigen::MatrixXd A(3, 3);
  A << 4.0, 1.0, 0.5, 1.0, 3.0, -0.25, 0.5, -0.25, 2.0;
  const double lmin =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A).eigenvalues().minCoeff();

  SdpProblem p;
  p.add_vars(1);
  p.objective(0) = -1.0;  // maximize lambda
  SdpBlock& b = p.add_block(3);
  b.F0 = A;
  for (int i = 0; i < 3; ++i) b.add_entry(0, -1.0, i, i);
  const SdpSolution s = solve(p, quiet());
  REQUIRE(s.status == SdpStatus::optimal);
  CHECK(s.x(0) == doctest::Approx(lmin).epsilon(1e-6));
}

TEST_CASE("variable bounds act as constraints: min 2x s.t. x >= 3") {
  SdpProblem p;
  p.add_vars(1);
  p.objective(0) = 2.0;
  p.lower_bounds.emplace_back(0, 3.0);
  const SdpSolution s = solve(p, quiet());
  REQUIRE(s.status == SdpStatus::optimal);
  CHECK(s.x(0) == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(s.objective == doctest::Approx(6.0).epsilon(1e-6));
}

TEST_CASE("epigraph helper: min t s.t. t >= ||L x||^2, x >= 1") {
  SdpProblem p;
  p.add_vars(2);  // x, t
  p.objective(1) = 1.0;
  Eigen::MatrixXd L(1, 1);
  L(0, 0) = 2.0;
  epigraph_of_norm_sq(p, L, {0}, 1);
  p.lower_bounds.emplace_back(0, 1.0);
  const SdpSolution s = solve(p, quiet());
  REQUIRE(s.status == SdpStatus::optimal);
  CHECK(s.x(0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(s.x(1) == doctest::Approx(4.0).epsilon(1e-5));
}

TEST_CASE("epigraph helper: quadratic distance to a box") {
  // min ||L(x - is feasible shift)||^2 in epigraph form with x >= c:
  // min t, t >= ||L x||^2, x >= c, L = diag(1,3). Optimum x = c clamped at 0.
  SdpProblem p;
  p.add_vars(3);  // x0, x1, t
  p.objective(2) = 1.0;
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(2, 2);
  L(0, 0) = 1.0;
  L(1, 1) = 3.0;
  epigraph_of_norm_sq(p, L, {0, 1}, 2);
  p.lower_bounds.emplace_back(0, 2.0);
  p.lower_bounds.emplace_back(1, -1.0);
  const SdpSolution s = solve(p, quiet());
  REQUIRE(s.status == SdpStatus::optimal);
  CHECK(s.x(0) == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(s.x(1) == doctest::Approx(0.0).epsilon(1e-4));
  CHECK(s.x(2) == doctest::Approx(4.0).epsilon(1e-5));
}

TEST_CASE("infeasible pair of scalar constraints is detected") {
  SdpProblem p;
  p.add_vars(1);
  p.objective(0) = 1.0;
  SdpBlock& b1 = p.add_block(1);
  b1.F0(0, 0) = -1.0;  // x >= 1
  b1.add_entry(0, 1.0, 0, 0);
  SdpBlock& b2 = p.add_block(1);
  b2.F0(0, 0) = 0.0;  // -x >= 0
  b2.add_entry(0, -1.0, 0, 0);
  const SdpSolution s = solve(p, quiet());
  CHECK(s.status == SdpStatus::infeasible);
}

TEST_CASE("unbounded objective is detected") {
  SdpProblem p;
  p.add_vars(1);
  p.objective(0) = -1.0;  // minimize -x with only x >= 0
  SdpBlock& b = p.add_block(1);
  b.add_entry(0, 1.0, 0, 0);
  const SdpSolution s = solve(p, quiet());
  CHECK(s.status == SdpStatus::unbounded);
}

TEST_CASE("vacuous variable with zero cost is pinned to zero") {
  SdpProblem p;
  p.add_vars(2);
  p.objective(0) = 1.0;
  SdpBlock& b = p.add_block(1);
  b.F0(0, 0) = -1.0;
  b.add_entry(0, 1.0, 0, 0);
  const SdpSolution s = solve(p, quiet());
  REQUIRE(s.status == SdpStatus::optimal);
  CHECK(s.x(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.x(1) == 0.0);
}

TEST_CASE("vacuous variable with nonzero cost makes the problem unbounded") {
  SdpProblem p;
  p.add_vars(2);
  p.objective(0) = 1.0;
  p.objective(1) = 1.0;  // appears nowhere else
  SdpBlock& b = p.add_block(1);
  b.F0(0, 0) = -1.0;
  b.add_entry(0, 1.0, 0, 0);
  const SdpSolution s = solve(p, quiet());
  CHECK(s.status == SdpStatus::unbounded);
}

TEST_CASE("determinism: identical problems yield bit-identical solutions") {
  const auto build = [] {
    SdpProblem p;
    p.add_vars(2);
    p.objective(0) = 1.0;
    p.objective(1) = 0.5;
    SdpBlock& b = p.add_block(2);
    b.F0 << -1.0, 0.3, 0.3, -2.0;
    b.add_entry(0, 1.0, 0, 0);
    b.add_entry(1, 1.0, 1, 1);
    b.add_entry(1, 0.25, 0, 1);
    return p;
  };
  SdpProblem p1 = build();
  SdpProblem p2 = build();
  const SdpSolution s1 = solve(p1, quiet());
  const SdpSolution s2 = solve(p2, quiet());
  REQUIRE(s1.status == SdpStatus::optimal);
  REQUIRE(s1.x.size() == s2.x.size());
  for (Eigen::Index i = 0; i < s1.x.size(); ++i) CHECK(s1.x(i) == s2.x(i));
  CHECK(s1.iterations == s2.iterations);
}

TEST_CASE("random strictly feasible instances satisfy KKT at tolerance") {
  // Constructed so that a strictly feasible point is known: F(x0) > 0 by
  // construction, and the objective is bounded below because every variable
  // also carries a positive-definite diagonal footprint in a trust block.
  std::mt19937 rng(12345);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int inst = 0; inst < 5; ++inst) {
    const int m = 4;
    const int n = 3;
    SdpProblem p;
    p.add_vars(m);
    for (int i = 0; i < m; ++i) p.objective(i) = gauss(rng);
    SdpBlock& b = p.add_block(n);
    for (int i = 0; i < m; ++i) {
      Eigen::MatrixXd Fi(n, n);
      for (int r = 0; r < n; ++r)
        for (int c = r; c < n; ++c) {
          Fi(r, c) = gauss(rng);
          Fi(c, r) = Fi(r, c);
        }
      for (int r = 0; r < n; ++r)
        for (int c = r; c < n; ++c)
          if (Fi(r, c) != 0.0) b.add_entry(i, Fi(r, c), r, c);
    }
    b.F0 = Eigen::MatrixXd::Identity(n, n);  // x = 0 strictly feasible
    // Trust region: diag(t) - sum x_i^2-ish via bounds keeps it bounded.
    for (int i = 0; i < m; ++i) {
      SdpBlock& box = p.add_block(2);
      box.F0 << 5.0, 0.0, 0.0, 5.0;  // |x_i| <= 5
      box.add_entry(i, 1.0, 0, 0);
      box.add_entry(i, -1.0, 1, 1);
    }
    const SdpSolution s = solve(p, quiet());
    REQUIRE(s.status == SdpStatus::optimal);
    CHECK(s.max_residual <= 1e-6);
    CHECK(s.duality_gap <= 1e-5);
  }
}

TEST_CASE("SDPA export matches the golden file for the unit problem") {
  SdpProblem p;
  p.add_vars(1);
  p.objective(0) = 1.0;
  SdpBlock& b = p.add_block(1);
  b.F0(0, 0) = -1.0;
  b.add_entry(0, 1.0, 0, 0);
  const std::string path = "/tmp/parafit_sdpa_unit.dat-s";
  export_sdpa(p, path);

  std::ifstream got_f(path);
  std::stringstream got;
  got << got_f.rdbuf();
  std::ifstream want_f(std::string(PARAFIT_TEST_DIR) + "/golden/unit_problem.dat-s");
  REQUIRE(want_f.good());
  std::stringstream want;
  want << want_f.rdbuf();
  CHECK(got.str() == want.str());
  std::remove(path.c_str());
}

TEST_CASE("SDPA export round-trips a mixed problem through a parser") {
  // Parse our own export and rebuild the LMI data, then check the rebuilt
  // constraint value F(x) at a random x agrees with the in-memory blocks.
  SdpProblem p;
  p.add_vars(2);
  p.objective(0) = 1.5;
  p.objective(1) = -0.5;
  SdpBlock& b = p.add_block(2);
  b.F0 << -1.0, 0.25, 0.25, -2.0;
  b.add_entry(0, 1.0, 0, 0);
  b.add_entry(0, 0.5, 0, 1);
  b.add_entry(1, 1.0, 1, 1);
  p.lower_bounds.emplace_back(1, -3.0);

  const std::string path = "/tmp/parafit_sdpa_mixed.dat-s";
  export_sdpa(p, path);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  // strip comments
  std::vector<std::string> lines;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '*' && line[0] != '"') lines.push_back(line);
  REQUIRE(lines.size() >= 4);
  CHECK(lines[0].substr(0, 1) == "2");  // n vars
  // entries: matno blkno i j v
  Eigen::MatrixXd F0 = Eigen::MatrixXd::Zero(2, 2);
  Eigen::MatrixXd F1 = Eigen::MatrixXd::Zero(2, 2);
  Eigen::MatrixXd F2 = Eigen::MatrixXd::Zero(2, 2);
  double bound_f0 = 0.0, bound_f2 = 0.0;
  for (std::size_t i = 4; i < lines.size(); ++i) {
    std::istringstream ss(lines[i]);
    int matno, blkno, r, c;
    double v;
    ss >> matno >> blkno >> r >> c >> v;
    if (blkno == 1) {
      Eigen::MatrixXd& M = matno == 0 ? F0 : (matno == 1 ? F1 : F2);
      M(r - 1, c - 1) = v;
      M(c - 1, r - 1) = v;
    } else {
      if (matno == 0) bound_f0 = v;
      if (matno == 2) bound_f2 = v;
    }
  }
  // SDPA convention: constraint is sum x_i F_i - F0 >= 0.
  Eigen::Vector2d x(0.7, -1.3);
  Eigen::MatrixXd want = b.F0;
  want(0, 0) += x(0) * 1.0;
  want(0, 1) += x(0) * 0.5;
  want(1, 0) += x(0) * 0.5;
  want(1, 1) += x(1) * 1.0;
  const Eigen::MatrixXd got = x(0) * F1 + x(1) * F2 - F0;
  CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(bound_f0 == doctest::Approx(-3.0));
  CHECK(bound_f2 == doctest::Approx(1.0));
  std::remove(path.c_str());
}

TEST_CASE("config validation: asymmetric F0 is rejected") {
  SdpProblem p;
  p.add_vars(1);
  SdpBlock& b = p.add_block(2);
  b.F0 << 0.0, 1.0, 0.0, 0.0;
  b.add_entry(0, 1.0, 0, 0);
  CHECK_THROWS_AS(solve(p, quiet()), ConfigError);
}
