#include "stratwave/continuation.hpp"
#include "stratwave/errors.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace stratwave;
using namespace stratwave::testing;

namespace {

double coth(double x) { return std::cosh(x) / std::sinh(x); }

double sup_departure(const BranchPoint& p, int m) {
  double sup = 0.0;
  for (int i = 0; i < 512; ++i) {
    const double x = 2.0 * M_PI * i / 512;
    sup = std::max(sup, std::abs(p.shape.eta(x) + p.s * std::cos(m * x)));
  }
  return sup;
}

BranchOptions small_branch() {
  BranchOptions o;
  o.s_max = 1e-3;
  o.n_steps = 2;
  return o;
}

} // namespace

TEST_CASE("sigma branch of the homogeneous profile") {
  const auto p = homogeneous();
  const auto opts = small_branch();
  const auto c = branch_from_sigma(p, -2.0, 1, 1, opts);
  REQUIRE(c.points.size() == 3);
  CHECK(!c.truncated);
  CHECK(c.root == doctest::Approx(4.0 * coth(1.0) - 1.0).epsilon(1e-12));

  const auto& p0 = c.points[0];
  CHECK(p0.s == 0.0);
  CHECK(p0.parameter == c.root);
  for (double a : p0.shape.coeffs) CHECK(a == 0.0);
  CHECK(p0.residual_inf <= opts.tol);

  for (const auto& pt : c.points) {
    CHECK(pt.residual_inf <= opts.tol);
    CHECK(pt.shape.coeffs[0] == -pt.s);
    const auto v = validate_solution(p, pt.parameter, -2.0, pt.field);
    CHECK(v.max_residual() <= 1e-8);
    CHECK(v.volume <= 1e-14);
  }

  const double ratio = sup_departure(c.points[2], 1) / sup_departure(c.points[1], 1);
  MESSAGE("eta Richardson ratio " << ratio);
  CHECK(ratio >= 3.4);
  CHECK(ratio <= 4.6);

  const double c_big = std::abs(c.points[2].parameter - c.root) / c.points[2].s;
  const double c_small = std::abs(c.points[1].parameter - c.root) / c.points[1].s;
  CHECK(c_small <= c_big * 1.01);
}

TEST_CASE("branch points are locally unique") {
  const auto p = homogeneous();
  auto opts = small_branch();
  const auto two = branch_from_sigma(p, -2.0, 1, 1, opts);
  opts.n_steps = 1;
  const auto one = branch_from_sigma(p, -2.0, 1, 1, opts);
  const auto& a = two.points.back();
  const auto& b = one.points.back();
  CHECK(a.s == b.s);
  CHECK(std::abs(a.parameter - b.parameter) <= 10 * opts.tol);
  for (std::size_t j = 0; j < a.shape.coeffs.size(); ++j)
    CHECK(std::abs(a.shape.coeffs[j] - b.shape.coeffs[j]) <= 10 * opts.tol);
}

TEST_CASE("crest-to-trough monotonicity for small amplitude") {
  const auto p = linear_profile();
  BranchOptions opts;
  opts.s_max = 1e-2;
  opts.n_steps = 2;
  const auto c = branch_from_sigma(p, -2.0, 2, 1, opts);
  REQUIRE(!c.truncated);
  const auto& pt = c.points.back();
  // Crest at x = pi/2 (a_2 = -s), trough at x = 0 and pi; monotone between.
  double prev = pt.shape.eta(0.0);
  for (int i = 1; i <= 200; ++i) {
    const double x = 0.5 * M_PI * i / 200;
    const double e = pt.shape.eta(x);
    CHECK(e > prev);
    prev = e;
  }
  CHECK(std::abs(pt.shape.eta(0.0) - pt.shape.eta(M_PI)) < 1e-14);
  const auto v = validate_solution(p, pt.parameter, -2.0, pt.field);
  CHECK(v.max_residual() <= 1e-8);
}

TEST_CASE("lambda branches of the homogeneous profile") {
  const auto p = homogeneous();
  auto opts = small_branch();
  opts.lambda_floor = -3.0;
  const auto c1 = branch_from_lambda(p, 1.0, 1, 1, opts);
  const auto c2 = branch_from_lambda(p, 1.0, 2, 1, opts);
  CHECK(c1.root == doctest::Approx(-1.2341752).epsilon(1e-7));
  CHECK(c2.root == doctest::Approx(-std::sqrt(5.0 * std::tanh(2.0) / 2.0)).epsilon(1e-9));
  CHECK(std::abs(c1.root - c2.root) > 0.3);
  for (const auto& c : {c1, c2}) {
    REQUIRE(c.points.size() == 3);
    CHECK(c.parameter == BranchParameter::Lambda);
    CHECK(c.points[0].parameter == c.root);
    for (const auto& pt : c.points) {
      CHECK(pt.residual_inf <= opts.tol);
      CHECK(std::abs(pt.parameter - c.root) <= 1.0 * pt.s);
      CHECK(validate_solution(p, 1.0, pt.parameter, pt.field).max_residual() <= 1e-8);
    }
    const double ratio = sup_departure(c.points[2], c.m) / sup_departure(c.points[1], c.m);
    CHECK(ratio >= 3.4);
    CHECK(ratio <= 4.6);
  }
}

TEST_CASE("branch preconditions") {
  const auto p = homogeneous();
  auto opts = small_branch();
  // sigma-bar_1 = sigma-bar_2 when lambda^2 (4 coth 1 - 2 coth 2) = 3.
  const double lam = -std::sqrt(3.0 / (4.0 * coth(1.0) - 2.0 * coth(2.0)));
  CHECK_THROWS_AS(branch_from_sigma(p, lam, 1, 1, opts), AssumptionViolation);
  CHECK_THROWS_AS(branch_from_sigma(p, 0.0, 1, 1, opts), AssumptionViolation);
  opts.lambda_floor = -1.1;
  CHECK_THROWS_AS(branch_from_lambda(p, 1.0, 1, 1, opts), InvalidInput);
  opts.s_max = 0.0;
  CHECK_THROWS_AS(branch_from_sigma(p, -2.0, 1, 1, opts), InvalidInput);
}

TEST_CASE("Newton failure truncates the branch at the last good point") {
  auto opts = small_branch();
  opts.max_newton = 0;
  opts.max_halvings = 2;
  const auto c = branch_from_sigma(homogeneous(), -2.0, 1, 1, opts);
  CHECK(c.truncated);
  CHECK(c.points.size() == 1);
  CHECK(!c.truncation_reason.empty());
  CHECK(c.warnings.size() == 2);
}

TEST_CASE("physical reconstruction of laminar flows") {
  const auto grid = std::make_shared<FlatGrid>(1, 16, 24);
  const auto hom = solve_semilinear(homogeneous(), -2.0, SurfaceShape::flat(1), grid);
  const auto s = reconstruct_physical(homogeneous(), hom);
  CHECK((s.u_rel.array() - 2.0).abs().maxCoeff() <= 1e-13);
  CHECK(s.v.cwiseAbs().maxCoeff() <= 1e-13);
  CHECK(s.stagnation_count == 0);
  CHECK(s.Q == doctest::Approx(2.0).epsilon(1e-13));
  // Hydrostatic: P - P0 = -g rho Y.
  CHECK((s.pressure + s.Y).cwiseAbs().maxCoeff() <= 1e-12);

  const auto lin = linear_profile();
  const auto thr = solve_semilinear(lin, -7.0 / 30.0, SurfaceShape::flat(1), grid);
  const auto t = reconstruct_physical(lin, thr);
  for (Eigen::Index i = 0; i < t.x.size(); ++i) CHECK(t.stagnation(grid->ny() - 1, i));
  CHECK(t.stagnation_count >= grid->nx());

  std::ostringstream os;
  write_physical_csv(os, s);
  CHECK(os.str().find("x,y,Y,psi,u_minus_c,v,pressure_minus_P0,stagnation\n") != std::string::npos);
}

TEST_CASE("physical reconstruction on a branch point satisfies the surface condition") {
  const auto p = homogeneous();
  const auto c = branch_from_sigma(p, -2.0, 1, 1, small_branch());
  const auto& pt = c.points.back();
  const auto sol = reconstruct_physical(p, pt.field);
  const ShapeSamples ss = sample_shape(pt.shape, *pt.field.grid);
  const Eigen::VectorXd kap = curvature(ss);
  const int top = pt.field.grid->ny() - 1;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < sol.x.size(); ++i) {
    const int col = pt.field.grid->x().fold(static_cast<int>(i));
    const double q = 0.5 * sol.speed(top, i) * sol.speed(top, i);
    worst = std::max(worst, std::abs(q - pt.parameter * kap[col] + ss.eta[col] - sol.Q));
  }
  CHECK(worst <= 1e-9);
  // Pressure is atmospheric up to surface tension on the surface.
  for (Eigen::Index i = 0; i < sol.x.size(); ++i) {
    const int col = pt.field.grid->x().fold(static_cast<int>(i));
    CHECK(std::abs(sol.pressure(top, i) + pt.parameter * kap[col]) <= 1e-9);
  }
}

TEST_CASE("validation detects a corrupted field") {
  const auto p = linear_profile();
  const auto grid = std::make_shared<FlatGrid>(1, 32, 32);
  auto field = solve_semilinear(p, -2.0, SurfaceShape::mode(1, 1, 0.02), grid);
  const auto clean = validate_solution(p, 1.0, -2.0, field);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1e-3, 1e-3);
  for (Eigen::Index i = 0; i < field.psi.size(); ++i) field.psi.data()[i] += u(rng);
  const auto bad = validate_solution(p, 1.0, -2.0, field);
  CHECK(bad.interior_residual >= 1e2 * clean.interior_residual);
  CHECK(clean.top_bc == 0.0);
  CHECK(clean.bottom_bc == 0.0);
  CHECK(clean.psi_symmetry <= 1e-13);
  CHECK(clean.eta_symmetry <= 1e-15);
  const auto j = clean.to_json();
  CHECK(j.contains("interior_residual"));
  CHECK(j["max_residual"].get<double>() == clean.max_residual());
}

TEST_CASE("branch export") {
  const auto c = branch_from_sigma(homogeneous(), -2.0, 1, 1, small_branch());
  const auto j = c.to_json();
  REQUIRE(j.size() == 3);
  CHECK(j[0]["s"] == 0.0);
  CHECK(j[0]["parameter"].get<double>() == c.root);
  CHECK(j[2]["eta_coeffs"].size() == 32);
  CHECK(j[2]["eta_coeffs"][0].get<double>() == -1e-3);
  CHECK(j[1]["residual"].get<double>() <= 1e-9);
}
