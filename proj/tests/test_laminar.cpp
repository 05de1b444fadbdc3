#include "stratwave/errors.hpp"
#include "stratwave/laminar.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace stratwave;
using namespace stratwave::testing;

namespace {

// rho(p) = 1 + 0.02 p, beta(p) = -p - 0.1 p^3: f = 0.02 y + psi + 0.1 psi^3.
StratificationProfile cubic_profile() { return make_profile({1.0, 0.02}, {0.0, -1.0, 0.0, -0.1}, 1.0, {-6.0, 3.0}); }

// psi'(y) = -lambda + int_{-1}^{0} s F(s) ds + int_{-1}^{y} F(s) ds, F = f(s, psi(s)).
double dpsi_by_quadrature(const StratificationProfile& p, const LaminarFlow& flow, double y) {
  auto F = [&](double s) { return p.f(s, flow.psi_at(s)); };
  double whole = 0.0, part = 0.0;
  const auto g1 = gauss_legendre(48, -1.0, 0.0);
  for (std::size_t i = 0; i < g1.x.size(); ++i) whole += g1.w[i] * g1.x[i] * F(g1.x[i]);
  if (y > -1.0) {
    const auto g2 = gauss_legendre(48, -1.0, y);
    for (std::size_t i = 0; i < g2.x.size(); ++i) part += g2.w[i] * F(g2.x[i]);
  }
  return -flow.lambda + whole + part;
}

double offgrid_residual(const StratificationProfile& p, const LaminarFlow& flow) {
  double r = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double y = -1.0 + i / 1000.0;
    r = std::max(r, std::abs(flow.d2psi_at(y) - p.f(y, flow.psi_at(y))));
  }
  return r;
}

} // namespace

TEST_CASE("homogeneous laminar flow is linear") {
  const auto flow = solve_laminar(homogeneous(), -2.0);
  CHECK(flow.residual_inf == 0.0);
  for (Eigen::Index i = 0; i < flow.size(); ++i) {
    CHECK(flow.psi[i] == doctest::Approx(2.0 * flow.nodes()[i]).epsilon(1e-15));
    CHECK(flow.dpsi[i] == doctest::Approx(2.0).epsilon(1e-15));
  }
  CHECK(flow.psi[0] == -2.0);
  CHECK(flow.psi[flow.size() - 1] == 0.0);
}

TEST_CASE("linear profile reproduces the closed form") {
  const auto p = linear_profile();
  const auto flow = solve_laminar(p, 0.0);
  CHECK(flow.residual_inf <= 1e-12);
  for (Eigen::Index i = 0; i < flow.size(); ++i) {
    const double y = flow.nodes()[i];
    CHECK(std::abs(flow.psi[i] - (-y * y * y / 60.0 - y * y / 4.0 - 7.0 / 30.0 * y)) < 1e-14);
  }
  CHECK(std::abs(flow.surface_slope() + 7.0 / 30.0) < 1e-13);
  for (double lam : {-3.0, -1.0, 0.5}) {
    const auto f2 = solve_laminar(p, lam);
    CHECK(std::abs(f2.surface_slope() - (-lam - 7.0 / 30.0)) < 1e-11);
  }
}

TEST_CASE("Newton and Picard routes agree; perturbed starts give the same flow") {
  const auto p = cubic_profile();
  LaminarOptions opts;
  const auto a = solve_laminar(p, -2.5, opts);
  CHECK(a.method == "newton");
  CHECK(a.residual_inf <= opts.tol);

  LaminarOptions picard = opts;
  picard.use_newton = false;
  picard.picard_damping = 0.6;
  const auto b = solve_laminar(p, -2.5, picard);
  CHECK(b.method == "picard");
  CHECK((a.psi - b.psi).lpNorm<Eigen::Infinity>() <= 10 * opts.tol);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::VectorXd start(a.size());
  for (Eigen::Index i = 0; i < start.size(); ++i) start[i] = a.d2psi[i] + 0.5 * noise(rng);
  const auto c = solve_laminar(p, -2.5, opts, &start);
  CHECK((a.psi - c.psi).lpNorm<Eigen::Infinity>() <= 10 * opts.tol);
  CHECK((a.dpsi - c.dpsi).lpNorm<Eigen::Infinity>() <= 10 * opts.tol);
}

TEST_CASE("laminar solver error paths") {
  CHECK_THROWS_AS(solve_laminar(homogeneous(1.0, {-1.0, 1.0}), -2.0), DomainExit);
  CHECK_THROWS_AS(solve_laminar(make_profile({1.0}, {0.0, 1.0}, 1.0, {-5.0, 5.0}), -1.0), AssumptionViolation);
  LaminarOptions tight;
  tight.max_newton = 1;
  tight.max_picard = 1;
  CHECK_THROWS_AS(solve_laminar(cubic_profile(), -3.0, tight), ConvergenceFailure);
  LaminarOptions few;
  few.n_nodes = 6;
  CHECK_THROWS_AS(solve_laminar(homogeneous(), -1.0, few), InvalidInput);
}

TEST_CASE("sensitivity closed forms") {
  {
    const auto p = homogeneous();
    const auto s = laminar_sensitivity(p, solve_laminar(p, -2.0));
    CHECK(s.du_surface == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(s.du_bed == doctest::Approx(-1.0).epsilon(1e-14));
  }
  {
    const auto p = linear_profile();
    const auto flow = solve_laminar(p, -2.0);
    const auto s = laminar_sensitivity(p, flow);
    for (Eigen::Index i = 0; i < flow.size(); ++i) CHECK(std::abs(s.u[i] + flow.nodes()[i]) < 1e-15);
    CHECK(s.du_surface == doctest::Approx(-1.0).epsilon(1e-14));
  }
  {
    const auto p = unit_shear_profile();
    const auto flow = solve_laminar(p, -1.0);
    const auto s = laminar_sensitivity(p, flow);
    for (Eigen::Index i = 0; i < flow.size(); ++i)
      CHECK(std::abs(s.u[i] + std::sinh(flow.nodes()[i]) / std::sinh(1.0)) < 1e-14);
    CHECK(s.du_surface == doctest::Approx(-1.0 / std::sinh(1.0)).epsilon(1e-13));
    CHECK(-1.0 / std::sinh(1.0) == doctest::Approx(-0.8509181).epsilon(1e-7));
  }
}

TEST_CASE("sensitivity matches centered differences at second order") {
  const auto p = cubic_profile();
  const double lam = -2.0;
  const double exact = laminar_sensitivity(p, solve_laminar(p, lam)).du_surface;
  auto fd = [&](double h) {
    return (solve_laminar(p, lam + h).surface_slope() - solve_laminar(p, lam - h).surface_slope()) / (2 * h);
  };
  const double e1 = std::abs(fd(1e-3) - exact);
  const double e2 = std::abs(fd(5e-4) - exact);
  CHECK(e1 < 1e-5);
  const double ratio = e1 / e2;
  MESSAGE("Richardson ratio " << ratio);
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
}

TEST_CASE("threshold lambda") {
  CHECK(std::abs(find_threshold_lambda(homogeneous(), -1.0, 1.0)) <= 1e-10);
  CHECK(std::abs(find_threshold_lambda(homogeneous())) <= 1e-10);
  const double lin = find_threshold_lambda(linear_profile(), -1.0, 1.0);
  CHECK(std::abs(lin + 7.0 / 30.0) <= 1e-10);
  CHECK(lin == doctest::Approx(-0.2333333).epsilon(1e-7));

  const auto shear = unit_shear_profile();
  const double big = find_threshold_lambda(shear);
  CHECK(std::abs(solve_laminar(shear, big).surface_slope()) <= 1e-10);

  CHECK_THROWS_AS(find_threshold_lambda(homogeneous(), 0.5, 1.0), InvalidInput);
}

TEST_CASE("lambda minus") {
  const auto hom = find_lambda_minus(homogeneous());
  CHECK(std::abs(hom.lambda_minus + 1.0) <= 1e-9);
  CHECK(hom.min_dpsi >= 0.0);
  CHECK(hom.surface_excess >= -1e-10);

  const auto lin = find_lambda_minus(linear_profile());
  CHECK(std::abs(lin.lambda_minus - (-1.0 - 7.0 / 30.0)) <= 1e-9);
  CHECK(lin.lambda_minus == doctest::Approx(-1.2333333).epsilon(1e-7));
  CHECK(lin.threshold == doctest::Approx(-7.0 / 30.0).epsilon(1e-9));

  CHECK_THROWS_AS(find_lambda_minus(homogeneous(), 1e-10, {}, -0.5), ConvergenceFailure);
}

TEST_CASE("surface slope decreases in lambda") {
  const auto p = cubic_profile();
  const double big = find_threshold_lambda(p);
  double prev = solve_laminar(p, big - 2.0).surface_slope();
  for (int i = 1; i <= 40; ++i) {
    const double s = solve_laminar(p, big - 2.0 + 0.1 * i).surface_slope();
    CHECK(s < prev);
    prev = s;
  }
}

TEST_CASE("derivative identity from double quadrature") {
  for (const auto& p : {linear_profile(), cubic_profile()}) {
    const auto flow = solve_laminar(p, -1.5);
    const Eigen::VectorXd colloc = flow.grid->d1() * flow.psi;
    double err_spec = 0.0, err_colloc = 0.0;
    for (Eigen::Index i = 0; i < flow.size(); ++i) {
      const double q = dpsi_by_quadrature(p, flow, flow.nodes()[i]);
      err_spec = std::max(err_spec, std::abs(q - flow.dpsi[i]));
      err_colloc = std::max(err_colloc, std::abs(q - colloc[i]));
    }
    CHECK(err_spec <= 1e-11);
    CHECK(err_colloc <= 1e-10);
  }
}

TEST_CASE("a priori sup bound on random admissible samples") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> lam(-6.0, 0.0);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = random_admissible_profile(rng);
    const double l = lam(rng);
    const auto flow = solve_laminar(p, l);
    CHECK(flow.psi.lpNorm<Eigen::Infinity>() <= p.apriori_bound(l) + 1e-12);
  }
}

TEST_CASE("spectral convergence of the off-grid residual") {
  const auto p = cubic_profile();
  LaminarOptions opts;
  double prev = -1.0;
  for (int n : {8, 16, 32, 64}) {
    opts.n_nodes = n;
    const double r = offgrid_residual(p, solve_laminar(p, -3.0, opts));
    MESSAGE("n = " << n << " residual " << r);
    if (prev > 0.0) CHECK(r <= std::max(1e-2 * prev, 1e-12));
    prev = r;
  }
}

TEST_CASE("laminar CSV export") {
  const auto flow = solve_laminar(homogeneous(), 0.0);
  std::ostringstream os;
  write_laminar_csv(os, flow);
  const std::string s = os.str();
  CHECK(s.rfind("# lambda=0 residual_inf=0\ny,psi,dpsi\n", 0) == 0);
  CHECK(s.find("\n0,0,0\n") != std::string::npos);
}
