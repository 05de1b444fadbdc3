#include "stratwave/dispersion.hpp"
#include "stratwave/elliptic.hpp"
#include "stratwave/errors.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <Eigen/Sparse>

#include <cmath>
#include <random>
#include <sstream>

using namespace stratwave;
using namespace stratwave::testing;

namespace {

std::shared_ptr<const FlatGrid> default_grid(int k = 1) { return std::make_shared<FlatGrid>(k, 64, 48); }

double coth(double x) { return std::cosh(x) / std::sinh(x); }

// Second-order finite differences for psi_xx + a12 psi_xy + a22 psi_yy +
// a2 psi_y = 0 on [0, pi] x [-1, 0] with eta = 0.05 cos x, even reflection
// in x, psi(x, 0) = 0, psi(x, -1) = lambda. Returns the (mx+1) x (my+1)
// nodal solution, rows indexed by x.
Eigen::MatrixXd fd_flattened_homogeneous(int mx, int my, double lambda) {
  const double hx = M_PI / mx, hy = 1.0 / my;
  const int nyi = my - 1;
  auto id = [&](int i, int j) { return i * nyi + (j - 1); };
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero((mx + 1) * nyi);
  auto reflect = [&](int i) { return i < 0 ? -i : (i > mx ? 2 * mx - i : i); };
  for (int i = 0; i <= mx; ++i) {
    const double x = i * hx;
    const double e = 0.05 * std::cos(x), e1 = -0.05 * std::sin(x), e2 = -0.05 * std::cos(x);
    for (int j = 1; j < my; ++j) {
      const double y = -1.0 + j * hy, z = 1.0 + y, h = 1.0 + e;
      const double a12 = -2.0 * z * e1 / h;
      const double a22 = (1.0 + z * z * e1 * e1) / (h * h);
      const double a2 = -z * (h * e2 - 2.0 * e1 * e1) / (h * h);
      const int row = id(i, j);
      auto add = [&](int ii, int jj, double c) {
        ii = reflect(ii);
        if (jj == my) return;
        if (jj == 0) {
          rhs[row] -= c * lambda;
          return;
        }
        trip.emplace_back(row, id(ii, jj), c);
      };
      add(i - 1, j, 1.0 / (hx * hx));
      add(i + 1, j, 1.0 / (hx * hx));
      add(i, j, -2.0 / (hx * hx) - 2.0 * a22 / (hy * hy));
      add(i, j - 1, a22 / (hy * hy) - a2 / (2 * hy));
      add(i, j + 1, a22 / (hy * hy) + a2 / (2 * hy));
      const double c = a12 / (4 * hx * hy);
      add(i + 1, j + 1, c);
      add(i - 1, j - 1, c);
      add(i + 1, j - 1, -c);
      add(i - 1, j + 1, -c);
    }
  }
  Eigen::SparseMatrix<double> A((mx + 1) * nyi, (mx + 1) * nyi);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
  const Eigen::VectorXd u = lu.solve(rhs);
  Eigen::MatrixXd out(mx + 1, my + 1);
  for (int i = 0; i <= mx; ++i) {
    out(i, 0) = lambda;
    out(i, my) = 0.0;
    for (int j = 1; j < my; ++j) out(i, j) = u[id(i, j)];
  }
  return out;
}

} // namespace

TEST_CASE("flattened operator coefficients") {
  const auto grid = default_grid();
  const auto flat = assemble_A0(SurfaceShape::flat(1), *grid);
  CHECK(flat.a11.isOnes());
  CHECK(flat.a12.isZero());
  CHECK(flat.a22.isOnes());
  CHECK(flat.a2.isZero());

  const auto a = assemble_A0(SurfaceShape::mode(1, 1, 0.1), *grid);
  const int top = grid->ny() - 1;
  CHECK(a.a22(top, 0) == doctest::Approx(0.8264463).epsilon(1e-7));
  CHECK(a.a2(top, 0) == doctest::Approx(0.0909091).epsilon(1e-6));
  CHECK(a.a22(top, 0) == doctest::Approx(1.0 / 1.21).epsilon(1e-15));
  CHECK(a.a2(top, 0) == doctest::Approx(0.11 / 1.21).epsilon(1e-15));
  CHECK(a.a2.row(0).isZero());
  CHECK(a.a12.row(0).isZero());

  CHECK_THROWS_AS(assemble_A0(SurfaceShape::mode(1, 2, 1.0), *grid), DomainExit);
  CHECK_THROWS_AS(assemble_A0(SurfaceShape::mode(2, 1, 0.1), *grid), InvalidInput);
  CHECK_THROWS_AS(assemble_A0(SurfaceShape::mode(1, 40, 0.1), *grid), InvalidInput);
}

TEST_CASE("flat surface reproduces the laminar flow column by column") {
  const auto grid = default_grid();
  EllipticOptions opts;
  for (const auto& p : {linear_profile(), unit_shear_profile()}) {
    const auto field = solve_semilinear(p, -1.5, SurfaceShape::flat(1), grid, opts);
    LaminarOptions lo;
    lo.n_nodes = grid->ny();
    const auto flow = solve_laminar(p, -1.5, lo);
    CHECK(field.residual_inf <= opts.tol);
    for (int i = 0; i < grid->cols(); ++i)
      CHECK((field.psi.col(i) - flow.psi).lpNorm<Eigen::Infinity>() <= 10 * opts.tol);
    CHECK(field.psi.row(0).isConstant(-1.5));
    CHECK(field.psi.row(grid->ny() - 1).isZero(0.0));
  }
}

TEST_CASE("spectral solve matches an extrapolated finite-difference solve") {
  const auto grid = default_grid();
  const double lambda = -2.0;
  const auto field = solve_semilinear(homogeneous(), lambda, SurfaceShape::mode(1, 1, 0.05), grid);
  // Two Richardson levels on grids refined by 2: O(h^6).
  const Eigen::MatrixXd u1 = fd_flattened_homogeneous(32, 32, lambda);
  const Eigen::MatrixXd u2 = fd_flattened_homogeneous(64, 64, lambda);
  const Eigen::MatrixXd u3 = fd_flattened_homogeneous(128, 128, lambda);
  const auto& y = grid->y();
  double err = 0.0;
  for (int q = 0; q <= 4; ++q) {
    const int col = q * grid->x().half() / 4;
    const ChebSeries s = y.interpolant(field.psi.col(col));
    for (int r = 1; r <= 3; ++r) {
      const double yy = -1.0 + 0.25 * r;
      const double r1 = (4 * u2(16 * q, 16 * r) - u1(8 * q, 8 * r)) / 3;
      const double r2 = (4 * u3(32 * q, 32 * r) - u2(16 * q, 16 * r)) / 3;
      err = std::max(err, std::abs(s(yy) - (16 * r2 - r1) / 15));
    }
  }
  MESSAGE("spectral vs extrapolated FD: " << err << ", coarse FD error " << std::abs(u1(8, 16) - u3(32, 64))
                                           << ", departure from laminar " << std::abs(u3(32, 64) + 1.0));
  CHECK(err <= 1e-8);
}

TEST_CASE("semilinear solve respects the sup bound and reports failures") {
  const auto grid = default_grid();
  std::mt19937_64 rng(11);
  for (int t = 0; t < 4; ++t) {
    const auto p = random_admissible_profile(rng);
    const auto field = solve_semilinear(p, -1.0, SurfaceShape::mode(1, 1, 0.1), grid);
    CHECK(field.psi.lpNorm<Eigen::Infinity>() <= p.apriori_bound(-1.0) + 1e-11);
  }
  CHECK_THROWS_AS(solve_semilinear(homogeneous(1.0, {-1.5, 0.5}), -2.0, SurfaceShape::flat(1), grid), DomainExit);
  EllipticOptions one;
  one.max_iter = 1;
  one.tol = 1e-300;
  CHECK_THROWS_AS(solve_semilinear(homogeneous(), -2.0, SurfaceShape::mode(1, 1, 0.1), grid, one),
                  ConvergenceFailure);
  const auto steep = solve_semilinear(homogeneous(), -2.0, SurfaceShape::mode(1, 1, 0.96), grid);
  CHECK(steep.warnings.size() == 1);
}

TEST_CASE("surface trace") {
  const auto grid = default_grid();
  const auto hom = solve_semilinear(homogeneous(), -2.0, SurfaceShape::flat(1), grid);
  const Eigen::VectorXd B = boundary_trace_B(hom);
  for (Eigen::Index i = 0; i < B.size(); ++i) CHECK(B[i] == doctest::Approx(2.0).epsilon(1e-13));

  const auto p = linear_profile();
  const auto lam = solve_semilinear(p, -1.0, SurfaceShape::flat(1), grid);
  const double s = -(-1.0) - 7.0 / 30.0;
  const Eigen::VectorXd Bl = boundary_trace_B(lam);
  CHECK((Bl.array() - 0.5 * s * s).abs().maxCoeff() <= 1e-12);

  // Same trace on a twice finer x-grid at the shared nodes.
  const auto fine = std::make_shared<FlatGrid>(1, 128, 48);
  const auto shape = SurfaceShape::mode(1, 1, 0.05);
  const Eigen::VectorXd Bc = boundary_trace_B(solve_semilinear(p, -1.0, shape, grid));
  const Eigen::VectorXd Bf = boundary_trace_B(solve_semilinear(p, -1.0, shape, fine));
  for (int i = 0; i < grid->cols(); ++i) CHECK(std::abs(Bc[i] - Bf[2 * i]) < 1e-11);
}

TEST_CASE("Psi vanishes on the trivial branch and is mean-zero") {
  const auto grid = default_grid();
  const auto p = linear_profile();
  const auto e = evaluate_Psi(p, 0.7, -2.0, SurfaceShape::flat(1), grid);
  CHECK(e.Psi.lpNorm<Eigen::Infinity>() <= 1e-14);
  CHECK(e.Q == doctest::Approx(0.5 * std::pow(2.0 - 7.0 / 30.0, 2)).epsilon(1e-13));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> c(-0.03, 0.03);
  for (int t = 0; t < 5; ++t) {
    SurfaceShape shape{1, {c(rng), c(rng), c(rng), c(rng)}};
    const auto ev = evaluate_Psi(p, 0.7, -2.0, shape, grid);
    CHECK(std::abs(grid->x().mean(ev.Psi)) <= 1e-14);
  }
  CHECK_THROWS_AS(evaluate_Psi(p, 0.0, -2.0, SurfaceShape::flat(1), grid), InvalidInput);
}

TEST_CASE("Psi near the first bifurcation point of the homogeneous profile") {
  const auto grid = default_grid();
  const auto p = homogeneous();
  const double eps = 1e-4;
  const double s1 = 4.0 * coth(1.0) - 1.0;
  const auto at = evaluate_Psi(p, s1, -2.0, SurfaceShape::mode(1, 1, eps), grid);
  CHECK(at.Psi.lpNorm<Eigen::Infinity>() / eps <= 1e-2);

  const auto off = evaluate_Psi(p, 1.0, -2.0, SurfaceShape::mode(1, 1, eps), grid);
  const double mu1 = 2.0 - 4.0 * coth(1.0);
  double err = 0.0;
  for (int i = 0; i < grid->cols(); ++i)
    err = std::max(err, std::abs(off.Psi[i] / eps - mu1 * std::cos(grid->x().nodes()[i])));
  CHECK(err <= 1e-2 * std::abs(mu1));
  CHECK(mu1 == doctest::Approx(-3.2521412).epsilon(1e-7));
}

TEST_CASE("curvature term linearizes at third order") {
  const auto grid = default_grid();
  for (int m : {1, 3}) {
    auto defect = [&](double eps) {
      const ShapeSamples s = sample_shape(SurfaceShape::mode(1, m, eps), *grid);
      const Eigen::VectorXd kap = curvature(s);
      double d = 0.0;
      for (int i = 0; i < grid->cols(); ++i)
        d = std::max(d, std::abs(-kap[i] - m * m * eps * std::cos(m * grid->x().nodes()[i])));
      return d;
    };
    const double ratio = defect(1e-2) / defect(5e-3);
    CHECK(ratio == doctest::Approx(8.0).epsilon(0.01));
  }
}

TEST_CASE("finite-difference linearization of Psi is the Fourier multiplier") {
  const auto grid = default_grid();
  const auto p = linear_profile();
  const double sigma = 1.0, lambda = -2.0;
  LaminarOptions lo;
  lo.n_nodes = grid->ny();
  const auto flow = solve_laminar(p, lambda, lo);
  for (int m = 1; m <= 5; ++m) {
    const double mu = symbol_mu(p, flow, m, 1, sigma);
    auto rel = [&](double eps) {
      const auto e = evaluate_Psi(p, sigma, lambda, SurfaceShape::mode(1, m, eps), grid);
      const Eigen::VectorXd c = grid->x().project(e.Psi) / eps;
      double err = 0.0;
      for (Eigen::Index j = 0; j < c.size(); ++j) err = std::max(err, std::abs(c[j] - (j == m - 1 ? mu : 0.0)));
      return err / std::abs(mu);
    };
    const double e3 = rel(1e-3), e4 = rel(1e-4);
    CHECK(e4 <= 1e-2);
    CHECK(e3 / e4 == doctest::Approx(10.0).epsilon(0.05));
  }
}

TEST_CASE("field and residual export") {
  const auto grid = std::make_shared<FlatGrid>(1, 8, 8);
  const auto e = evaluate_Psi(homogeneous(), 1.0, -1.0, SurfaceShape::mode(1, 1, 0.01), grid);
  std::ostringstream f, r;
  write_field_csv(f, e.field);
  write_residual_csv(r, *grid, e.Psi);
  int lines = 0;
  for (char ch : f.str()) lines += ch == '\n';
  CHECK(lines == 1 + 8 * 8);
  CHECK(f.str().rfind("x,y,psi\n0,-1,-1\n", 0) == 0);
  CHECK(r.str().rfind("x,Psi\n0,", 0) == 0);
}
