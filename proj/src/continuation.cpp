#include "stratwave/continuation.hpp"

#include "stratwave/dispersion.hpp"
#include "stratwave/errors.hpp"
#include "stratwave/io.hpp"

#include <cmath>
#include <ostream>

namespace stratwave {

namespace {

struct Parameters {
  double sigma = 0.0;
  double lambda = 0.0;
};

class AugmentedSystem {
public:
  AugmentedSystem(const StratificationProfile& profile, const BranchCurve& curve, const BranchOptions& opts,
                  std::shared_ptr<const FlatGrid> grid)
      : profile_(profile), curve_(curve), opts_(opts), grid_(std::move(grid)), p_(grid_->x().half()) {}

  int size() const { return p_; }

  // z = (a_j for j != m in increasing j, free parameter).
  SurfaceShape shape(const Eigen::VectorXd& z, double s) const {
    SurfaceShape sh{curve_.k, std::vector<double>(p_, 0.0)};
    int idx = 0;
    for (int j = 1; j <= p_; ++j) sh.coeffs[j - 1] = j == curve_.m ? -s : z[idx++];
    return sh;
  }

  Parameters parameters(const Eigen::VectorXd& z) const {
    Parameters prm;
    if (curve_.parameter == BranchParameter::Sigma) {
      prm.sigma = z[p_ - 1];
      prm.lambda = curve_.fixed_value;
    } else {
      prm.sigma = curve_.fixed_value;
      prm.lambda = z[p_ - 1];
    }
    return prm;
  }

  Eigen::VectorXd pack(const SurfaceShape& sh, double parameter) const {
    Eigen::VectorXd z(p_);
    int idx = 0;
    for (int j = 1; j <= p_; ++j)
      if (j != curve_.m) z[idx++] = j - 1 < static_cast<int>(sh.coeffs.size()) ? sh.coeffs[j - 1] : 0.0;
    z[p_ - 1] = parameter;
    return z;
  }

  // Psi and the inner field at z.
  PsiEvaluation evaluate(const Eigen::VectorXd& z, double s, const Eigen::MatrixXd* warm) const {
    const Parameters prm = parameters(z);
    EllipticOptions eo;
    eo.tol = opts_.inner_tol;
    return evaluate_Psi(profile_, prm.sigma, prm.lambda, shape(z, s), grid_, eo, warm);
  }

  // dF/dz by the tangent-linear route: for each direction, the inner
  // residual is differentiated at fixed V, dV solves J dV = -dR, and the
  // explicit surface residual is differentiated along (d eta, d param, dV).
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& z, double s, const FlattenedField& field) const {
    const FlatGrid& grid = *grid_;
    const double h = opts_.fd_step;
    Eigen::MatrixXd jac(p_, p_);
    const Eigen::Index n = grid.unknowns();
    for (int col = 0; col < p_; ++col) {
      Eigen::VectorXd zp = z, zm = z;
      zp[col] += h;
      zm[col] -= h;
      const SurfaceShape sp = shape(zp, s), sm = shape(zm, s);
      const Parameters pp = parameters(zp), pm = parameters(zm);
      const bool sigma_col = col == p_ - 1 && curve_.parameter == BranchParameter::Sigma;

      Eigen::MatrixXd dV = Eigen::MatrixXd::Zero(grid.ny(), grid.cols());
      if (!sigma_col) {
        const ShapeSamples ssp = sample_shape(sp, grid), ssm = sample_shape(sm, grid);
        const Eigen::MatrixXd rp =
            inner_residual(profile_, pp.lambda, ssp, assemble_A0(sp, grid), grid, field.V).residual;
        const Eigen::MatrixXd rm =
            inner_residual(profile_, pm.lambda, ssm, assemble_A0(sm, grid), grid, field.V).residual;
        const Eigen::MatrixXd dR = (rp - rm) / (2.0 * h);
        const Eigen::VectorXd sol = field.jacobian->solve(Eigen::Map<const Eigen::VectorXd>(dR.data(), n));
        dV = -Eigen::Map<const Eigen::MatrixXd>(sol.data(), grid.ny(), grid.cols());
      }
      const Eigen::VectorXd fp = explicit_Psi(sp, pp, field.V + h * dV);
      const Eigen::VectorXd fm = explicit_Psi(sm, pm, field.V - h * dV);
      jac.col(col) = grid.x().project((fp - fm) / (2.0 * h));
    }
    return jac;
  }

private:
  Eigen::VectorXd explicit_Psi(const SurfaceShape& sh, const Parameters& prm, const Eigen::MatrixXd& V) const {
    const FlatGrid& grid = *grid_;
    const ChebyshevGrid& cy = grid.y();
    Eigen::MatrixXd psi = cy.green() * V;
    psi.colwise() -= prm.lambda * cy.nodes();
    Eigen::MatrixXd psi_y = cy.green_dy() * V;
    psi_y.array() -= prm.lambda;
    const ShapeSamples ss = sample_shape(sh, grid);
    return surface_residual(profile_, prm.sigma, ss, grid, boundary_trace_B(ss, grid, psi, psi_y));
  }

  const StratificationProfile& profile_;
  const BranchCurve& curve_;
  const BranchOptions& opts_;
  std::shared_ptr<const FlatGrid> grid_;
  int p_;
};

void check_options(const BranchOptions& o) {
  if (!(o.s_max > 0.0)) throw InvalidInput("s_max must be positive");
  if (o.n_steps < 1) throw InvalidInput("n_steps must be >= 1");
  if (!(o.tol > 0.0) || !(o.inner_tol > 0.0)) throw InvalidInput("branch tolerances must be positive");
  if (!(o.fd_step > 0.0)) throw InvalidInput("fd_step must be positive");
  if (o.max_newton < 0 || o.max_halvings < 0) throw InvalidInput("invalid Newton limits");
}

// mu_j at the root for every resolved mode; throws unless only j = m vanishes.
void check_simple_kernel(const StratificationProfile& profile, const LaminarFlow& flow, int m, int k, double sigma,
                         int p, double kernel_tol) {
  const auto modes = compute_modes(profile, flow, k, p, sigma);
  for (const auto& r : modes) {
    if (r.m == m) continue;
    if (std::abs(*r.mu) <= kernel_tol * sigma * r.chi())
      throw AssumptionViolation("kernel is not simple: mu_" + std::to_string(r.m) + " = " + fmt17(*r.mu) +
                                " also vanishes");
  }
}

BranchCurve start_curve(const StratificationProfile& profile, BranchParameter param, double fixed, double root,
                        int m, int k, std::shared_ptr<const FlatGrid> grid, const BranchOptions& opts) {
  BranchCurve c;
  c.m = m;
  c.k = k;
  c.parameter = param;
  c.fixed_value = fixed;
  c.root = root;
  const double sigma = param == BranchParameter::Sigma ? root : fixed;
  const double lambda = param == BranchParameter::Sigma ? fixed : root;
  BranchPoint p0;
  p0.s = 0.0;
  p0.parameter = root;
  p0.shape = SurfaceShape{k, std::vector<double>(grid->x().half(), 0.0)};
  EllipticOptions eo;
  eo.tol = opts.inner_tol;
  const PsiEvaluation e = evaluate_Psi(profile, sigma, lambda, p0.shape, grid, eo);
  p0.field = e.field;
  p0.residual_inf = e.Psi.lpNorm<Eigen::Infinity>();
  c.points.push_back(std::move(p0));
  return c;
}

std::vector<double> uniform_amplitudes(const BranchOptions& opts) {
  std::vector<double> s;
  for (int j = 1; j <= opts.n_steps; ++j) s.push_back(j * opts.s_max / opts.n_steps);
  return s;
}

} // namespace

std::string to_string(BranchParameter p) { return p == BranchParameter::Sigma ? "sigma" : "lambda"; }

void continue_branch(const StratificationProfile& profile, BranchCurve& curve, const std::vector<double>& s_values,
                     const BranchOptions& opts) {
  check_options(opts);
  if (curve.points.empty()) throw InvalidInput("branch has no starting point");
  auto grid = curve.points.front().field.grid;
  AugmentedSystem sys(profile, curve, opts, grid);

  struct Attempt {
    bool ok = false;
    BranchPoint point;
    std::string why;
  };
  auto solve_at = [&](double s, const Eigen::VectorXd& guess, const Eigen::MatrixXd& warm) {
    Attempt a;
    Eigen::VectorXd z = guess;
    Eigen::MatrixXd V = warm;
    try {
      for (int it = 0; it <= opts.max_newton; ++it) {
        PsiEvaluation e = sys.evaluate(z, s, &V);
        V = e.field.V;
        const double res = e.Psi.lpNorm<Eigen::Infinity>();
        if (res <= opts.tol) {
          a.ok = true;
          a.point.s = s;
          a.point.parameter = z[sys.size() - 1];
          a.point.shape = sys.shape(z, s);
          a.point.field = std::move(e.field);
          a.point.residual_inf = res;
          a.point.newton_iterations = it;
          return a;
        }
        if (it == opts.max_newton) break;
        if (!e.field.jacobian) {
          EllipticOptions eo;
          eo.tol = opts.inner_tol;
          eo.factor_at_solution = true;
          e.field = solve_semilinear(profile, sys.parameters(z).lambda, sys.shape(z, s), grid, eo, &V);
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys.jacobian(z, s, e.field));
        if (lu.rcond() < opts.min_rcond) {
          a.why = "augmented Jacobian is singular (rcond " + fmt17(lu.rcond()) + ")";
          return a;
        }
        z -= lu.solve(grid->x().project(e.Psi));
      }
      a.why = "augmented Newton did not converge at s = " + fmt17(s);
    } catch (const DomainExit& ex) {
      a.why = ex.what();
    } catch (const ConvergenceFailure& ex) {
      a.why = ex.what();
    }
    return a;
  };

  for (double target : s_values) {
    double s_prev = curve.points.back().s;
    if (!(target > s_prev)) throw InvalidInput("amplitudes must increase along the branch");
    int halvings = 0;
    while (curve.points.back().s < target) {
      s_prev = curve.points.back().s;
      double step = (target - s_prev) / std::pow(2.0, halvings);
      const double s = s_prev + step;
      const BranchPoint& last = curve.points.back();
      // Previous point (a_m = -s is imposed separately), secant once two exist.
      Eigen::VectorXd guess = sys.pack(last.shape, last.parameter);
      if (curve.points.size() >= 2) {
        const BranchPoint& before = curve.points[curve.points.size() - 2];
        const Eigen::VectorXd zb = sys.pack(before.shape, before.parameter);
        guess += (s - last.s) / (last.s - before.s) * (guess - zb);
      }
      Attempt a = solve_at(s, guess, last.field.V);
      if (a.ok) {
        curve.points.push_back(std::move(a.point));
        halvings = 0;
        continue;
      }
      if (++halvings > opts.max_halvings) {
        curve.truncated = true;
        curve.truncation_reason = a.why;
        return;
      }
      curve.warnings.push_back("step to s = " + fmt17(s) + " failed (" + a.why + "); halving");
    }
  }
}

BranchCurve branch_from_sigma(const StratificationProfile& profile, double lambda, int m, int k,
                              const BranchOptions& opts) {
  check_options(opts);
  auto grid = std::make_shared<FlatGrid>(k, opts.nx, opts.ny);
  if (m < 1 || m > grid->x().half()) throw InvalidInput("mode index m must lie in [1, nx/2]");
  LaminarOptions lo;
  lo.n_nodes = opts.ny;
  const LaminarFlow flow = solve_laminar(profile, lambda, lo);
  const double root = sigma_star(profile, flow, m, k);
  check_simple_kernel(profile, flow, m, k, root, grid->x().half(), opts.kernel_tol);
  BranchCurve c = start_curve(profile, BranchParameter::Sigma, lambda, root, m, k, grid, opts);
  continue_branch(profile, c, uniform_amplitudes(opts), opts);
  return c;
}

BranchCurve branch_from_lambda(const StratificationProfile& profile, double sigma, int m, int k,
                               const BranchOptions& opts) {
  check_options(opts);
  if (!(sigma > 0.0)) throw InvalidInput("surface tension sigma must be positive");
  auto grid = std::make_shared<FlatGrid>(k, opts.nx, opts.ny);
  if (m < 1 || m > grid->x().half()) throw InvalidInput("mode index m must lie in [1, nx/2]");
  LaminarOptions lo;
  lo.n_nodes = opts.ny;
  const double floor = opts.lambda_floor.value_or(profile.window().lo);
  const LambdaStar ls = lambda_star(profile, make_lambda_scan(profile, floor, lo), sigma, m, k);
  if (ls.below_floor)
    throw InvalidInput("lambda-bar_" + std::to_string(m) + " lies below the search floor " + fmt17(floor));
  const LaminarFlow flow = solve_laminar(profile, ls.lambda_star, lo);
  check_simple_kernel(profile, flow, m, k, sigma, grid->x().half(), opts.kernel_tol);
  BranchCurve c = start_curve(profile, BranchParameter::Lambda, sigma, ls.lambda_star, m, k, grid, opts);
  if (ls.sign_changes > 1)
    c.warnings.push_back(std::to_string(ls.sign_changes) + " sign changes of mu_m above the floor; lowest taken");
  continue_branch(profile, c, uniform_amplitudes(opts), opts);
  return c;
}

nlohmann::json BranchCurve::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : points)
    arr.push_back({{"s", p.s}, {"parameter", p.parameter}, {"eta_coeffs", p.shape.coeffs}, {"residual", p.residual_inf}});
  return arr;
}

PhysicalSolution reconstruct_physical(const StratificationProfile& profile, const FlattenedField& field,
                                      double stagnation_tol) {
  const FlatGrid& g = *field.grid;
  const ShapeSamples s = sample_shape(field.shape, g);
  const Eigen::VectorXd& y = g.y().nodes();
  const int ny = g.ny(), nx = g.nx();
  const Eigen::MatrixXd dev = field.psi.colwise() - field.psi.col(0);
  const Eigen::MatrixXd psi_x = dev * g.x().dx().transpose();

  PhysicalSolution out;
  out.x.resize(nx);
  out.y = y;
  out.Y.resize(ny, nx);
  out.psi.resize(ny, nx);
  out.u_rel.resize(ny, nx);
  out.v.resize(ny, nx);
  out.pressure.resize(ny, nx);
  out.speed.resize(ny, nx);
  out.stagnation.resize(ny, nx);
  out.Q = g.x().mean(boundary_trace_B(s, g, field.psi, field.psi_y));

  for (int i = 0; i < nx; ++i) {
    const int c = g.x().fold(i);
    // Odd quantities change sign on the mirrored half.
    const double sign = g.x().full_node(i) > M_PI / g.k() + 1e-12 ? -1.0 : 1.0;
    out.x[i] = g.x().full_node(i);
    const double e = s.eta[c], e1 = sign * s.deta[c], h = 1.0 + e;
    for (int j = 0; j < ny; ++j) {
      const double psi = field.psi(j, c);
      const double yx = -(1.0 + y[j]) * e1 / h;
      const double pX = sign * psi_x(j, c) + field.psi_y(j, c) * yx;
      const double pY = field.psi_y(j, c) / h;
      const double rho = profile.rho(-psi);
      if (!(rho > 0.0)) throw AssumptionViolation("density is not positive on the realized streamline range");
      const double Yp = (1.0 + y[j]) * e + y[j];
      const double grad2 = pX * pX + pY * pY;
      out.Y(j, i) = Yp;
      out.psi(j, i) = psi;
      out.u_rel(j, i) = pY / std::sqrt(rho);
      out.v(j, i) = -pX / std::sqrt(rho);
      out.speed(j, i) = std::sqrt(grad2);
      out.pressure(j, i) = out.Q - profile.beta_integral(-psi) - 0.5 * grad2 - profile.g() * rho * Yp;
    }
  }
  const double smax = out.speed.maxCoeff();
  out.stagnation = (out.speed.array() <= stagnation_tol * smax).matrix();
  out.stagnation_count = static_cast<int>(out.stagnation.count());
  return out;
}

void write_physical_csv(std::ostream& out, const PhysicalSolution& sol) {
  out << "# velocities are relative to the wave speed c\n";
  out << "x,y,Y,psi,u_minus_c,v,pressure_minus_P0,stagnation\n";
  for (Eigen::Index i = 0; i < sol.x.size(); ++i)
    for (Eigen::Index j = 0; j < sol.y.size(); ++j)
      out << fmt17(sol.x[i]) << ',' << fmt17(sol.y[j]) << ',' << fmt17(sol.Y(j, i)) << ',' << fmt17(sol.psi(j, i))
          << ',' << fmt17(sol.u_rel(j, i)) << ',' << fmt17(sol.v(j, i)) << ',' << fmt17(sol.pressure(j, i)) << ','
          << (sol.stagnation(j, i) ? 1 : 0) << '\n';
}

double ValidationReport::max_residual() const {
  return std::max({interior_residual, top_bc, bottom_bc, bernoulli_residual, volume, eta_symmetry, psi_symmetry});
}

nlohmann::json ValidationReport::to_json() const {
  return {{"interior_residual", interior_residual},
          {"top_bc", top_bc},
          {"bottom_bc", bottom_bc},
          {"bernoulli_residual", bernoulli_residual},
          {"Q", Q},
          {"volume", volume},
          {"eta_symmetry", eta_symmetry},
          {"psi_symmetry", psi_symmetry},
          {"max_residual", max_residual()}};
}

ValidationReport validate_solution(const StratificationProfile& profile, double sigma, double lambda,
                                   const FlattenedField& field) {
  if (!(sigma > 0.0)) throw InvalidInput("surface tension sigma must be positive");
  const FlatGrid& g = *field.grid;
  const ShapeSamples s = sample_shape(field.shape, g);
  const A0Coefficients a = assemble_A0(field.shape, g);
  const ChebyshevGrid& cy = g.y();
  const Eigen::VectorXd& y = cy.nodes();
  const int ny = g.ny(), nc = g.cols();

  // Independent of the integrated representation: collocation derivatives
  // of the nodal values.
  const Eigen::MatrixXd py = cy.d1() * field.psi;
  const Eigen::MatrixXd pyy = cy.d2() * field.psi;
  const Eigen::MatrixXd pxx = (field.psi.colwise() - field.psi.col(0)) * g.x().dxx().transpose();
  const Eigen::MatrixXd pxy = (py.colwise() - py.col(0)) * g.x().dx().transpose();
  ValidationReport r;
  for (int i = 0; i < nc; ++i)
    for (int j = 0; j < ny; ++j) {
      const double res = a.a11(j, i) * pxx(j, i) + a.a12(j, i) * pxy(j, i) + a.a22(j, i) * pyy(j, i) +
                         a.a2(j, i) * py(j, i) - profile.f((1.0 + y[j]) * s.eta[i] + y[j], field.psi(j, i));
      r.interior_residual = std::max(r.interior_residual, std::abs(res));
    }
  r.top_bc = field.psi.row(ny - 1).cwiseAbs().maxCoeff();
  r.bottom_bc = (field.psi.row(0).array() - lambda).abs().maxCoeff();

  const Eigen::VectorXd B = boundary_trace_B(s, g, field.psi, py);
  r.Q = g.x().mean(B);
  const Eigen::VectorXd bern =
      B - sigma * curvature(s) + profile.g() * profile.surface_density() * s.eta - r.Q * Eigen::VectorXd::Ones(nc);
  r.bernoulli_residual = bern.lpNorm<Eigen::Infinity>();
  r.volume = std::abs(g.x().mean(s.eta));

  // Mirror symmetry at points off the grid.
  const Eigen::MatrixXd coeffs = g.x().to_coeffs() * field.psi.transpose(); // (P+1) x ny
  const double L = g.x().period();
  for (int q = 0; q < nc; ++q) {
    const double x = (q + 0.37) * L / (2.0 * nc);
    r.eta_symmetry = std::max(r.eta_symmetry, std::abs(field.shape.eta(x) - field.shape.eta(L - x)));
    for (int j = 0; j < ny; ++j) {
      double left = 0.0, right = 0.0;
      for (int c = 0; c < coeffs.rows(); ++c) {
        left += coeffs(c, j) * std::cos(c * g.k() * x);
        right += coeffs(c, j) * std::cos(c * g.k() * (L - x));
      }
      r.psi_symmetry = std::max(r.psi_symmetry, std::abs(left - right));
    }
  }
  return r;
}

} // namespace stratwave
