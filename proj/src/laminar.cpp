#include "stratwave/laminar.hpp"

#include "stratwave/errors.hpp"
#include "stratwave/io.hpp"

#include <cmath>
#include <ostream>
#include <string>

namespace stratwave {

namespace {

constexpr double kWindowSlack = 1e-12;

struct LaminarState {
  Eigen::VectorXd psi;
  Eigen::VectorXd residual;
  double norm = 0.0;
};

LaminarState evaluate(const StratificationProfile& profile, const ChebyshevGrid& grid, double lambda,
                      const Eigen::VectorXd& d2) {
  LaminarState s;
  const Eigen::VectorXd& y = grid.nodes();
  s.psi = -lambda * y + grid.green() * d2;
  s.residual.resize(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) s.residual[i] = d2[i] - profile.f(y[i], s.psi[i]);
  s.norm = s.residual.lpNorm<Eigen::Infinity>();
  if (!std::isfinite(s.norm)) s.norm = std::numeric_limits<double>::infinity();
  return s;
}

// H = int int psi'' expressed in the series, then the linear part added.
void attach_series(LaminarFlow& flow) {
  const ChebyshevGrid& grid = *flow.grid;
  flow.d2psi_series = grid.interpolant(flow.d2psi);
  const ChebSeries h1 = flow.d2psi_series.integral();
  const ChebSeries h2 = h1.integral();
  const double h0 = h2(0.0);
  const double lam = flow.lambda;

  Eigen::VectorXd c = h2.coeffs();
  // -(lambda + H(0)) y - H(0) with y = (T1 - T0) / 2.
  c[0] += 0.5 * (lam + h0) - h0;
  c[1] += -0.5 * (lam + h0);
  flow.psi_series = ChebSeries(c);

  Eigen::VectorXd d = h1.coeffs();
  d[0] += -lam - h0;
  flow.dpsi_series = ChebSeries(d);
}

} // namespace

LaminarFlow solve_laminar(const StratificationProfile& profile, double lambda, const LaminarOptions& opts,
                          const Eigen::VectorXd* initial_d2psi) {
  if (opts.n_nodes < 8) throw InvalidInput("laminar solve needs n_nodes >= 8");
  if (!(opts.tol > 0.0)) throw InvalidInput("laminar tolerance must be positive");
  if (!std::isfinite(lambda)) throw InvalidInput("lambda must be finite");

  auto grid = chebyshev_grid(opts.n_nodes);
  const Eigen::VectorXd& y = grid->nodes();
  const Eigen::Index n = y.size();
  const Eigen::MatrixXd& green = grid->green();

  // psi^0(y) = -lambda y, i.e. psi''^0 = 0.
  Eigen::VectorXd d2 = Eigen::VectorXd::Zero(n);
  if (initial_d2psi) {
    if (initial_d2psi->size() != n) throw InvalidInput("initial guess has the wrong size");
    d2 = *initial_d2psi;
  }

  LaminarState state = evaluate(profile, *grid, lambda, d2);
  int iterations = 0;
  std::string method = "newton";
  bool converged = state.norm <= opts.tol;

  if (!converged && opts.use_newton) {
    // Jacobian I - diag(f_psi) G; f_psi >= 0 keeps it away from singularity.
    Eigen::VectorXd best = d2;
    double best_norm = state.norm;
    int stalls = 0;
    for (int it = 0; it < opts.max_newton && !converged; ++it) {
      Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(n, n);
      for (Eigen::Index i = 0; i < n; ++i) jac.row(i) -= profile.f(y[i], state.psi[i], 1) * green.row(i);
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
      d2 -= lu.solve(state.residual);
      state = evaluate(profile, *grid, lambda, d2);
      ++iterations;
      if (state.norm < 0.9 * best_norm) {
        best = d2;
        best_norm = state.norm;
        stalls = 0;
      } else if (++stalls >= 3) {
        break;
      }
      converged = state.norm <= opts.tol;
    }
    if (!converged) {
      d2 = best;
      state = evaluate(profile, *grid, lambda, d2);
    }
  }

  if (!converged) {
    // Damped fixed point of the integral identity.
    method = "picard";
    const double w = opts.picard_damping;
    for (int it = 0; it < opts.max_picard && !converged; ++it) {
      d2 -= w * state.residual;
      state = evaluate(profile, *grid, lambda, d2);
      ++iterations;
      converged = state.norm <= opts.tol;
    }
  }
  if (!converged)
    throw ConvergenceFailure("laminar solve did not converge at lambda = " + fmt17(lambda) +
                             " (residual " + fmt17(state.norm) + ")");

  const PsiWindow& win = profile.window();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!win.contains(state.psi[i], kWindowSlack))
      throw DomainExit("laminar psi = " + fmt17(state.psi[i]) + " leaves the audit window at lambda = " +
                       fmt17(lambda));
    if (profile.f(y[i], state.psi[i], 1) < -kWindowSlack)
      throw AssumptionViolation("d_psi f < 0 along the laminar flow (A3 fails)");
  }

  LaminarFlow flow;
  flow.lambda = lambda;
  flow.grid = grid;
  flow.psi = state.psi;
  flow.psi[0] = lambda;
  flow.psi[n - 1] = 0.0;
  flow.d2psi = d2;
  flow.dpsi = -lambda * Eigen::VectorXd::Ones(n) + grid->green_dy() * d2;
  flow.residual_inf = state.norm;
  flow.iterations = iterations;
  flow.method = method;
  attach_series(flow);

  if (flow.psi.lpNorm<Eigen::Infinity>() > profile.apriori_bound(lambda) + opts.tol)
    throw InternalError("laminar solution violates the a priori sup bound");
  return flow;
}

LaminarSensitivity laminar_sensitivity(const StratificationProfile& profile, const LaminarFlow& flow) {
  const ChebyshevGrid& grid = *flow.grid;
  const Eigen::VectorXd& y = grid.nodes();
  const Eigen::Index n = y.size();

  // u = -y + G v with v = u''; v - q G v = -q y.
  Eigen::VectorXd q(n);
  for (Eigen::Index i = 0; i < n; ++i) q[i] = profile.f(y[i], flow.psi[i], 1);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - q.asDiagonal() * grid.green();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const Eigen::VectorXd rhs = -(q.array() * y.array()).matrix();
  const Eigen::VectorXd v = lu.solve(rhs);
  if (!v.allFinite() || (a * v - rhs).lpNorm<Eigen::Infinity>() > 1e-8 * (1.0 + rhs.lpNorm<Eigen::Infinity>()))
    throw InternalError("sensitivity system is singular");

  LaminarSensitivity s;
  s.u = -y + grid.green() * v;
  s.u[0] = 1.0;
  s.u[n - 1] = 0.0;
  s.du = -Eigen::VectorXd::Ones(n) + grid.green_dy() * v;
  s.du_surface = s.du[n - 1];
  s.du_bed = s.du[0];
  return s;
}

double find_threshold_lambda(const StratificationProfile& profile, double lo, double hi, double tol,
                             const LaminarOptions& opts) {
  if (!(tol > 0.0)) throw InvalidInput("threshold tolerance must be positive");
  if (lo > hi) std::swap(lo, hi);
  auto slope = [&](double lam) { return solve_laminar(profile, lam, opts).surface_slope(); };
  double s_lo = slope(lo);
  double s_hi = slope(hi);
  if (s_lo == 0.0) return lo;
  if (s_hi == 0.0) return hi;
  if (!(s_lo > 0.0 && s_hi < 0.0))
    throw InvalidInput("bracket [" + fmt17(lo) + ", " + fmt17(hi) +
                       "] does not straddle a sign change of psi'(0)");
  // psi'_lambda(0) is decreasing in lambda.
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double s = slope(mid);
    if (s == 0.0) return mid;
    if (s > 0.0) {
      lo = mid;
      s_lo = s;
    } else {
      hi = mid;
      s_hi = s;
    }
  }
  return std::abs(s_lo) <= std::abs(s_hi) ? lo : hi;
}

std::pair<double, double> bracket_threshold_lambda(const StratificationProfile& profile,
                                                   const LaminarOptions& opts) {
  auto slope = [&](double lam) { return solve_laminar(profile, lam, opts).surface_slope(); };
  const double s0 = slope(0.0);
  if (s0 == 0.0) return {0.0, 0.0};
  const double dir = s0 > 0.0 ? 1.0 : -1.0;
  double inner = 0.0;
  double step = 0.25;
  for (int i = 0; i < 60; ++i) {
    const double outer = inner + dir * step;
    const double s = slope(outer);
    if ((s > 0.0) != (s0 > 0.0) || s == 0.0) return dir > 0 ? std::pair{inner, outer} : std::pair{outer, inner};
    inner = outer;
    step *= 2.0;
  }
  throw ConvergenceFailure("could not bracket the threshold lambda");
}

double find_threshold_lambda(const StratificationProfile& profile, double tol, const LaminarOptions& opts) {
  const auto [lo, hi] = bracket_threshold_lambda(profile, opts);
  if (lo == hi) return lo;
  return find_threshold_lambda(profile, lo, hi, tol, opts);
}

LambdaMinus find_lambda_minus(const StratificationProfile& profile, double tol, const LaminarOptions& opts,
                              std::optional<double> floor) {
  if (!(tol > 0.0)) throw InvalidInput("lambda_minus tolerance must be positive");
  const double threshold = find_threshold_lambda(profile, tol, opts);
  const double lowest = floor.value_or(profile.window().lo);
  const double grho = profile.g() * profile.surface_density();

  struct Probe {
    bool ok;
    double min_dpsi;
    double excess;
  };
  auto probe = [&](double lam) {
    const LaminarFlow flow = solve_laminar(profile, lam, opts);
    const double mn = flow.dpsi.minCoeff();
    const double s = flow.surface_slope();
    const double excess = s * s - grho;
    return Probe{mn >= 0.0 && excess >= 0.0, mn, excess};
  };

  double bad = threshold;
  double step = 0.25;
  double good = threshold - step;
  Probe at_good{false, 0.0, 0.0};
  for (;;) {
    if (good < lowest)
      throw ConvergenceFailure("no admissible lambda found above the search floor " + fmt17(lowest));
    at_good = probe(good);
    if (at_good.ok) break;
    bad = good;
    step *= 2.0;
    good = threshold - step;
  }
  while (bad - good > tol) {
    const double mid = 0.5 * (good + bad);
    const Probe p = probe(mid);
    if (p.ok) {
      good = mid;
      at_good = p;
    } else {
      bad = mid;
    }
  }
  return LambdaMinus{threshold, good, at_good.min_dpsi, at_good.excess};
}

void write_laminar_csv(std::ostream& out, const LaminarFlow& flow) {
  out << "# lambda=" << fmt17(flow.lambda) << " residual_inf=" << fmt17(flow.residual_inf) << "\n";
  out << "y,psi,dpsi\n";
  const Eigen::VectorXd& y = flow.nodes();
  for (Eigen::Index i = 0; i < y.size(); ++i)
    out << fmt17(y[i]) << ',' << fmt17(flow.psi[i]) << ',' << fmt17(flow.dpsi[i]) << '\n';
}

} // namespace stratwave
