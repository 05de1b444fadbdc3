#pragma once

#include "stratwave/chebyshev.hpp"
#include "stratwave/profile.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

namespace stratwave {

struct LaminarOptions {
  int n_nodes = 64;
  double tol = 1e-12;    // sup-norm of psi'' - f(y, psi) at the nodes
  int max_newton = 50;
  int max_picard = 500;
  double picard_damping = 0.5;
  bool use_newton = true; // false forces the Picard route
};

// x-independent solution psi_lambda(y) of psi'' = f(y, psi) on [-1, 0]
// with psi(0) = 0 and psi(-1) = lambda.
//
// psi is represented through its second derivative at the Lobatto nodes:
//   psi(y) = -lambda y - (y + 1) H(0) + H(y),   H = int int psi'',
// which is the double-quadrature identity for laminar flows. Both boundary
// values are therefore exact.
struct LaminarFlow {
  double lambda = 0.0;
  std::shared_ptr<const ChebyshevGrid> grid;
  Eigen::VectorXd psi;
  Eigen::VectorXd dpsi;
  Eigen::VectorXd d2psi;
  double residual_inf = 0.0;
  int iterations = 0;
  std::string method;

  const Eigen::VectorXd& nodes() const { return grid->nodes(); }
  int size() const { return grid->size(); }
  double surface_slope() const { return dpsi[grid->top()]; }

  // Evaluation off the grid through the spectral representation.
  double psi_at(double y) const { return psi_series(y); }
  double dpsi_at(double y) const { return dpsi_series(y); }
  double d2psi_at(double y) const { return d2psi_series(y); }

  ChebSeries psi_series, dpsi_series, d2psi_series;
};

LaminarFlow solve_laminar(const StratificationProfile& profile, double lambda, const LaminarOptions& opts = {},
                          const Eigen::VectorXd* initial_d2psi = nullptr);

// u = d psi_lambda / d lambda: u'' = f_psi(y, psi_lambda) u, u(0) = 0, u(-1) = 1.
struct LaminarSensitivity {
  Eigen::VectorXd u;
  Eigen::VectorXd du;
  double du_surface = 0.0; // u'(0)
  double du_bed = 0.0;     // u'(-1)
};

LaminarSensitivity laminar_sensitivity(const StratificationProfile& profile, const LaminarFlow& flow);

inline constexpr double kDefaultLambdaTol = 1e-10;

// Lambda at which the laminar surface slope psi'_lambda(0) changes sign.
// Requires psi'_lo(0) > 0 > psi'_hi(0).
double find_threshold_lambda(const StratificationProfile& profile, double lo, double hi,
                             double tol = kDefaultLambdaTol, const LaminarOptions& opts = {});

// Expands outward from lambda = 0 until the surface slope changes sign.
std::pair<double, double> bracket_threshold_lambda(const StratificationProfile& profile,
                                                   const LaminarOptions& opts = {});

double find_threshold_lambda(const StratificationProfile& profile, double tol = kDefaultLambdaTol,
                             const LaminarOptions& opts = {});

struct LambdaMinus {
  double threshold = 0.0;    // Lambda
  double lambda_minus = 0.0; // largest admissible lambda found
  double min_dpsi = 0.0;     // min_y psi' at lambda_minus
  double surface_excess = 0.0; // psi'(0)^2 - g rho(0) at lambda_minus
};

// Largest lambda <= Lambda (to tol) with psi' >= 0 on the grid and
// g rho(0) <= psi'(0)^2. Smaller lambda also qualify. The search stops at
// `floor` (default: bottom of the psi window).
LambdaMinus find_lambda_minus(const StratificationProfile& profile, double tol = kDefaultLambdaTol,
                              const LaminarOptions& opts = {}, std::optional<double> floor = std::nullopt);

void write_laminar_csv(std::ostream& out, const LaminarFlow& flow);

} // namespace stratwave
