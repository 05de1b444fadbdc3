#pragma once

#include "stratwave/elliptic.hpp"
#include "stratwave/laminar.hpp"
#include "stratwave/profile.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace stratwave {

enum class BranchParameter { Sigma, Lambda };

std::string to_string(BranchParameter p);

struct BranchOptions {
  double s_max = 0.05;
  int n_steps = 25;
  double tol = 1e-9;       // sup-norm of Psi at accepted points
  int nx = 64;
  int ny = 48;
  double inner_tol = 1e-12;
  int max_newton = 12;
  int max_halvings = 5;
  double fd_step = 1e-6;   // central differences in the tangent-linear Jacobian
  double kernel_tol = 1e-8; // |mu_j| / (sigma (jk)^2) below this counts as a kernel element
  double min_rcond = 1e-13; // smaller augmented-Jacobian rcond truncates the branch
  std::optional<double> lambda_floor; // lambda-bar search floor (default: window bottom)
};

struct BranchPoint {
  double s = 0.0;
  double parameter = 0.0;
  SurfaceShape shape;
  FlattenedField field;
  double residual_inf = 0.0; // sup |Psi|
  int newton_iterations = 0;
};

struct BranchCurve {
  int m = 1;
  int k = 1;
  BranchParameter parameter = BranchParameter::Sigma;
  double fixed_value = 0.0; // lambda for sigma-branches, sigma for lambda-branches
  double root = 0.0;        // sigma-bar_m or lambda-bar_m
  std::vector<BranchPoint> points;
  bool truncated = false;
  std::string truncation_reason;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const; // array of {s, parameter, eta_coeffs, residual}
};

// Throws AssumptionViolation if sigma-bar_m <= 0 or some mu_j, j != m,
// vanishes at the root (kernel not simple).
BranchCurve branch_from_sigma(const StratificationProfile& profile, double lambda, int m, int k,
                              const BranchOptions& opts = {});

// Throws AssumptionViolation if the slope check at lambda-bar_m fails or the
// kernel is not simple; InvalidInput if lambda-bar_m lies below the floor.
BranchCurve branch_from_lambda(const StratificationProfile& profile, double sigma, int m, int k,
                               const BranchOptions& opts = {});

// Continues an initialized curve (points[0] is the trivial point) through
// the given amplitudes in increasing order.
void continue_branch(const StratificationProfile& profile, BranchCurve& curve, const std::vector<double>& s_values,
                     const BranchOptions& opts);

struct PhysicalSolution {
  Eigen::VectorXd x;      // full period, nx nodes
  Eigen::VectorXd y;      // flattened vertical nodes
  Eigen::MatrixXd Y;      // physical heights (1+y) eta + y, ny x nx
  Eigen::MatrixXd psi;
  Eigen::MatrixXd u_rel;  // u - c
  Eigen::MatrixXd v;
  Eigen::MatrixXd pressure; // P - P0
  Eigen::MatrixXd speed;    // |grad psi|
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> stagnation;
  int stagnation_count = 0;
  double Q = 0.0;
};

inline constexpr double kStagnationTol = 1e-6;

PhysicalSolution reconstruct_physical(const StratificationProfile& profile, const FlattenedField& field,
                                      double stagnation_tol = kStagnationTol);

void write_physical_csv(std::ostream& out, const PhysicalSolution& sol);

struct ValidationReport {
  double interior_residual = 0.0; // Delta psi - f through D1/D2 and the x-operators
  double top_bc = 0.0;
  double bottom_bc = 0.0;
  double bernoulli_residual = 0.0; // sup |B - sigma kappa + g rho(0) eta - Q|
  double Q = 0.0;
  double volume = 0.0;            // |mean eta|
  double eta_symmetry = 0.0;
  double psi_symmetry = 0.0;

  double max_residual() const;
  nlohmann::json to_json() const;
};

ValidationReport validate_solution(const StratificationProfile& profile, double sigma, double lambda,
                                   const FlattenedField& field);

} // namespace stratwave
