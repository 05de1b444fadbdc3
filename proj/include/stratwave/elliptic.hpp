#pragma once

#include "stratwave/chebyshev.hpp"
#include "stratwave/cosine_grid.hpp"
#include "stratwave/profile.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace stratwave {

// eta(x) = sum_{m=1..N} a_m cos(m k x). Mean zero and even by construction.
struct SurfaceShape {
  int k = 1;
  std::vector<double> coeffs; // a_1..a_N

  static SurfaceShape flat(int k) { return SurfaceShape{k, {}}; }
  static SurfaceShape mode(int k, int m, double amplitude);

  double eta(double x) const;
  double deta(double x) const;
  double d2eta(double x) const;
};

// Tensor grid on the flattened strip: cosine half-grid in x (nx nodes per
// period), Chebyshev-Lobatto in y (ny nodes). Fields are stored as
// ny x (nx/2 + 1) matrices, rows indexed by y.
class FlatGrid {
public:
  FlatGrid(int k, int nx, int ny);

  const CosineGrid& x() const { return x_; }
  const ChebyshevGrid& y() const { return *y_; }
  std::shared_ptr<const ChebyshevGrid> y_ptr() const { return y_; }
  int k() const { return x_.wavenumber(); }
  int nx() const { return x_.full_size(); }
  int ny() const { return y_->size(); }
  int cols() const { return x_.size(); }
  Eigen::Index unknowns() const { return Eigen::Index(ny()) * cols(); }

private:
  CosineGrid x_;
  std::shared_ptr<const ChebyshevGrid> y_;
};

inline constexpr double kNearDegenerateEta = 0.95;

// eta and its derivatives at the x-nodes. Throws DomainExit if |eta| >= 1
// somewhere, InvalidInput if the shape is not representable on the grid.
struct ShapeSamples {
  Eigen::VectorXd eta, deta, d2eta;
  double sup_abs = 0.0;
  bool near_degenerate() const { return sup_abs >= kNearDegenerateEta; }
};

ShapeSamples sample_shape(const SurfaceShape& shape, const FlatGrid& grid);

// Coefficients of the flattened Laplacian
//   A0 = a11 d11 + a12 d12 + a22 d22 + a2 d2
// on the tensor grid.
struct A0Coefficients {
  Eigen::MatrixXd a11, a12, a22, a2;
};

A0Coefficients assemble_A0(const SurfaceShape& shape, const FlatGrid& grid);

struct EllipticOptions {
  double tol = 1e-11; // sup-norm of A0 psi - f((1+y) eta + y, psi)
  int max_iter = 30;
  bool factor_at_solution = false; // refactor the Jacobian at the returned iterate
};

// psi = -lambda y + G V per column, V = d22 psi. Both Dirichlet conditions
// hold exactly.
struct FlattenedField {
  std::shared_ptr<const FlatGrid> grid;
  SurfaceShape shape;
  double lambda = 0.0;
  Eigen::MatrixXd V;     // d22 psi
  Eigen::MatrixXd psi;
  Eigen::MatrixXd psi_y;
  double residual_inf = 0.0;
  int iterations = 0;
  std::vector<std::string> warnings;
  // LU of the Jacobian with respect to vec(V) (column-major).
  std::shared_ptr<const Eigen::PartialPivLU<Eigen::MatrixXd>> jacobian;
};

// Interior residual A0 psi - f for a given V (no solve).
struct InnerState {
  Eigen::MatrixXd psi, psi_y, residual;
};

InnerState inner_residual(const StratificationProfile& profile, double lambda, const ShapeSamples& s,
                          const A0Coefficients& a, const FlatGrid& grid, const Eigen::MatrixXd& V);

FlattenedField solve_semilinear(const StratificationProfile& profile, double lambda, const SurfaceShape& shape,
                                std::shared_ptr<const FlatGrid> grid, const EllipticOptions& opts = {},
                                const Eigen::MatrixXd* initial_V = nullptr);

// Surface trace B = |grad psi|^2 / 2 in physical variables, at the x-nodes.
Eigen::VectorXd boundary_trace_B(const ShapeSamples& s, const FlatGrid& grid, const Eigen::MatrixXd& psi,
                                 const Eigen::MatrixXd& psi_y);
Eigen::VectorXd boundary_trace_B(const FlattenedField& field);

// Curvature eta'' / (1 + eta'^2)^{3/2} at the x-nodes.
Eigen::VectorXd curvature(const ShapeSamples& s);

struct PsiEvaluation {
  Eigen::VectorXd Psi; // mean-zero residual at the x-nodes
  Eigen::VectorXd B;
  double Q = 0.0;      // mean of B
  FlattenedField field;
};

// raw = B - sigma kappa + g rho(0) eta;  Psi = raw - mean(raw).
Eigen::VectorXd surface_residual(const StratificationProfile& profile, double sigma, const ShapeSamples& s,
                                 const FlatGrid& grid, const Eigen::VectorXd& B);

PsiEvaluation evaluate_Psi(const StratificationProfile& profile, double sigma, double lambda,
                           const SurfaceShape& shape, std::shared_ptr<const FlatGrid> grid,
                           const EllipticOptions& opts = {}, const Eigen::MatrixXd* initial_V = nullptr);

// (x, y, psi) over one full period; (x, Psi) over one full period.
void write_field_csv(std::ostream& out, const FlattenedField& field);
void write_residual_csv(std::ostream& out, const FlatGrid& grid, const Eigen::VectorXd& Psi);

} // namespace stratwave
