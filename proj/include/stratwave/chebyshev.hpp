#pragma once

#include <Eigen/Dense>

#include <memory>
#include <vector>

namespace stratwave {

// Chebyshev series on the interval [-1, 0], p(y) = sum_k c_k T_k(2y + 1).
class ChebSeries {
public:
  ChebSeries() = default;
  explicit ChebSeries(Eigen::VectorXd coeffs) : coeffs_(std::move(coeffs)) {}

  const Eigen::VectorXd& coeffs() const { return coeffs_; }
  double operator()(double y) const;

  ChebSeries derivative() const;
  // Antiderivative vanishing at y = -1.
  ChebSeries integral() const;

private:
  Eigen::VectorXd coeffs_;
};

// Chebyshev-Lobatto grid on [-1, 0] with nodes in ascending order
// (node 0 is the bed y = -1, node n-1 is the surface y = 0) and the
// spectral operators acting on nodal values.
class ChebyshevGrid {
public:
  explicit ChebyshevGrid(int n);

  int size() const { return n_; }
  const Eigen::VectorXd& nodes() const { return y_; }
  int top() const { return n_ - 1; }

  // Nodal values -> Chebyshev coefficients of the interpolant.
  const Eigen::MatrixXd& to_coeffs() const { return coeff_; }
  ChebSeries interpolant(const Eigen::VectorXd& values) const;

  // Collocation differentiation matrices (d/dy, d^2/dy^2).
  const Eigen::MatrixXd& d1() const { return d1_; }
  const Eigen::MatrixXd& d2() const { return d2_; }

  // (J1 v)(y) = int_{-1}^{y} v,  (J2 v)(y) = int_{-1}^{y} int_{-1}^{t} v.
  const Eigen::MatrixXd& j1() const { return j1_; }
  const Eigen::MatrixXd& j2() const { return j2_; }

  // Green operator of d^2/dy^2 with homogeneous Dirichlet data at both ends:
  // u = G v solves u'' = v, u(-1) = u(0) = 0, and u' = Gp v.
  const Eigen::MatrixXd& green() const { return green_; }
  const Eigen::MatrixXd& green_dy() const { return green_dy_; }

  // Clenshaw-Curtis weights for int_{-1}^{0}.
  const Eigen::VectorXd& quadrature_weights() const { return weights_; }

private:
  int n_;
  Eigen::VectorXd y_;
  Eigen::MatrixXd coeff_;
  Eigen::MatrixXd d1_, d2_;
  Eigen::MatrixXd j1_, j2_;
  Eigen::MatrixXd green_, green_dy_;
  Eigen::VectorXd weights_;
};

// Shared, immutable grids keyed by node count. Thread-safe.
std::shared_ptr<const ChebyshevGrid> chebyshev_grid(int n);

} // namespace stratwave
