#pragma once

#include <Eigen/Dense>

namespace stratwave {

// Collocation grid for even, 2*pi/k-periodic functions. A full period holds
// nx equispaced nodes; by evenness only the half period x_i = i*pi/(k*P),
// i = 0..P with P = nx/2, is stored. Values there are expanded as
// v(x) = sum_{j=0..P} c_j cos(j k x).
class CosineGrid {
public:
  CosineGrid(int k, int nx);

  int wavenumber() const { return k_; }
  int full_size() const { return nx_; }
  int half() const { return p_; }
  int size() const { return p_ + 1; }
  const Eigen::VectorXd& nodes() const { return x_; }
  double period() const;

  // Full-period node index -> stored half-period index.
  int fold(int i_full) const;
  double full_node(int i_full) const;

  const Eigen::MatrixXd& to_coeffs() const { return coeff_; }
  const Eigen::MatrixXd& from_coeffs() const { return synth_; }

  // Even values -> d/dx (odd) and d^2/dx^2 (even) at the stored nodes.
  const Eigen::MatrixXd& dx() const { return dx_; }
  const Eigen::MatrixXd& dxx() const { return dxx_; }

  // Trapezoid weights for the normalized period average (sum to 1).
  const Eigen::VectorXd& mean_weights() const { return mean_w_; }
  double mean(const Eigen::VectorXd& values) const { return mean_w_.dot(values); }

  // Cosine coefficients a_1..a_P of even nodal values (a_0 dropped).
  Eigen::VectorXd project(const Eigen::VectorXd& values) const;

private:
  int k_, nx_, p_;
  Eigen::VectorXd x_;
  Eigen::MatrixXd coeff_, synth_, dx_, dxx_;
  Eigen::VectorXd mean_w_;
};

} // namespace stratwave
