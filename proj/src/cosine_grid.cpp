#include "stratwave/cosine_grid.hpp"

#include "stratwave/errors.hpp"

#include <cmath>
#include <numbers>

namespace stratwave {

CosineGrid::CosineGrid(int k, int nx) : k_(k), nx_(nx), p_(nx / 2) {
  if (k < 1) throw InvalidInput("wavenumber k must be >= 1");
  if (nx < 4 || nx % 2 != 0) throw InvalidInput("nx must be even and >= 4");
  const double pi = std::numbers::pi;
  const int P = p_;

  x_.resize(P + 1);
  for (int i = 0; i <= P; ++i) x_[i] = pi * i / (static_cast<double>(k) * P);

  coeff_.resize(P + 1, P + 1);
  synth_.resize(P + 1, P + 1);
  for (int j = 0; j <= P; ++j) {
    const double gj = (j == 0 || j == P) ? 2.0 : 1.0;
    for (int i = 0; i <= P; ++i) {
      const double wi = (i == 0 || i == P) ? 0.5 : 1.0;
      const double c = std::cos(pi * static_cast<double>(i) * j / P);
      coeff_(j, i) = 2.0 / P / gj * wi * c;
      synth_(i, j) = c;
    }
  }

  Eigen::MatrixXd sin_synth(P + 1, P + 1);
  Eigen::VectorXd jk(P + 1);
  for (int j = 0; j <= P; ++j) {
    jk[j] = static_cast<double>(j) * k;
    for (int i = 0; i <= P; ++i) sin_synth(i, j) = (j == P || i == 0 || i == P) ? 0.0 : std::sin(pi * static_cast<double>(i) * j / P);
  }
  dx_ = sin_synth * (-jk).asDiagonal() * coeff_;
  dxx_ = synth_ * (-jk.array().square()).matrix().asDiagonal() * coeff_;

  mean_w_ = Eigen::VectorXd::Constant(P + 1, 1.0 / P);
  mean_w_[0] = mean_w_[P] = 0.5 / P;
}

double CosineGrid::period() const { return 2.0 * std::numbers::pi / k_; }

int CosineGrid::fold(int i_full) const {
  const int i = ((i_full % nx_) + nx_) % nx_;
  return i <= p_ ? i : nx_ - i;
}

double CosineGrid::full_node(int i_full) const { return period() * i_full / nx_; }

Eigen::VectorXd CosineGrid::project(const Eigen::VectorXd& values) const {
  return (coeff_ * values).tail(p_);
}

} // namespace stratwave
