#include "stratwave/chebyshev.hpp"

#include "stratwave/errors.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace stratwave {

namespace {

// Clenshaw recurrence for sum_k c_k T_k(t).
double clenshaw(const Eigen::VectorXd& c, double t) {
  double b1 = 0.0, b2 = 0.0;
  for (Eigen::Index k = c.size() - 1; k >= 1; --k) {
    const double b0 = 2.0 * t * b1 - b2 + c[k];
    b2 = b1;
    b1 = b0;
  }
  return c.size() == 0 ? 0.0 : t * b1 - b2 + c[0];
}

// Values of T_k at the ascending grid nodes, k = 0..ncols-1.
Eigen::MatrixXd node_evaluation(int n, Eigen::Index ncols) {
  const int N = n - 1;
  Eigen::MatrixXd e(n, ncols);
  for (int i = 0; i < n; ++i) {
    const double theta = std::numbers::pi * static_cast<double>(N - i) / N;
    for (Eigen::Index k = 0; k < ncols; ++k) e(i, k) = std::cos(static_cast<double>(k) * theta);
  }
  return e;
}

} // namespace

double ChebSeries::operator()(double y) const { return clenshaw(coeffs_, 2.0 * y + 1.0); }

ChebSeries ChebSeries::derivative() const {
  const Eigen::Index n = coeffs_.size();
  if (n <= 1) return ChebSeries(Eigen::VectorXd::Zero(1));
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n - 1);
  // d_{k-1} = d_{k+1} + 2 k c_k, then halve d_0; factor 2 from dt/dy.
  for (Eigen::Index k = n - 1; k >= 1; --k) {
    const double next = (k + 1 <= n - 2) ? d[k + 1] : 0.0;
    d[k - 1] = next + 2.0 * static_cast<double>(k) * coeffs_[k];
  }
  d[0] *= 0.5;
  return ChebSeries(2.0 * d);
}

ChebSeries ChebSeries::integral() const {
  const Eigen::Index n = coeffs_.size();
  auto c = [&](Eigen::Index k) { return k < n ? coeffs_[k] : 0.0; };
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
  if (n >= 1) b[1] = c(0) - 0.5 * c(2);
  for (Eigen::Index k = 2; k <= n; ++k) b[k] = (c(k - 1) - c(k + 1)) / (2.0 * static_cast<double>(k));
  b *= 0.5; // dy = dt / 2
  double at_bed = 0.0;
  for (Eigen::Index k = 1; k <= n; ++k) at_bed += (k % 2 == 0 ? 1.0 : -1.0) * b[k];
  b[0] = -at_bed;
  return ChebSeries(std::move(b));
}

ChebyshevGrid::ChebyshevGrid(int n) : n_(n) {
  if (n < 3) throw InvalidInput("Chebyshev grid needs at least 3 nodes");
  const int N = n - 1;
  const double pi = std::numbers::pi;

  y_.resize(n);
  for (int i = 0; i < n; ++i) y_[i] = 0.5 * (std::cos(pi * static_cast<double>(N - i) / N) - 1.0);
  y_[0] = -1.0;
  y_[N] = 0.0;

  // DCT-I: coefficients from values at t_j = cos(pi j / N), j = N - i.
  coeff_.resize(n, n);
  for (int k = 0; k <= N; ++k) {
    const double gk = (k == 0 || k == N) ? 2.0 : 1.0;
    for (int i = 0; i <= N; ++i) {
      const int j = N - i;
      const double wj = (j == 0 || j == N) ? 0.5 : 1.0;
      coeff_(k, i) = 2.0 / N / gk * wj * std::cos(pi * static_cast<double>(j) * k / N);
    }
  }

  // Trefethen's differentiation matrix on descending t-nodes, reordered
  // ascending and scaled by dt/dy = 2; diagonal via negative row sums.
  Eigen::VectorXd t(n), cw(n);
  for (int j = 0; j <= N; ++j) {
    t[j] = std::cos(pi * j / N);
    cw[j] = ((j == 0 || j == N) ? 2.0 : 1.0) * (j % 2 == 0 ? 1.0 : -1.0);
  }
  Eigen::MatrixXd dt = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i <= N; ++i) {
    double row = 0.0;
    for (int j = 0; j <= N; ++j) {
      if (i == j) continue;
      dt(i, j) = cw[i] / cw[j] / (t[i] - t[j]);
      row += dt(i, j);
    }
    dt(i, i) = -row;
  }
  d1_.resize(n, n);
  for (int i = 0; i <= N; ++i)
    for (int j = 0; j <= N; ++j) d1_(i, j) = 2.0 * dt(N - i, N - j);
  d2_ = d1_ * d1_;

  // Integration operators built column by column in coefficient space.
  const Eigen::MatrixXd eval1 = node_evaluation(n, n + 1);
  const Eigen::MatrixXd eval2 = node_evaluation(n, n + 2);
  j1_.resize(n, n);
  j2_.resize(n, n);
  for (int col = 0; col < n; ++col) {
    const ChebSeries s(coeff_.col(col));
    const ChebSeries once = s.integral();
    const ChebSeries twice = once.integral();
    j1_.col(col) = eval1 * once.coeffs();
    j2_.col(col) = eval2 * twice.coeffs();
  }

  green_ = j2_ - (y_.array() + 1.0).matrix() * j2_.row(N);
  green_.row(N).setZero();
  green_.row(0).setZero();
  green_dy_ = j1_ - Eigen::VectorXd::Ones(n) * j2_.row(N);
  weights_ = j1_.row(N).transpose();
}

ChebSeries ChebyshevGrid::interpolant(const Eigen::VectorXd& values) const {
  return ChebSeries(coeff_ * values);
}

std::shared_ptr<const ChebyshevGrid> chebyshev_grid(int n) {
  static std::mutex mutex;
  static std::map<int, std::shared_ptr<const ChebyshevGrid>> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  auto grid = std::make_shared<const ChebyshevGrid>(n);
  cache.emplace(n, grid);
  return grid;
}

} // namespace stratwave
