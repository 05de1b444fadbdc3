#include "stratwave/elliptic.hpp"

#include "stratwave/errors.hpp"
#include "stratwave/io.hpp"
#include "stratwave/laminar.hpp"

#include <cmath>
#include <ostream>

namespace stratwave {

namespace {

constexpr double kWindowSlack = 1e-12;

Eigen::MatrixXd jacobian(const StratificationProfile& profile, const ShapeSamples& s, const A0Coefficients& a,
                         const FlatGrid& grid, const InnerState& st) {
  const ChebyshevGrid& cy = grid.y();
  const Eigen::MatrixXd& G = cy.green();
  const Eigen::MatrixXd& Gp = cy.green_dy();
  const Eigen::MatrixXd& dx = grid.x().dx();
  const Eigen::MatrixXd& dxx = grid.x().dxx();
  const Eigen::VectorXd& y = cy.nodes();
  const int ny = grid.ny(), nc = grid.cols();

  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(grid.unknowns(), grid.unknowns());
  for (int i = 0; i < nc; ++i) {
    Eigen::VectorXd q(ny);
    for (int j = 0; j < ny; ++j) q[j] = profile.f((1.0 + y[j]) * s.eta[i] + y[j], st.psi(j, i), 1);
    for (int ip = 0; ip < nc; ++ip) {
      auto block = J.block(Eigen::Index(i) * ny, Eigen::Index(ip) * ny, ny, ny);
      if (dxx(i, ip) != 0.0) block += (a.a11.col(i) * dxx(i, ip)).asDiagonal() * G;
      if (dx(i, ip) != 0.0) block += (a.a12.col(i) * dx(i, ip)).asDiagonal() * Gp;
      if (i == ip) {
        block += a.a2.col(i).asDiagonal() * Gp;
        block -= q.asDiagonal() * G;
        block.diagonal() += a.a22.col(i);
      }
    }
  }
  return J;
}

Eigen::VectorXd as_vector(const Eigen::MatrixXd& m) { return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()); }

} // namespace

SurfaceShape SurfaceShape::mode(int k, int m, double amplitude) {
  if (m < 1) throw InvalidInput("mode index must be >= 1");
  SurfaceShape s{k, std::vector<double>(m, 0.0)};
  s.coeffs[m - 1] = amplitude;
  return s;
}

double SurfaceShape::eta(double x) const {
  double v = 0.0;
  for (std::size_t m = 1; m <= coeffs.size(); ++m) v += coeffs[m - 1] * std::cos(double(m) * k * x);
  return v;
}

double SurfaceShape::deta(double x) const {
  double v = 0.0;
  for (std::size_t m = 1; m <= coeffs.size(); ++m) {
    const double w = double(m) * k;
    v -= coeffs[m - 1] * w * std::sin(w * x);
  }
  return v;
}

double SurfaceShape::d2eta(double x) const {
  double v = 0.0;
  for (std::size_t m = 1; m <= coeffs.size(); ++m) {
    const double w = double(m) * k;
    v -= coeffs[m - 1] * w * w * std::cos(w * x);
  }
  return v;
}

FlatGrid::FlatGrid(int k, int nx, int ny) : x_(k, nx) {
  if (ny < 8) throw InvalidInput("ny must be >= 8");
  y_ = chebyshev_grid(ny);
}

ShapeSamples sample_shape(const SurfaceShape& shape, const FlatGrid& grid) {
  if (shape.k != grid.k()) throw InvalidInput("shape and grid wavenumbers differ");
  if (static_cast<int>(shape.coeffs.size()) > grid.x().half())
    throw InvalidInput("shape has more cosine modes than the grid resolves");
  for (double c : shape.coeffs)
    if (!std::isfinite(c)) throw InvalidInput("shape coefficients must be finite");
  const Eigen::VectorXd& x = grid.x().nodes();
  ShapeSamples s;
  s.eta.resize(x.size());
  s.deta.resize(x.size());
  s.d2eta.resize(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    s.eta[i] = shape.eta(x[i]);
    s.deta[i] = shape.deta(x[i]);
    s.d2eta[i] = shape.d2eta(x[i]);
  }
  s.sup_abs = s.eta.lpNorm<Eigen::Infinity>();
  if (!(s.sup_abs < 1.0)) throw DomainExit("surface leaves the admissible set: sup|eta| = " + fmt17(s.sup_abs));
  return s;
}

A0Coefficients assemble_A0(const SurfaceShape& shape, const FlatGrid& grid) {
  const ShapeSamples s = sample_shape(shape, grid);
  const Eigen::VectorXd& y = grid.y().nodes();
  const int ny = grid.ny(), nc = grid.cols();
  A0Coefficients a;
  a.a11 = Eigen::MatrixXd::Ones(ny, nc);
  a.a12.resize(ny, nc);
  a.a22.resize(ny, nc);
  a.a2.resize(ny, nc);
  for (int i = 0; i < nc; ++i) {
    const double e = s.eta[i], e1 = s.deta[i], e2 = s.d2eta[i];
    const double h = 1.0 + e;
    for (int j = 0; j < ny; ++j) {
      const double z = 1.0 + y[j];
      a.a12(j, i) = -2.0 * z * e1 / h;
      a.a22(j, i) = (1.0 + z * z * e1 * e1) / (h * h);
      a.a2(j, i) = -z * (h * e2 - 2.0 * e1 * e1) / (h * h);
    }
  }
  return a;
}

InnerState inner_residual(const StratificationProfile& profile, double lambda, const ShapeSamples& s,
                          const A0Coefficients& a, const FlatGrid& grid, const Eigen::MatrixXd& V) {
  const ChebyshevGrid& cy = grid.y();
  const Eigen::VectorXd& y = cy.nodes();
  const int ny = grid.ny(), nc = grid.cols();
  InnerState st;
  st.psi = cy.green() * V;
  st.psi.colwise() -= lambda * y;
  st.psi_y = cy.green_dy() * V;
  st.psi_y.array() -= lambda;
  // Differentiate deviations from the first column: the operators annihilate
  // constants only up to roundoff proportional to the constant.
  const Eigen::MatrixXd dev = st.psi.colwise() - st.psi.col(0);
  const Eigen::MatrixXd dev_y = st.psi_y.colwise() - st.psi_y.col(0);
  const Eigen::MatrixXd psi_xx = dev * grid.x().dxx().transpose();
  const Eigen::MatrixXd psi_xy = dev_y * grid.x().dx().transpose();
  st.residual.resize(ny, nc);
  for (int i = 0; i < nc; ++i)
    for (int j = 0; j < ny; ++j)
      st.residual(j, i) = a.a11(j, i) * psi_xx(j, i) + a.a12(j, i) * psi_xy(j, i) + a.a22(j, i) * V(j, i) +
                          a.a2(j, i) * st.psi_y(j, i) - profile.f((1.0 + y[j]) * s.eta[i] + y[j], st.psi(j, i));
  return st;
}

FlattenedField solve_semilinear(const StratificationProfile& profile, double lambda, const SurfaceShape& shape,
                                std::shared_ptr<const FlatGrid> grid_ptr, const EllipticOptions& opts,
                                const Eigen::MatrixXd* initial_V) {
  if (!grid_ptr) throw InvalidInput("missing grid");
  if (!(opts.tol > 0.0)) throw InvalidInput("elliptic tolerance must be positive");
  if (opts.max_iter < 1) throw InvalidInput("max_iter must be >= 1");
  if (!std::isfinite(lambda)) throw InvalidInput("lambda must be finite");
  const FlatGrid& grid = *grid_ptr;
  const ShapeSamples s = sample_shape(shape, grid);
  const A0Coefficients a = assemble_A0(shape, grid);
  const int ny = grid.ny(), nc = grid.cols();

  FlattenedField field;
  field.grid = grid_ptr;
  field.shape = shape;
  field.lambda = lambda;
  if (s.near_degenerate())
    field.warnings.push_back("sup|eta| = " + fmt17(s.sup_abs) + " is close to 1; the flattening degenerates");

  Eigen::MatrixXd V(ny, nc);
  if (initial_V) {
    if (initial_V->rows() != ny || initial_V->cols() != nc) throw InvalidInput("initial field has the wrong shape");
    V = *initial_V;
  } else {
    LaminarOptions lo;
    lo.n_nodes = ny;
    const LaminarFlow flow = solve_laminar(profile, lambda, lo);
    V = flow.d2psi.replicate(1, nc);
  }

  InnerState st = inner_residual(profile, lambda, s, a, grid, V);
  double norm = st.residual.lpNorm<Eigen::Infinity>();
  std::shared_ptr<Eigen::PartialPivLU<Eigen::MatrixXd>> lu;
  int it = 0, stalls = 0;
  double best = norm;
  while (!(norm <= opts.tol)) {
    if (it >= opts.max_iter || !std::isfinite(norm))
      throw ConvergenceFailure("semilinear Newton did not converge (residual " + fmt17(norm) + ")");
    lu = std::make_shared<Eigen::PartialPivLU<Eigen::MatrixXd>>(jacobian(profile, s, a, grid, st));
    const Eigen::VectorXd step = lu->solve(as_vector(st.residual));
    V -= Eigen::Map<const Eigen::MatrixXd>(step.data(), ny, nc);
    st = inner_residual(profile, lambda, s, a, grid, V);
    norm = st.residual.lpNorm<Eigen::Infinity>();
    ++it;
    if (norm < 0.5 * best) {
      best = norm;
      stalls = 0;
    } else if (++stalls >= 3) {
      throw ConvergenceFailure("semilinear Newton stalled at residual " + fmt17(norm));
    }
  }
  if (opts.factor_at_solution || !lu)
    lu = std::make_shared<Eigen::PartialPivLU<Eigen::MatrixXd>>(jacobian(profile, s, a, grid, st));

  const PsiWindow& win = profile.window();
  for (Eigen::Index i = 0; i < st.psi.size(); ++i)
    if (!win.contains(st.psi.data()[i], kWindowSlack))
      throw DomainExit("psi = " + fmt17(st.psi.data()[i]) + " leaves the audit window");

  st.psi.row(0).setConstant(lambda);
  st.psi.row(ny - 1).setZero();
  field.V = std::move(V);
  field.psi = std::move(st.psi);
  field.psi_y = std::move(st.psi_y);
  field.residual_inf = norm;
  field.iterations = it;
  field.jacobian = lu;
  return field;
}

Eigen::VectorXd boundary_trace_B(const ShapeSamples& s, const FlatGrid& grid, const Eigen::MatrixXd& psi,
                                 const Eigen::MatrixXd& psi_y) {
  const int top = grid.ny() - 1;
  const Eigen::VectorXd p1 = grid.x().dx() * (psi.row(top).transpose().array() - psi(top, 0)).matrix();
  const Eigen::VectorXd p2 = psi_y.row(top).transpose();
  Eigen::VectorXd B(grid.cols());
  for (int i = 0; i < grid.cols(); ++i) {
    const double h = 1.0 + s.eta[i], e1 = s.deta[i];
    B[i] = 0.5 * (p1[i] * p1[i] - 2.0 * e1 / h * p1[i] * p2[i] + (1.0 + e1 * e1) / (h * h) * p2[i] * p2[i]);
  }
  return B;
}

Eigen::VectorXd boundary_trace_B(const FlattenedField& field) {
  return boundary_trace_B(sample_shape(field.shape, *field.grid), *field.grid, field.psi, field.psi_y);
}

Eigen::VectorXd curvature(const ShapeSamples& s) {
  return (s.d2eta.array() / (1.0 + s.deta.array().square()).pow(1.5)).matrix();
}

Eigen::VectorXd surface_residual(const StratificationProfile& profile, double sigma, const ShapeSamples& s,
                                 const FlatGrid& grid, const Eigen::VectorXd& B) {
  Eigen::VectorXd raw = B - sigma * curvature(s) + profile.g() * profile.surface_density() * s.eta;
  raw.array() -= grid.x().mean(raw);
  return raw;
}

PsiEvaluation evaluate_Psi(const StratificationProfile& profile, double sigma, double lambda,
                           const SurfaceShape& shape, std::shared_ptr<const FlatGrid> grid,
                           const EllipticOptions& opts, const Eigen::MatrixXd* initial_V) {
  if (!(sigma > 0.0)) throw InvalidInput("surface tension sigma must be positive");
  PsiEvaluation out;
  out.field = solve_semilinear(profile, lambda, shape, grid, opts, initial_V);
  const ShapeSamples s = sample_shape(shape, *grid);
  out.B = boundary_trace_B(s, *grid, out.field.psi, out.field.psi_y);
  out.Q = grid->x().mean(out.B);
  out.Psi = surface_residual(profile, sigma, s, *grid, out.B);
  return out;
}

void write_field_csv(std::ostream& out, const FlattenedField& field) {
  const FlatGrid& g = *field.grid;
  const Eigen::VectorXd& y = g.y().nodes();
  out << "x,y,psi\n";
  for (int i = 0; i < g.nx(); ++i) {
    const int c = g.x().fold(i);
    for (int j = 0; j < g.ny(); ++j)
      out << fmt17(g.x().full_node(i)) << ',' << fmt17(y[j]) << ',' << fmt17(field.psi(j, c)) << '\n';
  }
}

void write_residual_csv(std::ostream& out, const FlatGrid& grid, const Eigen::VectorXd& Psi) {
  out << "x,Psi\n";
  for (int i = 0; i < grid.nx(); ++i)
    out << fmt17(grid.x().full_node(i)) << ',' << fmt17(Psi[grid.x().fold(i)]) << '\n';
}

} // namespace stratwave
