#include "stratwave/dispersion.hpp"

#include "stratwave/errors.hpp"
#include "stratwave/io.hpp"
#include "stratwave/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace stratwave {

namespace {

void check_mode(int m, int k) {
  if (m < 1) throw InvalidInput("mode index m must be >= 1");
  if (k < 1) throw InvalidInput("wavenumber k must be >= 1");
}

double grho0(const StratificationProfile& p) { return p.g() * p.surface_density(); }

// Coefficient of 1/(mk)^2 in sigma-bar_m, i.e. -(mu_m - sigma (mk)^2).
double symbol_offset(const StratificationProfile& profile, const LaminarFlow& flow, double dw0) {
  const double s = flow.surface_slope();
  return grho0(profile) - s * s + s * dw0;
}

double mu_at(const StratificationProfile& profile, const LaminarFlow& flow, int m, int k, double sigma) {
  return symbol_mu(profile, flow, m, k, sigma);
}

} // namespace

ModeRecord solve_mode_bvp(const StratificationProfile& profile, const LaminarFlow& flow, int m, int k) {
  check_mode(m, k);
  const ChebyshevGrid& grid = *flow.grid;
  const Eigen::VectorXd& y = grid.nodes();
  const Eigen::Index n = y.size();

  ModeRecord r;
  r.m = m;
  r.k = k;
  const double chi = r.chi();
  const double g = profile.g();

  Eigen::VectorXd q(n);
  r.forcing.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double psi = flow.psi[i];
    q[i] = chi + profile.f(y[i], psi, 1);
    r.forcing[i] = 2.0 * profile.f(y[i], psi) + g * (1.0 + y[i]) * profile.rho(-psi, 1) -
                   chi * (1.0 + y[i]) * flow.dpsi[i];
  }

  // w = G v with v = w''; both boundary values vanish by construction.
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - q.asDiagonal() * grid.green();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const Eigen::VectorXd v = lu.solve(r.forcing);
  const double scale = 1.0 + r.forcing.lpNorm<Eigen::Infinity>();
  if (!v.allFinite() || (a * v - r.forcing).lpNorm<Eigen::Infinity>() > 1e-8 * scale)
    throw InternalError("mode boundary value problem is singular (m = " + std::to_string(m) + ")");

  r.w = grid.green() * v;
  r.w[0] = 0.0;
  r.w[n - 1] = 0.0;
  r.dw0 = grid.green_dy().row(grid.top()).dot(v);
  return r;
}

double symbol_mu(const StratificationProfile& profile, const LaminarFlow& flow, const ModeRecord& mode,
                 double sigma) {
  if (!(sigma > 0.0)) throw InvalidInput("surface tension sigma must be positive");
  return sigma * mode.chi() + symbol_offset(profile, flow, mode.dw0);
}

double symbol_mu(const StratificationProfile& profile, const LaminarFlow& flow, int m, int k, double sigma) {
  if (!(sigma > 0.0)) throw InvalidInput("surface tension sigma must be positive");
  return symbol_mu(profile, flow, solve_mode_bvp(profile, flow, m, k), sigma);
}

double sigma_star(const StratificationProfile& profile, const LaminarFlow& flow, const ModeRecord& mode) {
  const double s = -symbol_offset(profile, flow, mode.dw0) / mode.chi();
  if (!(s > 0.0))
    throw AssumptionViolation("sigma-bar_" + std::to_string(mode.m) + " = " + fmt17(s) +
                              " is not positive (lambda above Lambda_- or assumptions fail)");
  return s;
}

double sigma_star(const StratificationProfile& profile, const LaminarFlow& flow, int m, int k) {
  return sigma_star(profile, flow, solve_mode_bvp(profile, flow, m, k));
}

LambdaScan make_lambda_scan(const StratificationProfile& profile, double floor, const LaminarOptions& opts,
                            std::optional<double> threshold, int steps) {
  if (steps < 1) throw InvalidInput("lambda scan needs at least one step");
  LambdaScan scan;
  scan.opts = opts;
  scan.threshold = threshold ? *threshold : find_threshold_lambda(profile, kDefaultLambdaTol, opts);
  scan.floor = floor;
  if (!(floor < scan.threshold))
    throw InvalidInput("search floor " + fmt17(floor) + " must lie below Lambda = " + fmt17(scan.threshold));
  const double h = (scan.threshold - floor) / steps;
  scan.lambdas.reserve(steps + 1);
  scan.flows.reserve(steps + 1);
  for (int j = 0; j <= steps; ++j) {
    const double lam = j == steps ? floor : scan.threshold - j * h;
    const Eigen::VectorXd* start = scan.flows.empty() ? nullptr : &scan.flows.back().d2psi;
    scan.flows.push_back(solve_laminar(profile, lam, opts, start));
    scan.lambdas.push_back(lam);
  }
  return scan;
}

LambdaStar lambda_star(const StratificationProfile& profile, const LambdaScan& scan, double sigma, int m, int k,
                       double tol) {
  check_mode(m, k);
  if (!(sigma > 0.0)) throw InvalidInput("surface tension sigma must be positive");
  if (!(tol > 0.0)) throw InvalidInput("lambda-star tolerance must be positive");
  const double chi = double(m) * k * double(m) * k;
  const double target = tol * sigma * chi;

  const std::size_t count = scan.flows.size();
  std::vector<double> mu(count);
  for (std::size_t j = 0; j < count; ++j) mu[j] = mu_at(profile, scan.flows[j], m, k, sigma);

  LambdaStar r;
  r.m = m;
  r.k = k;
  // Index j runs downward in lambda; the lowest bracket has the largest j.
  std::optional<std::size_t> lowest;
  for (std::size_t j = 0; j + 1 < count; ++j) {
    if (mu[j + 1] == 0.0 || mu[j] * mu[j + 1] < 0.0) {
      ++r.sign_changes;
      lowest = j;
    }
  }
  if (!lowest) {
    r.below_floor = true;
    r.lambda_star = scan.floor;
    r.mu_at_root = mu.back();
    return r;
  }

  const std::size_t j = *lowest;
  double hi = scan.lambdas[j], lo = scan.lambdas[j + 1];
  double mu_hi = mu[j], mu_lo = mu[j + 1];
  Eigen::VectorXd warm = scan.flows[j + 1].d2psi;
  double best = std::abs(mu_lo) < std::abs(mu_hi) ? lo : hi;
  double best_mu = std::abs(mu_lo) < std::abs(mu_hi) ? mu_lo : mu_hi;
  for (int it = 0; it < 200 && std::abs(best_mu) > target; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const LaminarFlow flow = solve_laminar(profile, mid, scan.opts, &warm);
    warm = flow.d2psi;
    const double v = mu_at(profile, flow, m, k, sigma);
    if (std::abs(v) < std::abs(best_mu)) {
      best = mid;
      best_mu = v;
    }
    if (v == 0.0) break;
    if ((v > 0.0) == (mu_hi > 0.0)) {
      hi = mid;
      mu_hi = v;
    } else {
      lo = mid;
      mu_lo = v;
    }
  }
  if (std::abs(best_mu) > target)
    throw ConvergenceFailure("lambda-star bisection stalled at |mu| = " + fmt17(std::abs(best_mu)));
  r.lambda_star = best;
  r.mu_at_root = best_mu;

  const double h = 1e-5;
  const double up = mu_at(profile, solve_laminar(profile, best + h, scan.opts, &warm), m, k, sigma);
  const double down = mu_at(profile, solve_laminar(profile, best - h, scan.opts, &warm), m, k, sigma);
  r.slope = (up - down) / (2.0 * h);
  if (!(r.slope > 0.0))
    throw AssumptionViolation("d mu_" + std::to_string(m) + " / d lambda = " + fmt17(r.slope) +
                              " is not positive at lambda-bar = " + fmt17(best));
  return r;
}

LambdaStar lambda_star(const StratificationProfile& profile, double sigma, int m, int k, double search_floor,
                       double tol, const LaminarOptions& opts) {
  check_mode(m, k);
  if (!(sigma > 0.0)) throw InvalidInput("surface tension sigma must be positive");
  return lambda_star(profile, make_lambda_scan(profile, search_floor, opts), sigma, m, k, tol);
}

std::vector<ModeRecord> compute_modes(const StratificationProfile& profile, const LaminarFlow& flow, int k,
                                      int m_max, std::optional<double> sigma, int threads) {
  if (m_max < 1) throw InvalidInput("m_max must be >= 1");
  check_mode(1, k);
  if (sigma && !(*sigma > 0.0)) throw InvalidInput("surface tension sigma must be positive");
  std::vector<ModeRecord> modes(m_max);
  parallel_for(static_cast<std::size_t>(m_max), threads, [&](std::size_t i) {
    ModeRecord r = solve_mode_bvp(profile, flow, static_cast<int>(i) + 1, k);
    const double s = -symbol_offset(profile, flow, r.dw0) / r.chi();
    if (s > 0.0) r.sigma_star = s;
    if (sigma) r.mu = symbol_mu(profile, flow, r, *sigma);
    modes[i] = std::move(r);
  });
  return modes;
}

double forcing_sup(const StratificationProfile& profile, const LaminarFlow& flow, int k, int m_max) {
  const Eigen::VectorXd& y = flow.nodes();
  double c = 0.0;
  for (int m = 1; m <= m_max; ++m) {
    const ModeRecord r = solve_mode_bvp(profile, flow, m, k);
    for (Eigen::Index i = 0; i < y.size(); ++i)
      c = std::max(c, std::abs(profile.f(y[i], flow.psi[i], 1) * r.w[i] + r.forcing[i]) / r.chi());
  }
  return c;
}

MonotonicityReport verify_symbol_monotonicity(const StratificationProfile& profile, const LaminarFlow& flow, int k,
                                              int m_max) {
  if (m_max < 1) throw InvalidInput("m_max must be >= 1");
  const auto modes = compute_modes(profile, flow, k, m_max);
  const Eigen::VectorXd& y = flow.nodes();

  MonotonicityReport rep;
  rep.k = k;
  for (const auto& r : modes) {
    rep.ratios.push_back(r.dw0 / r.chi());
    for (Eigen::Index i = 0; i < y.size(); ++i)
      rep.C = std::max(rep.C, std::abs(profile.f(y[i], flow.psi[i], 1) * r.w[i] + r.forcing[i]) / r.chi());
  }
  double largest = 0.0;
  for (double v : rep.ratios) largest = std::max(largest, std::abs(v));
  if (largest <= 1e-14) {
    rep.degenerate = true;
    rep.increasing = false;
    rep.negative = false;
  } else {
    for (int m = 1; m <= m_max; ++m) {
      const double r = rep.ratios[m - 1];
      if (!(r < 0.0) && rep.negative) {
        rep.negative = false;
        if (!rep.offending_m) rep.offending_m = m;
      }
      if (m > 1 && !(r > rep.ratios[m - 2]) && rep.increasing) {
        rep.increasing = false;
        if (!rep.offending_m || *rep.offending_m > m) rep.offending_m = m;
      }
    }
  }
  for (int m = 1; m <= m_max; ++m) {
    const double mk = double(m) * k;
    const double b = rep.C * std::cosh(mk) / (mk * std::sinh(mk));
    // cosh/sinh overflows past mk ~ 710; the ratio tends to 1/mk.
    rep.bounds.push_back(std::isfinite(b) ? b : rep.C / mk);
    if (std::abs(rep.ratios[m - 1]) > rep.bounds.back() * (1.0 + 1e-10) && rep.bound_holds) {
      rep.bound_holds = false;
      rep.bound_offending_m = m;
    }
  }
  return rep;
}

nlohmann::json MonotonicityReport::to_json() const {
  nlohmann::json j;
  j["k"] = k;
  j["ratios"] = ratios;
  j["bounds"] = bounds;
  j["C"] = C;
  j["degenerate"] = degenerate;
  j["increasing"] = increasing;
  j["negative"] = negative;
  j["bound_holds"] = bound_holds;
  j["offending_m"] = offending_m ? nlohmann::json(*offending_m) : nlohmann::json(nullptr);
  j["bound_offending_m"] = bound_offending_m ? nlohmann::json(*bound_offending_m) : nlohmann::json(nullptr);
  return j;
}

KSearch find_bifurcation_k(const StratificationProfile& profile, const LambdaScan& scan, double sigma,
                           double lambda_minus, int m_max, int k_max, double tol, int threads) {
  if (m_max < 1 || k_max < 1) throw InvalidInput("m_max and k_max must be >= 1");
  KSearch out;
  for (int k = 1; k <= k_max; ++k) {
    std::vector<LambdaStar> row(m_max);
    parallel_for(static_cast<std::size_t>(m_max), threads, [&](std::size_t i) {
      row[i] = lambda_star(profile, scan, sigma, static_cast<int>(i) + 1, k, tol);
    });
    const bool all_below =
        std::all_of(row.begin(), row.end(), [&](const LambdaStar& r) { return r.lambda_star <= lambda_minus; });
    out.per_k.push_back(row);
    if (all_below) {
      out.K = k;
      std::vector<double> v;
      for (const auto& r : row) v.push_back(r.lambda_star);
      std::sort(v.begin(), v.end());
      out.distinct = std::adjacent_find(v.begin(), v.end(), [](double a, double b) {
                       return std::abs(a - b) <= 1e-8 * (1.0 + std::abs(a));
                     }) == v.end();
      break;
    }
  }
  return out;
}

namespace {
nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }
std::string opt_csv(const std::optional<double>& v) { return v ? fmt17(*v) : std::string(); }
} // namespace

nlohmann::json modes_to_json(const std::vector<ModeRecord>& modes) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : modes)
    arr.push_back({{"m", r.m},
                   {"k", r.k},
                   {"dw0", r.dw0},
                   {"mu", opt_json(r.mu)},
                   {"sigma_star", opt_json(r.sigma_star)},
                   {"lambda_star", opt_json(r.lambda_star)}});
  return arr;
}

void write_modes_csv(std::ostream& out, const std::vector<ModeRecord>& modes) {
  out << "m,k,dw0,mu,sigma_star,lambda_star\n";
  for (const auto& r : modes)
    out << r.m << ',' << r.k << ',' << fmt17(r.dw0) << ',' << opt_csv(r.mu) << ',' << opt_csv(r.sigma_star) << ','
        << opt_csv(r.lambda_star) << '\n';
}

nlohmann::json lambda_star_to_json(const LambdaStar& r) {
  return {{"m", r.m},
          {"k", r.k},
          {"lambda_star", r.lambda_star},
          {"below_floor", r.below_floor},
          {"sign_changes", r.sign_changes},
          {"multiple_roots", r.sign_changes > 1},
          {"mu_at_root", r.mu_at_root},
          {"slope", r.slope}};
}

} // namespace stratwave
