#pragma once

#include "stratwave/laminar.hpp"
#include "stratwave/profile.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <iosfwd>
#include <optional>
#include <vector>

namespace stratwave {

// Linearization of the problem about a laminar flow, mode m of base
// wavenumber k:
//   w'' - ((mk)^2 + f_psi(y, psi)) w = b_m,   w(-1) = w(0) = 0,
//   b_m = 2 f(y, psi) + g (1+y) rho'(-psi) - (mk)^2 (1+y) psi'.
struct ModeRecord {
  int m = 1;
  int k = 1;
  Eigen::VectorXd w;       // on the laminar grid
  Eigen::VectorXd forcing; // b_m on the laminar grid
  double dw0 = 0.0;        // w'(0)
  std::optional<double> mu;
  std::optional<double> sigma_star;
  std::optional<double> lambda_star;

  double chi() const { return double(m) * k * double(m) * k; }
};

ModeRecord solve_mode_bvp(const StratificationProfile& profile, const LaminarFlow& flow, int m, int k);

// mu_m = sigma (mk)^2 + g rho(0) - psi'(0)^2 + psi'(0) w_m'(0).
double symbol_mu(const StratificationProfile& profile, const LaminarFlow& flow, const ModeRecord& mode,
                 double sigma);
double symbol_mu(const StratificationProfile& profile, const LaminarFlow& flow, int m, int k, double sigma);

// Root of mu_m(., lambda). Throws AssumptionViolation unless positive.
double sigma_star(const StratificationProfile& profile, const LaminarFlow& flow, const ModeRecord& mode);
double sigma_star(const StratificationProfile& profile, const LaminarFlow& flow, int m, int k);

// Laminar flows on the uniform lambda grid Lambda - j h, j = 0..steps,
// h = (Lambda - floor) / steps, shared by all lambda-star searches.
struct LambdaScan {
  double threshold = 0.0;
  double floor = 0.0;
  std::vector<double> lambdas;
  std::vector<LaminarFlow> flows;
  LaminarOptions opts;
};

inline constexpr int kLambdaScanSteps = 2048;

LambdaScan make_lambda_scan(const StratificationProfile& profile, double floor, const LaminarOptions& opts = {},
                            std::optional<double> threshold = std::nullopt, int steps = kLambdaScanSteps);

struct LambdaStar {
  int m = 1;
  int k = 1;
  double lambda_star = 0.0;
  bool below_floor = false; // no sign change above the floor; lambda_star = floor
  int sign_changes = 0;     // more than one flags an ambiguous bracket
  double mu_at_root = 0.0;
  double slope = 0.0;       // d mu / d lambda at the root
};

inline constexpr double kLambdaStarTol = 1e-10;

// Lowest sign change of lambda -> mu_m(sigma, lambda) in (floor, Lambda),
// bisected to |mu| <= tol sigma (mk)^2. A nonpositive slope at the root
// throws AssumptionViolation.
LambdaStar lambda_star(const StratificationProfile& profile, const LambdaScan& scan, double sigma, int m, int k,
                       double tol = kLambdaStarTol);
LambdaStar lambda_star(const StratificationProfile& profile, double sigma, int m, int k, double search_floor,
                       double tol = kLambdaStarTol, const LaminarOptions& opts = {});

// r_m = w_m'(0) / (mk)^2 for m = 1..m_max, checked for strict increase and
// negativity, and against |r_m| <= C cosh(mk) / (mk sinh(mk)),
// C = sup_m |B_m|_inf, B_m = (f_psi w_m + b_m) / (mk)^2.
struct MonotonicityReport {
  int k = 1;
  std::vector<double> ratios;
  std::vector<double> bounds;
  double C = 0.0;
  bool degenerate = false;      // all ratios vanish
  bool increasing = true;
  bool negative = true;
  bool bound_holds = true;
  std::optional<int> offending_m; // first m breaking monotonicity or sign
  std::optional<int> bound_offending_m;

  bool ok() const { return !degenerate && increasing && negative && bound_holds; }
  nlohmann::json to_json() const;
};

MonotonicityReport verify_symbol_monotonicity(const StratificationProfile& profile, const LaminarFlow& flow, int k,
                                              int m_max);

// C = sup_m |B_m|_inf over m = 1..m_max.
double forcing_sup(const StratificationProfile& profile, const LaminarFlow& flow, int k, int m_max);

// All modes m = 1..m_max, solved concurrently. sigma_star is filled when
// positive; mu when sigma is given.
std::vector<ModeRecord> compute_modes(const StratificationProfile& profile, const LaminarFlow& flow, int k,
                                      int m_max, std::optional<double> sigma = std::nullopt, int threads = 1);

// Smallest k <= k_max for which every lambda-bar_m, m <= m_max, lies at or
// below lambda_minus.
struct KSearch {
  std::optional<int> K;
  std::vector<std::vector<LambdaStar>> per_k; // per_k[k-1][m-1]
  bool distinct = false;                      // lambda-bar_m pairwise distinct at K
};

KSearch find_bifurcation_k(const StratificationProfile& profile, const LambdaScan& scan, double sigma,
                           double lambda_minus, int m_max, int k_max, double tol = kLambdaStarTol,
                           int threads = 1);

nlohmann::json modes_to_json(const std::vector<ModeRecord>& modes);
void write_modes_csv(std::ostream& out, const std::vector<ModeRecord>& modes);
nlohmann::json lambda_star_to_json(const LambdaStar& r);

} // namespace stratwave
