#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace stratwave {

// Dense polynomial with coefficients in ascending power order.
class Polynomial {
public:
  Polynomial() : c_{0.0} {}
  explicit Polynomial(std::vector<double> coeffs);

  double operator()(double x) const;
  Polynomial derivative() const;
  // Antiderivative vanishing at 0.
  Polynomial antiderivative() const;

  const std::vector<double>& coeffs() const { return c_; }
  int degree() const { return static_cast<int>(c_.size()) - 1; }

private:
  std::vector<double> c_;
};

struct PsiWindow {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double psi, double slack = 0.0) const { return psi >= lo - slack && psi <= hi + slack; }
  double width() const { return hi - lo; }
};

// Streamline density rho(p) and Bernoulli function beta(p), p = -psi,
// both polynomial, together with gravity and the psi-window on which the
// standing assumptions are audited. Immutable.
//
// The forcing of the Long-Yih equation is
//   f(y, psi) = g y rho'(-psi) + beta(-psi).
class StratificationProfile {
public:
  StratificationProfile(std::vector<double> rho_coeffs, std::vector<double> beta_coeffs, double g,
                        PsiWindow window);

  double g() const { return g_; }
  const PsiWindow& window() const { return window_; }
  const Polynomial& rho_poly() const { return rho_[0]; }
  const Polynomial& beta_poly() const { return beta_[0]; }

  // Density and Bernoulli function as functions of the streamline label p.
  double rho(double p, int order = 0) const { return rho_.at(order)(p); }
  double beta(double p, int order = 0) const { return beta_.at(order)(p); }
  // int_0^p beta.
  double beta_integral(double p) const { return beta_int_(p); }
  double surface_density() const { return rho(0.0); }

  // d^order f / d psi^order at (y, psi), order in {0, 1, 2}.
  double f(double y, double psi, int order = 0) const;
  // 2 f + g (1 + y) rho'(-psi); its sign is the content of (A4)/(A4').
  double a4_expression(double y, double psi) const;
  // 2 f_psi - g (1 + y) rho''(-psi); (B2).
  double b2_expression(double y, double psi) const;

  // Sampled suprema of |rho'| and |beta| over the window.
  double sup_abs_drho() const { return sup_drho_; }
  double sup_abs_beta() const { return sup_beta_; }
  // |lambda| + e^2 (g sup|rho'| + sup|beta|).
  double apriori_bound(double lambda) const;

  nlohmann::json to_json() const;
  static StratificationProfile from_json(const nlohmann::json& j);
  static StratificationProfile load(const std::filesystem::path& path);

private:
  double g_;
  PsiWindow window_;
  std::vector<Polynomial> rho_;  // rho, rho', rho'', rho'''
  std::vector<Polynomial> beta_; // beta, beta', beta''
  Polynomial beta_int_;
  double sup_drho_ = 0.0;
  double sup_beta_ = 0.0;
};

StratificationProfile make_profile(std::vector<double> rho_coeffs, std::vector<double> beta_coeffs, double g,
                                   PsiWindow window);

// f(y, psi) or its first two psi-derivatives.
inline double eval_f(const StratificationProfile& profile, double y, double psi, int derivative_order = 0) {
  return profile.f(y, psi, derivative_order);
}

enum class Assumption { A1, A2, A3, A4, A4Prime, B1, B2, B3 };

struct AssumptionCheck {
  Assumption id;
  std::string name;
  std::string condition;
  bool applicable = true; // false when the audited set is empty
  bool pass = true;
  // Extreme sampled value of the audited expression in the direction of
  // violation (min for ">=" conditions, max for "<=" conditions).
  double worst = 0.0;
  // Where the worst value was attained (NaN when not applicable).
  double at_y = 0.0;
  double at_psi = 0.0;
};

struct AssumptionReport {
  int samples_per_axis = 0;
  std::vector<AssumptionCheck> checks;

  const AssumptionCheck& operator[](Assumption a) const;
  bool passes(std::initializer_list<Assumption> which) const;
  nlohmann::json to_json() const;
};

inline constexpr int kDefaultAuditSamples = 256;

// Audits (A1)-(A4), (A4'), (B1)-(B3) on a uniform tensor grid with
// samples_per_axis points per axis (>= 2).
AssumptionReport check_assumptions(const StratificationProfile& profile,
                                   int samples_per_axis = kDefaultAuditSamples);

} // namespace stratwave
