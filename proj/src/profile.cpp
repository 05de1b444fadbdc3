#include "stratwave/profile.hpp"

#include "stratwave/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

namespace stratwave {

Polynomial::Polynomial(std::vector<double> coeffs) : c_(std::move(coeffs)) {
  if (c_.empty()) c_.push_back(0.0);
  for (double v : c_)
    if (!std::isfinite(v)) throw InvalidInput("polynomial coefficients must be finite");
}

double Polynomial::operator()(double x) const {
  double acc = 0.0;
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * x + *it;
  return acc;
}

Polynomial Polynomial::derivative() const {
  if (c_.size() <= 1) return Polynomial({0.0});
  std::vector<double> d(c_.size() - 1);
  for (std::size_t i = 1; i < c_.size(); ++i) d[i - 1] = static_cast<double>(i) * c_[i];
  return Polynomial(std::move(d));
}

Polynomial Polynomial::antiderivative() const {
  std::vector<double> a(c_.size() + 1, 0.0);
  for (std::size_t i = 0; i < c_.size(); ++i) a[i + 1] = c_[i] / static_cast<double>(i + 1);
  return Polynomial(std::move(a));
}

namespace {

constexpr int kSupSamples = 4096;

template <class F>
double sampled_sup(const PsiWindow& w, F&& fn) {
  double best = 0.0;
  for (int i = 0; i <= kSupSamples; ++i) {
    const double psi = w.lo + (w.hi - w.lo) * i / kSupSamples;
    best = std::max(best, std::abs(fn(psi)));
  }
  return best;
}

} // namespace

StratificationProfile::StratificationProfile(std::vector<double> rho_coeffs, std::vector<double> beta_coeffs,
                                             double g, PsiWindow window)
    : g_(g), window_(window) {
  if (!(g > 0.0) || !std::isfinite(g)) throw InvalidInput("gravity g must be positive");
  if (!std::isfinite(window.lo) || !std::isfinite(window.hi) || window.lo > window.hi)
    throw InvalidInput("psi window is empty");

  rho_.emplace_back(std::move(rho_coeffs));
  for (int i = 0; i < 3; ++i) rho_.push_back(rho_.back().derivative());
  beta_.emplace_back(std::move(beta_coeffs));
  for (int i = 0; i < 2; ++i) beta_.push_back(beta_.back().derivative());
  beta_int_ = beta_[0].antiderivative();

  // (A1) is a type invariant: the density must be positive wherever psi may live.
  for (int i = 0; i <= kSupSamples; ++i) {
    const double psi = window.lo + (window.hi - window.lo) * i / kSupSamples;
    if (!(rho(-psi) > 0.0))
      throw InvalidInput("streamline density must be positive on the psi window (A1)");
  }

  sup_drho_ = sampled_sup(window_, [&](double psi) { return rho(-psi, 1); });
  sup_beta_ = sampled_sup(window_, [&](double psi) { return beta(-psi); });
}

double StratificationProfile::f(double y, double psi, int order) const {
  const double p = -psi;
  switch (order) {
  case 0:
    return g_ * y * rho(p, 1) + beta(p);
  case 1:
    return -g_ * y * rho(p, 2) - beta(p, 1);
  case 2:
    return g_ * y * rho(p, 3) + beta(p, 2);
  default:
    throw InvalidInput("derivative order of f must be 0, 1 or 2");
  }
}

double StratificationProfile::a4_expression(double y, double psi) const {
  return 2.0 * f(y, psi) + g_ * (1.0 + y) * rho(-psi, 1);
}

double StratificationProfile::b2_expression(double y, double psi) const {
  return 2.0 * f(y, psi, 1) - g_ * (1.0 + y) * rho(-psi, 2);
}

double StratificationProfile::apriori_bound(double lambda) const {
  const double e2 = std::exp(2.0);
  return std::abs(lambda) + e2 * (g_ * sup_drho_ + sup_beta_);
}

nlohmann::json StratificationProfile::to_json() const {
  return {{"rho", rho_[0].coeffs()},
          {"beta", beta_[0].coeffs()},
          {"g", g_},
          {"psi_window", {window_.lo, window_.hi}}};
}

StratificationProfile StratificationProfile::from_json(const nlohmann::json& j) {
  try {
    for (const auto& [key, _] : j.items())
      if (key != "rho" && key != "beta" && key != "g" && key != "psi_window")
        throw InvalidInput("unknown profile key '" + key + "'");
    const auto w = j.at("psi_window").get<std::vector<double>>();
    if (w.size() != 2) throw InvalidInput("psi_window must be [lo, hi]");
    return StratificationProfile(j.at("rho").get<std::vector<double>>(), j.at("beta").get<std::vector<double>>(),
                                 j.at("g").get<double>(), PsiWindow{w[0], w[1]});
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed profile: ") + e.what());
  }
}

StratificationProfile StratificationProfile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open profile file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("profile file " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

StratificationProfile make_profile(std::vector<double> rho_coeffs, std::vector<double> beta_coeffs, double g,
                                   PsiWindow window) {
  return StratificationProfile(std::move(rho_coeffs), std::move(beta_coeffs), g, window);
}

// ---------------------------------------------------------------------------
// Assumption audit

namespace {

enum class Sense { AtLeast, AtMost };

struct Audit {
  Sense sense;
  double bound;
  bool any = false;
  double worst = 0.0;
  double wy = std::numeric_limits<double>::quiet_NaN();
  double wpsi = std::numeric_limits<double>::quiet_NaN();

  void add(double value, double y, double psi) {
    const bool worse = !any || (sense == Sense::AtLeast ? value < worst : value > worst);
    if (worse) {
      worst = value;
      wy = y;
      wpsi = psi;
    }
    any = true;
  }

  AssumptionCheck finish(Assumption id, std::string name, std::string condition) const {
    AssumptionCheck c{id, std::move(name), std::move(condition)};
    c.applicable = any;
    c.worst = any ? worst : 0.0;
    c.at_y = wy;
    c.at_psi = wpsi;
    c.pass = !any || (sense == Sense::AtLeast ? worst >= bound : worst <= bound);
    return c;
  }
};

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = (n == 1) ? a : a + (b - a) * i / (n - 1);
  v.back() = b;
  return v;
}

} // namespace

const AssumptionCheck& AssumptionReport::operator[](Assumption a) const {
  for (const auto& c : checks)
    if (c.id == a) return c;
  throw InternalError("assumption missing from report");
}

bool AssumptionReport::passes(std::initializer_list<Assumption> which) const {
  return std::all_of(which.begin(), which.end(), [&](Assumption a) { return (*this)[a].pass; });
}

nlohmann::json AssumptionReport::to_json() const {
  nlohmann::json out;
  out["samples_per_axis"] = samples_per_axis;
  auto arr = nlohmann::json::array();
  for (const auto& c : checks) {
    nlohmann::json e{{"name", c.name},
                     {"condition", c.condition},
                     {"applicable", c.applicable},
                     {"pass", c.pass},
                     {"worst", c.worst}};
    e["at_y"] = std::isfinite(c.at_y) ? nlohmann::json(c.at_y) : nlohmann::json(nullptr);
    e["at_psi"] = std::isfinite(c.at_psi) ? nlohmann::json(c.at_psi) : nlohmann::json(nullptr);
    arr.push_back(std::move(e));
  }
  out["checks"] = std::move(arr);
  return out;
}

AssumptionReport check_assumptions(const StratificationProfile& profile, int samples_per_axis) {
  if (samples_per_axis < 2) throw InvalidInput("assumption audit needs at least 2 samples per axis");
  const int n = samples_per_axis;
  const PsiWindow& w = profile.window();

  const auto psi_all = linspace(w.lo, w.hi, n);
  const auto y_full = linspace(-1.0, 1.0, n);
  const auto y_fluid = linspace(-1.0, 0.0, n);
  std::vector<double> psi_neg, psi_pos;
  if (w.lo <= 0.0) psi_neg = linspace(w.lo, std::min(w.hi, 0.0), n);
  if (w.hi >= 0.0) psi_pos = linspace(std::max(w.lo, 0.0), w.hi, n);

  Audit a1{Sense::AtLeast, 0.0}, a3{Sense::AtLeast, 0.0};
  Audit a4{Sense::AtMost, 0.0}, a4p{Sense::AtLeast, 0.0};
  Audit b1{Sense::AtLeast, 0.0}, b2{Sense::AtLeast, 0.0}, b3{Sense::AtMost, 2.0};

  for (double psi : psi_all) {
    a1.add(profile.rho(-psi), std::numeric_limits<double>::quiet_NaN(), psi);
    for (double y : y_full) a3.add(profile.f(y, psi, 1), y, psi);
  }
  for (double psi : psi_neg)
    for (double y : y_fluid) {
      a4.add(profile.a4_expression(y, psi), y, psi);
      b1.add(profile.f(y, psi, 2), y, psi);
      b2.add(profile.b2_expression(y, psi), y, psi);
    }
  for (double psi : psi_pos)
    for (double y : y_fluid) a4p.add(profile.a4_expression(y, psi), y, psi);
  for (double y : y_fluid) b3.add(profile.f(y, 0.0, 1), y, 0.0);

  // (A1) is strict.
  AssumptionCheck c1 = a1.finish(Assumption::A1, "A1", "rho(-psi) > 0 on window");
  c1.pass = a1.worst > 0.0;

  AssumptionCheck c2{Assumption::A2, "A2", "rho in C^{4-}, beta in C^{3-}, beta and rho' in BC^2"};
  c2.at_y = c2.at_psi = std::numeric_limits<double>::quiet_NaN();

  AssumptionReport r;
  r.samples_per_axis = n;
  r.checks = {c1,
              c2,
              a3.finish(Assumption::A3, "A3", "d_psi f >= 0 on [-1,1] x window"),
              a4.finish(Assumption::A4, "A4", "2f + g(1+y)rho'(-psi) <= 0 on [-1,0] x (window, psi<=0)"),
              a4p.finish(Assumption::A4Prime, "A4'", "2f + g(1+y)rho'(-psi) >= 0 on [-1,0] x (window, psi>=0)"),
              b1.finish(Assumption::B1, "B1", "d_psi^2 f >= 0 on [-1,0] x (window, psi<=0)"),
              b2.finish(Assumption::B2, "B2", "2 d_psi f - g(1+y)rho''(-psi) >= 0 on [-1,0] x (window, psi<=0)"),
              b3.finish(Assumption::B3, "B3", "d_psi f(y,0) <= 2 for y in [-1,0]")};
  return r;
}

} // namespace stratwave
