#include "stratwave/cli.hpp"

#include "stratwave/continuation.hpp"
#include "stratwave/dispersion.hpp"
#include "stratwave/elliptic.hpp"
#include "stratwave/errors.hpp"
#include "stratwave/io.hpp"
#include "stratwave/laminar.hpp"
#include "stratwave/parallel.hpp"
#include "stratwave/profile.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace stratwave {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class KeyType { Double, Int, String, Bool, DoubleList };

struct KeySpec {
  const char* key;
  KeyType type;
  const char* help;
};

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs{
      {"profile", KeyType::String, "profile JSON file"},
      {"lambda", KeyType::Double, "mass flux (value of psi at the bed)"},
      {"sigma", KeyType::Double, "coefficient of surface tension"},
      {"lambda-floor", KeyType::Double, "lower end of lambda searches (default: psi-window bottom)"},
      {"m", KeyType::Int, "mode index"},
      {"k", KeyType::Int, "base wavenumber"},
      {"m-max", KeyType::Int, "number of modes"},
      {"k-max", KeyType::Int, "largest wavenumber tried when searching for K"},
      {"n-nodes", KeyType::Int, "Chebyshev nodes of laminar and mode solves"},
      {"nx", KeyType::Int, "x-nodes per period (even)"},
      {"ny", KeyType::Int, "Chebyshev nodes of the flattened strip"},
      {"sample-density", KeyType::Int, "audit samples per axis"},
      {"tol", KeyType::Double, "laminar residual tolerance"},
      {"lambda-tol", KeyType::Double, "tolerance of lambda root searches"},
      {"branch-tol", KeyType::Double, "sup |Psi| at accepted branch points"},
      {"inner-tol", KeyType::Double, "semilinear solve residual tolerance"},
      {"s-max", KeyType::Double, "largest branch amplitude"},
      {"steps", KeyType::Int, "branch steps"},
      {"mode", KeyType::String, "branch parameter: sigma or lambda"},
      {"eta", KeyType::DoubleList, "surface cosine coefficients a_1,a_2,... (validate)"},
      {"branch", KeyType::String, "branch.json to validate"},
      {"lambda-star", KeyType::Bool, "also locate lambda-bar_m (symbols)"},
      {"output", KeyType::String, "output directory"},
      {"force", KeyType::Bool, "run even if prerequisites fail"},
  };
  return specs;
}

std::string normalize_key(std::string k) {
  std::replace(k.begin(), k.end(), '_', '-');
  return k;
}

double as_double(const json& v, const std::string& key) {
  if (!v.is_number()) throw InvalidInput("'" + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw InvalidInput("'" + key + "' must be finite");
  return d;
}

std::optional<double> as_optional_double(const json& v, const std::string& key) {
  if (v.is_null()) return std::nullopt;
  return as_double(v, key);
}

int as_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw InvalidInput("'" + key + "' must be an integer");
  return v.get<int>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw InvalidInput("'" + key + "' must be a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw InvalidInput("'" + key + "' must be true or false");
  return v.get<bool>();
}

std::string resolve(const std::string& p, const fs::path& base) {
  if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
  return (base / p).string();
}

// String flag value -> JSON of the key's type.
json parse_flag(const KeySpec& spec, const std::string& raw) {
  const std::string key = spec.key;
  auto number = [&](const std::string& s) {
    std::size_t pos = 0;
    double d = 0.0;
    try {
      d = std::stod(s, &pos);
    } catch (const std::exception&) {
      throw InvalidInput("--" + key + " expects a number, got '" + s + "'");
    }
    if (pos != s.size()) throw InvalidInput("--" + key + " expects a number, got '" + s + "'");
    return d;
  };
  switch (spec.type) {
  case KeyType::Double:
    return number(raw);
  case KeyType::Int: {
    std::size_t pos = 0;
    long v = 0;
    try {
      v = std::stol(raw, &pos);
    } catch (const std::exception&) {
      throw InvalidInput("--" + key + " expects an integer, got '" + raw + "'");
    }
    if (pos != raw.size()) throw InvalidInput("--" + key + " expects an integer, got '" + raw + "'");
    return v;
  }
  case KeyType::String:
    return raw;
  case KeyType::Bool:
    return true;
  case KeyType::DoubleList: {
    json arr = json::array();
    std::stringstream ss(raw);
    for (std::string item; std::getline(ss, item, ',');)
      if (!item.empty()) arr.push_back(number(item));
    return arr;
  }
  }
  return nullptr;
}

struct Prerequisites {
  std::vector<std::string> violated;
  void require(bool ok, const std::string& what) {
    if (!ok) violated.push_back(what);
  }
};

class Runner {
public:
  Runner(const RunConfig& cfg, std::ostream& log) : cfg_(cfg), log_(log) {}

  int run() {
    cfg_.validate();
    profile_ = std::make_unique<StratificationProfile>(
        cfg_.profile.is_null() ? StratificationProfile::load(cfg_.profile_path)
                               : StratificationProfile::from_json(cfg_.profile));
    out_ = cfg_.output;
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec) throw IoError("cannot create output directory " + out_.string() + ": " + ec.message());

    audit_ = check_assumptions(*profile_, cfg_.sample_density);
    json audit = audit_.to_json();
    audit["profile"] = profile_->to_json();
    write(out_ / "audit.json", audit);

    lopts_.n_nodes = cfg_.n_nodes;
    lopts_.tol = cfg_.tol;

    const std::string& c = cfg_.command;
    int status = kExitOk;
    if (c == "laminar") status = laminar();
    else if (c == "thresholds") status = thresholds();
    else if (c == "symbols") status = symbols();
    else if (c == "bifurcate-sigma") status = bifurcate_sigma();
    else if (c == "bifurcate-lambda") status = bifurcate_lambda();
    else if (c == "branch") status = branch();
    else if (c == "validate") status = validate();
    if (status != kExitOk) return status;

    json manifest{{"command", c}, {"config", cfg_.to_json()}, {"outputs", outputs_}};
    manifest["prerequisites-violated"] = forced_;
    manifest["violations"] = violations_;
    if (!extra_.is_null()) manifest.update(extra_);
    write(out_ / "manifest.json", manifest);
    return kExitOk;
  }

private:
  bool pass(Assumption a) const { return audit_[a].pass; }

  // Returns kExitOk to proceed, kExitAssumption to refuse.
  int gate(const Prerequisites& p) {
    if (p.violated.empty()) return kExitOk;
    for (const auto& v : p.violated) log_ << "prerequisite failed: " << v << "\n";
    if (!cfg_.force) {
      log_ << "refusing to run '" << cfg_.command << "' (use --force to override)\n";
      return kExitAssumption;
    }
    forced_ = true;
    violations_.insert(violations_.end(), p.violated.begin(), p.violated.end());
    return kExitOk;
  }

  void flag(json& j) const {
    j["prerequisites-violated"] = forced_;
    if (forced_) j["violations"] = violations_;
  }

  void write(const fs::path& p, const json& j) {
    write_json_file(p, j);
    outputs_.push_back(p.filename().string());
  }

  void write_text(const fs::path& p, const std::string& s) {
    write_text_file(p, s);
    outputs_.push_back(p.filename().string());
  }

  // lambda <= Lambda_-; the threshold data are kept for the outputs.
  bool below_lambda_minus(double lambda) {
    try {
      lm_ = find_lambda_minus(*profile_, cfg_.lambda_tol, lopts_, cfg_.lambda_floor);
    } catch (const ConvergenceFailure& e) {
      log_ << "Lambda_- not found: " << e.what() << "\n";
      return false;
    }
    return lambda <= lm_->lambda_minus;
  }

  double floor() const { return cfg_.lambda_floor.value_or(profile_->window().lo); }

  int laminar() {
    Prerequisites p;
    p.require(pass(Assumption::A3), "A3");
    if (int s = gate(p)) return s;
    const LaminarFlow flow = solve_laminar(*profile_, *cfg_.lambda, lopts_);
    std::ostringstream os;
    if (forced_) os << "# prerequisites-violated\n";
    write_laminar_csv(os, flow);
    write_text(out_ / "laminar.csv", os.str());
    log_ << "laminar: lambda = " << fmt17(flow.lambda) << ", psi'(0) = " << fmt17(flow.surface_slope())
         << ", residual = " << fmt17(flow.residual_inf) << " (" << flow.method << ")\n";
    return kExitOk;
  }

  int thresholds() {
    Prerequisites p;
    p.require(pass(Assumption::A3), "A3");
    if (int s = gate(p)) return s;
    const LambdaMinus lm = find_lambda_minus(*profile_, cfg_.lambda_tol, lopts_, cfg_.lambda_floor);
    json j{{"Lambda", lm.threshold},
           {"lambda_minus", lm.lambda_minus},
           {"min_dpsi", lm.min_dpsi},
           {"surface_excess", lm.surface_excess},
           {"floor", floor()}};
    flag(j);
    write(out_ / "thresholds.json", j);
    log_ << "thresholds: Lambda = " << fmt17(lm.threshold) << ", Lambda_- = " << fmt17(lm.lambda_minus) << "\n";
    return kExitOk;
  }

  int symbols() {
    const double lambda = *cfg_.lambda;
    Prerequisites p;
    p.require(pass(Assumption::A3), "A3");
    p.require(pass(Assumption::A4), "A4");
    p.require(below_lambda_minus(lambda), "lambda <= Lambda_-");
    if (cfg_.lambda_star)
      for (auto a : {Assumption::B1, Assumption::B2, Assumption::B3})
        p.require(pass(a), audit_[a].name);
    if (int s = gate(p)) return s;

    const LaminarFlow flow = solve_laminar(*profile_, lambda, lopts_);
    const int threads = worker_threads();
    auto modes = compute_modes(*profile_, flow, cfg_.k, cfg_.m_max, cfg_.sigma, threads);
    if (cfg_.lambda_star) {
      const LambdaScan scan = make_lambda_scan(*profile_, floor(), lopts_);
      std::vector<LambdaStar> ls(modes.size());
      parallel_for(modes.size(), threads, [&](std::size_t i) {
        ls[i] = lambda_star(*profile_, scan, *cfg_.sigma, modes[i].m, cfg_.k, cfg_.lambda_tol);
      });
      for (std::size_t i = 0; i < modes.size(); ++i)
        if (!ls[i].below_floor) modes[i].lambda_star = ls[i].lambda_star;
    }
    write(out_ / "symbols.json", modes_to_json(modes));
    std::ostringstream os;
    write_modes_csv(os, modes);
    write_text(out_ / "symbols.csv", os.str());
    json mono = verify_symbol_monotonicity(*profile_, flow, cfg_.k, cfg_.m_max).to_json();
    flag(mono);
    write(out_ / "monotonicity.json", mono);
    log_ << "symbols: " << modes.size() << " modes at lambda = " << fmt17(lambda) << "\n";
    return kExitOk;
  }

  int bifurcate_sigma() {
    const double lambda = *cfg_.lambda;
    Prerequisites p;
    p.require(pass(Assumption::A3), "A3");
    p.require(pass(Assumption::A4), "A4");
    p.require(below_lambda_minus(lambda), "lambda <= Lambda_-");
    if (int s = gate(p)) return s;

    const LaminarFlow flow = solve_laminar(*profile_, lambda, lopts_);
    const auto modes = compute_modes(*profile_, flow, cfg_.k, 3 * cfg_.m_max, std::nullopt, worker_threads());
    json arr = json::array();
    for (int m = 1; m <= cfg_.m_max; ++m) {
      const ModeRecord& r = modes[m - 1];
      json e{{"m", m}, {"k", cfg_.k}, {"dw0", r.dw0}, {"ratio", r.dw0 / r.chi()}};
      e["sigma_star"] = r.sigma_star ? json(*r.sigma_star) : json(nullptr);
      bool simple = r.sigma_star.has_value();
      if (simple)
        for (int j = 1; j <= 3 * m; ++j) {
          if (j == m) continue;
          const double mu = symbol_mu(*profile_, flow, modes[j - 1], *r.sigma_star);
          if (std::abs(mu) <= 1e-8 * *r.sigma_star * modes[j - 1].chi()) simple = false;
        }
      e["simple"] = simple;
      arr.push_back(e);
    }
    json j{{"parameter", "sigma"}, {"lambda", lambda}, {"modes", arr}};
    if (lm_) {
      j["Lambda"] = lm_->threshold;
      j["lambda_minus"] = lm_->lambda_minus;
    }
    j["monotonicity"] = verify_symbol_monotonicity(*profile_, flow, cfg_.k, cfg_.m_max).to_json();
    flag(j);
    write(out_ / "bifurcation.json", j);
    log_ << "bifurcate-sigma: " << cfg_.m_max << " values of sigma-bar_m written\n";
    return kExitOk;
  }

  int bifurcate_lambda() {
    const double sigma = *cfg_.sigma;
    Prerequisites p;
    p.require(pass(Assumption::A3), "A3");
    for (auto a : {Assumption::B1, Assumption::B2, Assumption::B3}) p.require(pass(a), audit_[a].name);
    if (int s = gate(p)) return s;

    const LambdaMinus lm = find_lambda_minus(*profile_, cfg_.lambda_tol, lopts_, cfg_.lambda_floor);
    const LambdaScan scan = make_lambda_scan(*profile_, floor(), lopts_, lm.threshold);
    const int threads = worker_threads();
    const KSearch ks =
        find_bifurcation_k(*profile_, scan, sigma, lm.lambda_minus, cfg_.m_max, cfg_.k_max, cfg_.lambda_tol, threads);
    std::vector<LambdaStar> row;
    if (cfg_.k <= static_cast<int>(ks.per_k.size())) {
      row = ks.per_k[cfg_.k - 1];
    } else {
      row.resize(cfg_.m_max);
      parallel_for(row.size(), threads, [&](std::size_t i) {
        row[i] = lambda_star(*profile_, scan, sigma, static_cast<int>(i) + 1, cfg_.k, cfg_.lambda_tol);
      });
    }
    json arr = json::array();
    for (const auto& r : row) arr.push_back(lambda_star_to_json(r));
    json j{{"parameter", "lambda"},   {"sigma", sigma},       {"k", cfg_.k},
           {"Lambda", lm.threshold},  {"lambda_minus", lm.lambda_minus}, {"floor", floor()},
           {"lambda_stars", arr},     {"K", ks.K ? json(*ks.K) : json(nullptr)},
           {"K_searched_up_to", cfg_.k_max}, {"distinct_at_K", ks.distinct}};
    flag(j);
    write(out_ / "bifurcation.json", j);
    log_ << "bifurcate-lambda: K = " << (ks.K ? std::to_string(*ks.K) : std::string("not found")) << "\n";
    return kExitOk;
  }

  BranchOptions branch_options() const {
    BranchOptions o;
    o.s_max = cfg_.s_max;
    o.n_steps = cfg_.steps;
    o.tol = cfg_.branch_tol;
    o.inner_tol = cfg_.inner_tol;
    o.nx = cfg_.nx;
    o.ny = cfg_.ny;
    o.lambda_floor = cfg_.lambda_floor;
    return o;
  }

  int branch() {
    const bool by_sigma = cfg_.mode == "sigma";
    Prerequisites p;
    p.require(pass(Assumption::A3), "A3");
    p.require(pass(Assumption::A4), "A4");
    if (by_sigma) {
      p.require(below_lambda_minus(*cfg_.lambda), "lambda <= Lambda_-");
    } else {
      for (auto a : {Assumption::B1, Assumption::B2, Assumption::B3}) p.require(pass(a), audit_[a].name);
      if (p.violated.empty()) {
        LaminarOptions lo = lopts_;
        lo.n_nodes = cfg_.ny;
        const LambdaMinus lm = find_lambda_minus(*profile_, cfg_.lambda_tol, lo, cfg_.lambda_floor);
        const LambdaScan scan = make_lambda_scan(*profile_, floor(), lo, lm.threshold);
        const KSearch ks = find_bifurcation_k(*profile_, scan, *cfg_.sigma, lm.lambda_minus, std::max(2 * cfg_.m, 5),
                                              cfg_.k, cfg_.lambda_tol, worker_threads());
        p.require(ks.K.has_value(), "k >= K");
      }
    }
    if (int s = gate(p)) return s;

    const BranchOptions o = branch_options();
    const BranchCurve c = by_sigma ? branch_from_sigma(*profile_, *cfg_.lambda, cfg_.m, cfg_.k, o)
                                   : branch_from_lambda(*profile_, *cfg_.sigma, cfg_.m, cfg_.k, o);
    write(out_ / "branch.json", c.to_json());
    json reports = json::array();
    for (const auto& pt : c.points) {
      const double sigma = by_sigma ? pt.parameter : c.fixed_value;
      const double lambda = by_sigma ? c.fixed_value : pt.parameter;
      json r = validate_solution(*profile_, sigma, lambda, pt.field).to_json();
      r["s"] = pt.s;
      reports.push_back(r);
      std::ostringstream os;
      write_physical_csv(os, reconstruct_physical(*profile_, pt.field));
      char name[64];
      std::snprintf(name, sizeof name, "field_%.10g.csv", pt.s);
      write_text(out_ / name, os.str());
    }
    write(out_ / "validation.json", reports);
    extra_ = {{"branch",
               {{"mode", cfg_.mode},
                {"m", c.m},
                {"k", c.k},
                {"root", c.root},
                {"fixed_value", c.fixed_value},
                {"points", c.points.size()},
                {"truncated", c.truncated},
                {"truncation_reason", c.truncation_reason},
                {"warnings", c.warnings}}}};
    log_ << "branch: " << c.points.size() << " points from " << to_string(c.parameter) << "-bar = " << fmt17(c.root)
         << (c.truncated ? " (truncated: " + c.truncation_reason + ")" : std::string()) << "\n";
    return kExitOk;
  }

  int validate() {
    Prerequisites p;
    p.require(pass(Assumption::A3), "A3");
    if (int s = gate(p)) return s;
    auto grid = std::make_shared<FlatGrid>(cfg_.k, cfg_.nx, cfg_.ny);
    EllipticOptions eo;
    eo.tol = cfg_.inner_tol;

    struct Case {
      double s, sigma, lambda;
      SurfaceShape shape;
    };
    std::vector<Case> cases;
    if (cfg_.branch_path.empty()) {
      cases.push_back({0.0, *cfg_.sigma, *cfg_.lambda, SurfaceShape{cfg_.k, cfg_.eta}});
    } else {
      std::ifstream in(cfg_.branch_path);
      if (!in) throw IoError("cannot open branch file " + cfg_.branch_path);
      json b;
      try {
        in >> b;
        for (const auto& pt : b) {
          const double param = pt.at("parameter").get<double>();
          const bool by_sigma = cfg_.mode == "sigma";
          cases.push_back({pt.at("s").get<double>(), by_sigma ? param : *cfg_.sigma, by_sigma ? *cfg_.lambda : param,
                           SurfaceShape{cfg_.k, pt.at("eta_coeffs").get<std::vector<double>>()}});
        }
      } catch (const json::exception& e) {
        throw InvalidInput(std::string("malformed branch file: ") + e.what());
      }
    }
    json reports = json::array();
    for (const auto& c : cases) {
      const FlattenedField field = solve_semilinear(*profile_, c.lambda, c.shape, grid, eo);
      json r = validate_solution(*profile_, c.sigma, c.lambda, field).to_json();
      r["s"] = c.s;
      r["sigma"] = c.sigma;
      r["lambda"] = c.lambda;
      reports.push_back(r);
    }
    write(out_ / "validation.json", reports);
    log_ << "validate: " << cases.size() << " solution(s) checked\n";
    return kExitOk;
  }

  const RunConfig& cfg_;
  std::ostream& log_;
  std::unique_ptr<StratificationProfile> profile_;
  AssumptionReport audit_;
  LaminarOptions lopts_;
  fs::path out_;
  std::optional<LambdaMinus> lm_;
  bool forced_ = false;
  std::vector<std::string> violations_;
  std::vector<std::string> outputs_;
  json extra_;
};

} // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw InvalidInput("configuration must be a JSON object");
  RunConfig c;
  for (const auto& [raw_key, v] : j.items()) {
    const std::string key = normalize_key(raw_key);
    if (key == "command") c.command = as_string(v, key);
    else if (key == "profile") {
      if (v.is_object()) c.profile = v;
      else c.profile_path = resolve(as_string(v, key), base_dir);
    } else if (key == "lambda") c.lambda = as_optional_double(v, key);
    else if (key == "sigma") c.sigma = as_optional_double(v, key);
    else if (key == "lambda-floor") c.lambda_floor = as_optional_double(v, key);
    else if (key == "m") c.m = as_int(v, key);
    else if (key == "k") c.k = as_int(v, key);
    else if (key == "m-max") c.m_max = as_int(v, key);
    else if (key == "k-max") c.k_max = as_int(v, key);
    else if (key == "n-nodes") c.n_nodes = as_int(v, key);
    else if (key == "nx") c.nx = as_int(v, key);
    else if (key == "ny") c.ny = as_int(v, key);
    else if (key == "sample-density") c.sample_density = as_int(v, key);
    else if (key == "tol") c.tol = as_double(v, key);
    else if (key == "lambda-tol") c.lambda_tol = as_double(v, key);
    else if (key == "branch-tol") c.branch_tol = as_double(v, key);
    else if (key == "inner-tol") c.inner_tol = as_double(v, key);
    else if (key == "s-max") c.s_max = as_double(v, key);
    else if (key == "steps" || key == "n-steps") c.steps = as_int(v, key);
    else if (key == "mode") c.mode = as_string(v, key);
    else if (key == "eta") {
      if (!v.is_array()) throw InvalidInput("'eta' must be an array of numbers");
      c.eta.clear();
      for (const auto& e : v) c.eta.push_back(as_double(e, key));
    } else if (key == "branch") c.branch_path = resolve(as_string(v, key), base_dir);
    else if (key == "lambda-star") c.lambda_star = as_bool(v, key);
    else if (key == "output") c.output = as_string(v, key);
    else if (key == "force") c.force = as_bool(v, key);
    else throw InvalidInput("unknown configuration key '" + raw_key + "'");
  }
  return c;
}

json RunConfig::to_json() const {
  json j{{"command", command},
         {"m", m},
         {"k", k},
         {"m-max", m_max},
         {"k-max", k_max},
         {"n-nodes", n_nodes},
         {"nx", nx},
         {"ny", ny},
         {"sample-density", sample_density},
         {"tol", tol},
         {"lambda-tol", lambda_tol},
         {"branch-tol", branch_tol},
         {"inner-tol", inner_tol},
         {"s-max", s_max},
         {"steps", steps},
         {"mode", mode},
         {"eta", eta},
         {"lambda-star", lambda_star},
         {"output", output},
         {"force", force}};
  j["profile"] = profile.is_null() ? json(profile_path) : profile;
  for (auto [key, v] : {std::pair{"lambda", lambda}, {"sigma", sigma}, {"lambda-floor", lambda_floor}})
    j[key] = v ? json(*v) : json(nullptr);
  if (!branch_path.empty()) j["branch"] = branch_path;
  return j;
}

void RunConfig::validate() const {
  const auto& cmds = cli_commands();
  if (std::find(cmds.begin(), cmds.end(), command) == cmds.end())
    throw InvalidInput("unknown command '" + command + "'");
  if (profile.is_null() && profile_path.empty()) throw InvalidInput("a profile is required");
  auto need = [&](const std::optional<double>& v, const char* name) {
    if (!v) throw InvalidInput("command '" + command + "' requires --" + name);
  };
  if (command == "laminar" || command == "symbols" || command == "bifurcate-sigma") need(lambda, "lambda");
  if (command == "bifurcate-lambda") need(sigma, "sigma");
  if (command == "symbols" && lambda_star) need(sigma, "sigma");
  if (command == "branch" || command == "validate") {
    if (mode != "sigma" && mode != "lambda") throw InvalidInput("--mode must be 'sigma' or 'lambda'");
    const bool from_branch = command == "validate" && !branch_path.empty();
    if (command == "branch" || from_branch) {
      if (mode == "sigma") need(lambda, "lambda");
      else need(sigma, "sigma");
    } else {
      need(sigma, "sigma");
      need(lambda, "lambda");
    }
  }
  if (sigma && !(*sigma > 0.0)) throw InvalidInput("--sigma must be positive");
  if (m < 1 || k < 1 || m_max < 1 || k_max < 1) throw InvalidInput("m, k, m-max and k-max must be >= 1");
  if (n_nodes < 8) throw InvalidInput("--n-nodes must be >= 8");
  if (nx < 4 || nx % 2 != 0) throw InvalidInput("--nx must be even and >= 4");
  if (ny < 8) throw InvalidInput("--ny must be >= 8");
  if (sample_density < 2) throw InvalidInput("--sample-density must be >= 2");
  for (double t : {tol, lambda_tol, branch_tol, inner_tol})
    if (!(t > 0.0)) throw InvalidInput("tolerances must be positive");
  if (!(s_max > 0.0)) throw InvalidInput("--s-max must be positive");
  if (steps < 1) throw InvalidInput("--steps must be >= 1");
  if (command == "branch" && m > nx / 2) throw InvalidInput("--m must not exceed nx/2");
  if (static_cast<int>(eta.size()) > nx / 2) throw InvalidInput("--eta has more coefficients than nx/2");
  if (output.empty()) throw InvalidInput("--output must not be empty");
}

int run_command(const RunConfig& cfg, std::ostream& log) {
  try {
    return Runner(cfg, log).run();
  } catch (const InvalidInput& e) {
    log << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const AssumptionViolation& e) {
    log << "assumption violated: " << e.what() << "\n";
    return kExitAssumption;
  } catch (const IoError& e) {
    log << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    log << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Steady periodic stratified capillary-gravity waves: laminar flows, dispersion symbols, "
               "bifurcation values and local branches."};
  app.name("stratwave");
  app.require_subcommand(1);

  std::string config_path;
  std::map<std::string, std::string> raw;
  std::vector<std::pair<CLI::App*, std::map<std::string, CLI::Option*>>> subs;
  for (const auto& name : cli_commands()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON configuration; flags override its keys");
    std::map<std::string, CLI::Option*> opts;
    for (const auto& spec : key_specs()) {
      std::string flag = std::string("--") + spec.key;
      if (flag == "--steps") flag += ",--n-steps";
      if (spec.type == KeyType::Bool) opts[spec.key] = sub->add_flag(flag, spec.help);
      else opts[spec.key] = sub->add_option(flag, raw[spec.key], spec.help);
    }
    subs.emplace_back(sub, std::move(opts));
  }

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    json merged = json::object();
    fs::path base;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw IoError("cannot open configuration " + config_path);
      try {
        in >> merged;
      } catch (const json::exception& e) {
        throw InvalidInput("configuration " + config_path + " is not valid JSON: " + e.what());
      }
      if (!merged.is_object()) throw InvalidInput("configuration must be a JSON object");
      base = fs::path(config_path).parent_path();
    }
    json normalized = json::object();
    for (const auto& [key, v] : merged.items()) normalized[normalize_key(key)] = v;

    for (auto& [sub, opts] : subs) {
      if (!sub->parsed()) continue;
      normalized["command"] = sub->get_name();
      for (const auto& spec : key_specs()) {
        if (opts[spec.key]->count() == 0) continue;
        normalized[spec.key] = parse_flag(spec, raw[spec.key]);
        // Paths given on the command line are relative to the working directory.
        if (std::string(spec.key) == "profile" || std::string(spec.key) == "branch")
          normalized[spec.key] = fs::absolute(raw[spec.key]).string();
      }
    }
    const RunConfig cfg = RunConfig::from_json(normalized, base);
    return run_command(cfg, err);
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  }
}

} // namespace stratwave
