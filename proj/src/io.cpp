#include "qel/io.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "qel/balancing.hpp"
#include "qel/common.hpp"
#include "qel/generator.hpp"
#include "qel/quantisation.hpp"
#include "qel/stability.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace qel {

namespace {

// ---- small utilities ----

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    auto d = std::chrono::steady_clock::now() - start_;
    return std::chrono::duration<double, std::milli>(d).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string rat_str(const Rational& r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

ordered_json rat_list(const std::vector<Rational>& v) {
  ordered_json out = ordered_json::array();
  for (const Rational& r : v) out.push_back(rat_str(r));
  return out;
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  f << body;
}

void write_json(const std::string& path, const ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
  std::string body = header + "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) body += ",";
      body += fmt17(row[i]);
    }
    body += "\n";
  }
  write_text(path, body);
}

// ---- config parsing ----

void require_keys(const ordered_json& obj, const std::string& where,
                  const std::set<std::string>& allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key()))
      throw ConfigError("unknown key \"" + it.key() + "\" in " + where);
  }
}

bool plain_integer(const std::string& s) {
  size_t i = (!s.empty() && s[0] == '-') ? 1 : 0;
  if (i >= s.size()) return false;
  for (; i < s.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

Rational parse_rational_string(const std::string& s, const std::string& where) {
  size_t slash = s.find('/');
  std::string num = (slash == std::string::npos) ? s : s.substr(0, slash);
  std::string den = (slash == std::string::npos) ? "1" : s.substr(slash + 1);
  if (!plain_integer(num) || !plain_integer(den) || den[0] == '-')
    throw ConfigError(where + ": \"" + s +
                      "\" is not an integer or p/q fraction");
  BigInt d(den);
  if (d == 0) throw ConfigError(where + ": zero denominator in \"" + s + "\"");
  return Rational(BigInt(num)) / Rational(d);
}

// exact slot: JSON integer or "p/q" string
Rational exact_entry(const ordered_json& v, const std::string& where) {
  if (v.is_number_integer()) return Rational(v.get<long long>());
  if (v.is_string()) return parse_rational_string(v.get<std::string>(), where);
  throw ConfigError(where + ": entry must be an integer or a \"p/q\" string");
}

std::vector<Rational> exact_vector(const ordered_json& arr, int dim,
                                   const std::string& where) {
  if (!arr.is_array() || arr.size() != static_cast<size_t>(dim))
    throw ConfigError(where + ": expected an array of " +
                      std::to_string(dim) + " exact entries");
  std::vector<Rational> out;
  for (const auto& v : arr) out.push_back(exact_entry(v, where));
  return out;
}

void parse_polytope(const ordered_json& p, ExperimentConfig& cfg) {
  require_keys(p, "polytope", {"dim", "facets"});
  if (!p.contains("dim") || !p["dim"].is_number_integer())
    throw ConfigError("polytope.dim must be an integer");
  cfg.dim = p["dim"].get<int>();
  if (cfg.dim < 1 || cfg.dim > 2)
    throw ConfigError("polytope.dim must be 1 or 2");
  if (!p.contains("facets") || !p["facets"].is_array())
    throw ConfigError("polytope.facets must be an array");
  for (const auto& row : p["facets"]) {
    if (!row.is_array() || row.size() != static_cast<size_t>(cfg.dim) + 1)
      throw ConfigError("each facet needs " + std::to_string(cfg.dim) +
                        " normal entries plus an offset");
    std::vector<long> normal;
    for (int j = 0; j < cfg.dim; ++j) {
      if (!row[static_cast<size_t>(j)].is_number_integer())
        throw ConfigError("facet normals must be integers");
      normal.push_back(row[static_cast<size_t>(j)].get<long>());
    }
    cfg.normals.push_back(normal);
    cfg.offsets.push_back(
        exact_entry(row[static_cast<size_t>(cfg.dim)], "facet offset"));
  }
  if (cfg.normals.size() < static_cast<size_t>(cfg.dim) + 1)
    throw ConfigError("a compact polytope needs at least dim+1 facets");
}

void parse_perturbation(const ordered_json& p, ExperimentConfig& cfg) {
  require_keys(p, "perturbation", {"coeffs"});
  if (!p.contains("coeffs")) return;
  if (!p["coeffs"].is_object())
    throw ConfigError("perturbation.coeffs must be an object");
  for (auto it = p["coeffs"].begin(); it != p["coeffs"].end(); ++it) {
    std::istringstream is(it.key());
    std::vector<int> expo;
    int e;
    while (is >> e) {
      if (e < 0) throw ConfigError("perturbation exponents must be >= 0");
      expo.push_back(e);
    }
    if (!is.eof() || expo.size() != static_cast<size_t>(cfg.dim))
      throw ConfigError("perturbation key \"" + it.key() + "\" must hold " +
                        std::to_string(cfg.dim) + " exponents");
    if (!it.value().is_number())
      throw ConfigError("perturbation coefficients must be numbers");
    cfg.perturbation[expo] = it.value().get<double>();
  }
}

void parse_levels(const ordered_json& j, ExperimentConfig& cfg) {
  int forms = j.contains("k") + j.contains("k_list") + j.contains("k_range");
  if (forms == 0) throw ConfigError("one of k, k_list, k_range is required");
  if (forms > 1) throw ConfigError("give only one of k, k_list, k_range");
  if (j.contains("k")) {
    if (!j["k"].is_number_integer()) throw ConfigError("k must be an integer");
    cfg.k_list.push_back(j["k"].get<long>());
  } else if (j.contains("k_list")) {
    if (!j["k_list"].is_array()) throw ConfigError("k_list must be an array");
    for (const auto& v : j["k_list"]) {
      if (!v.is_number_integer())
        throw ConfigError("k_list entries must be integers");
      cfg.k_list.push_back(v.get<long>());
    }
  } else {
    const auto& r = j["k_range"];
    if (!r.is_array() || r.size() != 2 || !r[0].is_number_integer() ||
        !r[1].is_number_integer())
      throw ConfigError("k_range must be [lo, hi]");
    long lo = r[0].get<long>(), hi = r[1].get<long>();
    if (lo > hi) throw ConfigError("k_range must satisfy lo <= hi");
    for (long k = lo; k <= hi; ++k) cfg.k_list.push_back(k);
  }
  if (cfg.k_list.empty()) throw ConfigError("no levels requested");
  for (long k : cfg.k_list)
    if (k < 1) throw ConfigError("levels must be positive");
}

void parse_generator(const ordered_json& g, ExperimentConfig& cfg) {
  require_keys(g, "generator", {"lambda", "shift", "scale"});
  cfg.generator.present = true;
  if (!g.contains("lambda") || !g["lambda"].is_array() ||
      g["lambda"].size() != static_cast<size_t>(cfg.dim))
    throw ConfigError("generator.lambda must be an array of dim entries");
  cfg.generator.exact = true;
  for (const auto& v : g["lambda"]) {
    if (v.is_number_integer()) {
      cfg.generator.lambda_real.push_back(v.get<double>());
      cfg.generator.lambda_exact.emplace_back(v.get<long long>());
    } else if (v.is_string()) {
      Rational r =
          parse_rational_string(v.get<std::string>(), "generator.lambda");
      cfg.generator.lambda_real.push_back(static_cast<double>(r));
      cfg.generator.lambda_exact.push_back(r);
    } else if (v.is_number()) {
      cfg.generator.lambda_real.push_back(v.get<double>());
      cfg.generator.exact = false;
    } else {
      throw ConfigError("generator.lambda entries must be numbers or strings");
    }
  }
  if (!cfg.generator.exact) cfg.generator.lambda_exact.clear();
  if (g.contains("shift")) {
    if (!g["shift"].is_number())
      throw ConfigError("generator.shift must be a number");
    cfg.generator.shift = g["shift"].get<double>();
  }
  if (g.contains("scale")) {
    if (!g["scale"].is_number())
      throw ConfigError("generator.scale must be a number");
    cfg.generator.scale = g["scale"].get<double>();
  }
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

ExperimentConfig parse_config_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be an object");
  require_keys(j, "config",
               {"polytope", "perturbation", "k", "k_list", "k_range",
                "quad_order", "mode", "generator", "direction", "directions",
                "beta", "certificate_direction", "tolerance",
                "outer_tolerance", "max_iter", "solver", "start", "seed",
                "compare"});

  ExperimentConfig cfg;
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a64(text)));
  cfg.config_hash = hex;

  if (j.contains("compare")) {
    const auto& c = j["compare"];
    require_keys(c, "compare", {"a", "b", "tolerance"});
    if (!c.contains("a") || !c["a"].is_string() || !c.contains("b") ||
        !c["b"].is_string())
      throw ConfigError("compare needs manifest paths a and b");
    cfg.compare_a = c["a"].get<std::string>();
    cfg.compare_b = c["b"].get<std::string>();
    if (c.contains("tolerance")) {
      if (!c["tolerance"].is_number() || c["tolerance"].get<double>() <= 0)
        throw ConfigError("compare.tolerance must be positive");
      cfg.compare_tolerance = c["tolerance"].get<double>();
    }
    return cfg;  // a compare config carries no geometry
  }

  if (!j.contains("polytope")) throw ConfigError("polytope is required");
  parse_polytope(j["polytope"], cfg);
  if (j.contains("perturbation")) parse_perturbation(j["perturbation"], cfg);
  parse_levels(j, cfg);

  if (j.contains("quad_order")) {
    if (!j["quad_order"].is_number_integer())
      throw ConfigError("quad_order must be an integer");
    cfg.quad_order = j["quad_order"].get<int>();
    if (cfg.quad_order < 4) throw ConfigError("quad_order must be >= 4");
  }
  if (j.contains("mode")) {
    if (!j["mode"].is_string()) throw ConfigError("mode must be a string");
    cfg.mode = j["mode"].get<std::string>();
    if (cfg.mode != "plain" && cfg.mode != "fixed-A" &&
        cfg.mode != "self-consistent-A")
      throw ConfigError("mode must be plain, fixed-A or self-consistent-A");
  }
  if (j.contains("generator")) parse_generator(j["generator"], cfg);
  if (j.contains("direction"))
    cfg.direction = exact_vector(j["direction"], cfg.dim, "direction");
  if (j.contains("directions")) {
    if (!j["directions"].is_array() || j["directions"].empty())
      throw ConfigError("directions must be a non-empty array");
    for (const auto& d : j["directions"])
      cfg.directions.push_back(exact_vector(d, cfg.dim, "directions"));
  }
  if (j.contains("beta"))
    cfg.beta = exact_vector(j["beta"], cfg.dim, "beta");
  if (j.contains("certificate_direction")) {
    const auto& d = j["certificate_direction"];
    if (!d.is_array() || d.size() != static_cast<size_t>(cfg.dim))
      throw ConfigError("certificate_direction must be an array of dim ints");
    for (const auto& v : d) {
      if (!v.is_number_integer())
        throw ConfigError("certificate_direction entries must be integers");
      cfg.certificate_direction.push_back(v.get<long>());
    }
  }
  if (j.contains("tolerance")) {
    if (!j["tolerance"].is_number() || j["tolerance"].get<double>() <= 0)
      throw ConfigError("tolerance must be positive");
    cfg.tolerance = j["tolerance"].get<double>();
  }
  if (j.contains("outer_tolerance")) {
    if (!j["outer_tolerance"].is_number() ||
        j["outer_tolerance"].get<double>() <= 0)
      throw ConfigError("outer_tolerance must be positive");
    cfg.outer_tolerance = j["outer_tolerance"].get<double>();
  }
  if (j.contains("max_iter")) {
    if (!j["max_iter"].is_number_integer() || j["max_iter"].get<long>() < 1)
      throw ConfigError("max_iter must be a positive integer");
    cfg.max_iter = j["max_iter"].get<long>();
  }
  if (j.contains("solver")) {
    if (!j["solver"].is_string()) throw ConfigError("solver must be a string");
    cfg.solver = j["solver"].get<std::string>();
    if (cfg.solver != "gradient" && cfg.solver != "fixed-point")
      throw ConfigError("solver must be gradient or fixed-point");
  }
  if (j.contains("start")) {
    if (!j["start"].is_string()) throw ConfigError("start must be a string");
    cfg.start = j["start"].get<std::string>();
    if (cfg.start != "hilb" && cfg.start != "identity" &&
        cfg.start != "random")
      throw ConfigError("start must be hilb, identity or random");
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer())
      throw ConfigError("seed must be an integer");
    cfg.seed = j["seed"].get<unsigned long long>();
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read config " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return parse_config_text(os.str());
}

DelzantPolytope config_polytope(const ExperimentConfig& cfg) {
  if (cfg.dim == 0)
    throw ConfigError("this operation needs a polytope in the config");
  return DelzantPolytope::from_facets(cfg.dim, cfg.normals, cfg.offsets);
}

SymplecticPotential config_potential(const ExperimentConfig& cfg) {
  PolynomialPerturbation pert;
  pert.terms = cfg.perturbation;
  return SymplecticPotential(config_polytope(cfg), pert);
}

int config_order(const ExperimentConfig& cfg) {
  if (cfg.quad_order > 0) return cfg.quad_order;
  return cfg.dim == 1 ? 64 : 32;
}

std::map<std::string, std::string> convention_header() {
  return {
      {"volume", "moment measure is Lebesgue on P; int_X omega^n/n! = vol(P)"},
      {"metric", "omega = (i/pi) ddbar phi; (df,dg) = 2 pi phi^{jl} f_j g_l"},
      {"density",
       "log|s_a|^2 = 2<a - k x, grad u> + 2 k u; Hilb = (N/V) Gram"},
      {"scalar_curvature", "S = -pi sum_jl d^2 (Hess u)^{-1}_{jl} / dx_j dx_l"},
      {"hamiltonian",
       "psi = <lambda, x> + c0; level weights -2 pi (<lambda, alpha> + k c0)"},
  };
}

// ---- experiment runner ----

namespace {

struct Emitter {
  std::string out_dir;
  RunManifest manifest;

  std::string path(const std::string& name) const {
    return out_dir + "/" + name;
  }
  void record(OperationRecord rec) {
    for (const std::string& f : rec.outputs) manifest.files.push_back(f);
    manifest.operations.push_back(std::move(rec));
  }
};

BalanceOptions balance_options(const ExperimentConfig& cfg) {
  BalanceOptions opts;
  opts.tolerance = cfg.tolerance;
  opts.max_iter = cfg.max_iter;
  opts.start = cfg.start;
  opts.seed = cfg.seed;
  opts.solver = cfg.solver;
  opts.outer_tolerance = cfg.outer_tolerance;
  return opts;
}

Eigen::VectorXd fixed_twist(const ExperimentConfig& cfg,
                            const Quantisation& q) {
  if (!cfg.generator.present || !cfg.generator.exact)
    throw ConfigError(
        "fixed-A mode needs generator.lambda with integer or p/q entries");
  TorusGenerator g;
  g.lambda = cfg.generator.lambda_exact;
  return twist_diagonal(g, q.alphas, q.k, cfg.generator.scale);
}

std::vector<double> scaled_lambda(const ExperimentConfig& cfg) {
  if (!cfg.generator.present)
    throw ConfigError("this operation needs a generator block");
  std::vector<double> l = cfg.generator.lambda_real;
  for (double& v : l) v *= cfg.generator.scale;
  return l;
}

std::vector<Rational> exact_direction(const ExperimentConfig& cfg) {
  if (!cfg.direction.empty()) return cfg.direction;
  if (cfg.generator.present && cfg.generator.exact)
    return cfg.generator.lambda_exact;
  throw ConfigError(
      "this operation needs direction (or an exact generator.lambda)");
}

ordered_json balance_json(const BalanceReport& r, long k, long N,
                          const std::string& mode) {
  ordered_json j;
  j["k"] = k;
  j["N"] = N;
  j["mode"] = mode;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["residual"] = r.residual;
  j["rel_residual"] = r.rel_residual;
  j["ca"] = r.ca;
  j["energy"] = {{"total", r.energy.total},
                 {"i_part", r.energy.i_part},
                 {"trace_part", r.energy.trace_part}};
  return j;
}

ordered_json certificate_json(const ChowCertificate& cert) {
  ordered_json j;
  j["polystable"] = cert.polystable;
  j["reason"] = cert.reason;
  j["c"] = cert.c;
  j["fit_remainder"] = cert.fit_remainder;
  j["direction"] = cert.direction;
  j["block_keys"] = cert.block_keys;
  j["b"] = cert.b;
  j["block_spread"] = cert.block_spread;
  j["partition_residual"] = cert.partition_residual;
  ordered_json lam = ordered_json::array();
  for (long i = 0; i < cert.lambda.size(); ++i) lam.push_back(cert.lambda(i));
  j["lambda"] = lam;
  return j;
}

void run_balance(const ExperimentConfig& cfg, Emitter& em) {
  SymplecticPotential pot = config_potential(cfg);
  BalanceOptions opts = balance_options(cfg);
  std::vector<std::vector<double>> series;
  for (long k : cfg.k_list) {
    OperationRecord rec;
    rec.name = "balance";
    rec.k = k;
    Timer t;
    try {
      Quantisation q = make_quantisation(pot, k, config_order(cfg));
      ordered_json j;
      const BalanceReport* fin = nullptr;
      SelfConsistentReport screp;
      BalanceReport rep;
      if (cfg.mode == "self-consistent-A") {
        screp = self_consistent_balance(q, opts);
        fin = &screp.final_state;
        j = balance_json(*fin, k, q.N, cfg.mode);
        j["outer_iterations"] = screp.outer_iterations;
        j["fit_remainder"] = screp.fit_remainder;
        ordered_json ls = ordered_json::array();
        for (long i = 0; i < screp.lambda_star.size(); ++i)
          ls.push_back(screp.lambda_star(i));
        j["lambda_star"] = ls;
        j["converged"] = screp.converged;
      } else {
        Eigen::VectorXd A = Eigen::VectorXd::Zero(q.N);
        if (cfg.mode == "fixed-A") A = fixed_twist(cfg, q);
        rep = balance(q, A, opts);
        fin = &rep;
        j = balance_json(*fin, k, q.N, cfg.mode);
      }
      std::string name = "balance_k" + std::to_string(k) + ".json";
      write_json(em.path(name), j);
      rec.outputs.push_back(name);
      if (cfg.mode == "self-consistent-A") {
        CentreData c = centre_of_mass(q, fin->eta);
        CertificateOptions copts;
        std::vector<long> over = cfg.certificate_direction;
        if (!over.empty()) copts.direction_override = &over;
        ChowCertificate cert = chow_certificate(q, c, copts);
        std::string cname = "certificate_k" + std::to_string(k) + ".json";
        write_json(em.path(cname), certificate_json(cert));
        rec.outputs.push_back(cname);
      }
      series.push_back({static_cast<double>(k), fin->residual, fin->ca,
                        static_cast<double>(fin->iterations)});
      bool ok = (cfg.mode == "self-consistent-A") ? screp.converged
                                                  : fin->converged;
      if (!ok)
        rec.status =
            "error:numerical: balance at k=" + std::to_string(k) +
            " did not converge";
    } catch (const NumericalError& e) {
      rec.status = std::string("error:numerical: ") + e.what();
    } catch (const InvariantError& e) {
      rec.status = std::string("error:invariant: ") + e.what();
    } catch (const ConfigError& e) {
      rec.status = std::string("error:config: ") + e.what();
    }
    rec.wall_ms = t.ms();
    em.record(std::move(rec));
  }
  OperationRecord rec;
  rec.name = "balance-series";
  Timer t;
  write_csv(em.path("balance.csv"), "k,residual,ca,iterations", series);
  rec.outputs.push_back("balance.csv");
  rec.wall_ms = t.ms();
  em.record(std::move(rec));
}

void run_bergman(const ExperimentConfig& cfg, Emitter& em) {
  SymplecticPotential pot = config_potential(cfg);
  std::vector<std::vector<double>> series;
  for (long k : cfg.k_list) {
    OperationRecord rec;
    rec.name = "bergman";
    rec.k = k;
    Timer t;
    try {
      Quantisation q = make_quantisation(pot, k, config_order(cfg));
      BergmanSample b = bergman(q, hilb_log(q));
      std::vector<std::vector<double>> rows;
      double sup = 0;
      for (size_t i = 0; i < q.rule.size(); ++i) {
        std::vector<double> row = q.rule.points[i];
        row.push_back(b.rho_bar(static_cast<long>(i)));
        rows.push_back(row);
        sup = std::max(sup,
                       std::abs(b.rho_bar(static_cast<long>(i)) - 1.0));
      }
      std::string header = "x1";
      for (int d = 2; d <= cfg.dim; ++d)
        header += ",x" + std::to_string(d);
      header += ",rho_bar";
      std::string name = "bergman_k" + std::to_string(k) + ".csv";
      write_csv(em.path(name), header, rows);
      rec.outputs.push_back(name);
      ordered_json j;
      j["k"] = k;
      j["N"] = q.N;
      j["volume"] = q.V;
      j["sup_deviation"] = sup;
      j["integral_rho_bar"] = b.integral_rho;
      std::string jname = "bergman_k" + std::to_string(k) + ".json";
      write_json(em.path(jname), j);
      rec.outputs.push_back(jname);
      series.push_back({static_cast<double>(k), sup});
    } catch (const NumericalError& e) {
      rec.status = std::string("error:numerical: ") + e.what();
    } catch (const InvariantError& e) {
      rec.status = std::string("error:invariant: ") + e.what();
    } catch (const ConfigError& e) {
      rec.status = std::string("error:config: ") + e.what();
    }
    rec.wall_ms = t.ms();
    em.record(std::move(rec));
  }
  OperationRecord rec;
  rec.name = "bergman-series";
  Timer t;
  write_csv(em.path("bergman.csv"), "k,sup_deviation", series);
  rec.outputs.push_back("bergman.csv");
  rec.wall_ms = t.ms();
  em.record(std::move(rec));
}

void run_equiv_rr(const ExperimentConfig& cfg, Emitter& em) {
  SymplecticPotential pot = config_potential(cfg);
  std::vector<double> lambda = scaled_lambda(cfg);
  std::vector<std::vector<double>> series;
  for (long k : cfg.k_list) {
    OperationRecord rec;
    rec.name = "equiv-rr";
    rec.k = k;
    Timer t;
    try {
      Quantisation q = make_quantisation(pot, k, config_order(cfg));
      EquivariantDensity d =
          equivariant_density(q, lambda, cfg.generator.shift);
      double sup = (d.gram_density - d.closed_density).cwiseAbs().maxCoeff();
      ordered_json j;
      j["k"] = k;
      j["lambda"] = lambda;
      j["shift"] = cfg.generator.shift;
      j["lhs"] = d.lhs;
      j["rhs"] = d.rhs;
      j["gap"] = d.lhs - d.rhs;
      j["sup_pointwise"] = sup;
      j["normalisation_ok"] = d.normalisation_ok;
      std::string name = "equiv_rr_k" + std::to_string(k) + ".json";
      write_json(em.path(name), j);
      rec.outputs.push_back(name);
      series.push_back({static_cast<double>(k), d.lhs, d.rhs,
                        std::abs(d.lhs - d.rhs)});
    } catch (const NumericalError& e) {
      rec.status = std::string("error:numerical: ") + e.what();
    } catch (const InvariantError& e) {
      rec.status = std::string("error:invariant: ") + e.what();
    } catch (const ConfigError& e) {
      rec.status = std::string("error:config: ") + e.what();
    }
    rec.wall_ms = t.ms();
    em.record(std::move(rec));
  }
  OperationRecord rec;
  rec.name = "equiv-rr-series";
  Timer t;
  write_csv(em.path("equiv_rr.csv"), "k,lhs,rhs,gap", series);
  rec.outputs.push_back("equiv_rr.csv");
  rec.wall_ms = t.ms();
  em.record(std::move(rec));
}

ordered_json fit_json(const ExpansionFit& fit) {
  ordered_json j;
  j["direction"] = rat_list(fit.lambda);
  j["k_list"] = fit.k_list;
  j["dimension_poly"] = rat_list(fit.n_poly.coeffs);
  j["trace_poly"] = rat_list(fit.trace_poly.coeffs);
  ordered_json a = ordered_json::array(), b = ordered_json::array();
  for (int i = 0; i <= fit.n; ++i) a.push_back(rat_str(fit.a(i)));
  for (int i = 0; i <= fit.n + 1; ++i) b.push_back(rat_str(fit.b(i)));
  j["a"] = a;
  j["b"] = b;
  j["level_means"] = rat_list(fit.level_means);
  return j;
}

void run_fit_family(const ExperimentConfig& cfg, Emitter& em,
                    const std::string& op) {
  OperationRecord rec;
  rec.name = op;
  Timer t;
  try {
    DelzantPolytope P = config_polytope(cfg);
    std::vector<Rational> dir = exact_direction(cfg);
    ExpansionFit fit = fit_expansions(P, dir, cfg.k_list);
    if (op == "fit") {
      write_json(em.path("fit.json"), fit_json(fit));
      rec.outputs.push_back("fit.json");
      std::vector<std::vector<double>> rows;
      for (long k : cfg.k_list)
        rows.push_back({static_cast<double>(k),
                        static_cast<double>(fit.n_poly.eval(Rational(k))),
                        static_cast<double>(fit.trace_poly.eval(Rational(k)))});
      write_csv(em.path("fit.csv"), "k,dimension,trace", rows);
      rec.outputs.push_back("fit.csv");
    } else {  // chow / df share the fit
      Rational df = df_invariant(fit);
      ordered_json j;
      j["direction"] = rat_list(fit.lambda);
      j["df"] = rat_str(df);
      j["df_value"] = static_cast<double>(df);
      ordered_json chow = ordered_json::object();
      std::vector<std::vector<double>> rows;
      for (long k : cfg.k_list) {
        Rational c = chow_weight(fit, k);
        chow[std::to_string(k)] = rat_str(c);
        rows.push_back({static_cast<double>(k), static_cast<double>(c)});
      }
      j["chow"] = chow;
      std::string base = (op == "chow") ? "chow" : "df";
      write_json(em.path(base + ".json"), j);
      write_csv(em.path(base + ".csv"), "k,chow_weight", rows);
      rec.outputs.push_back(base + ".json");
      rec.outputs.push_back(base + ".csv");
    }
  } catch (const NumericalError& e) {
    rec.status = std::string("error:numerical: ") + e.what();
  } catch (const InvariantError& e) {
    rec.status = std::string("error:invariant: ") + e.what();
  } catch (const ConfigError& e) {
    rec.status = std::string("error:config: ") + e.what();
  }
  rec.wall_ms = t.ms();
  em.record(std::move(rec));
}

void run_inner(const ExperimentConfig& cfg, Emitter& em) {
  OperationRecord rec;
  rec.name = "inner";
  Timer t;
  try {
    DelzantPolytope P = config_polytope(cfg);
    if (cfg.directions.empty())
      throw ConfigError("inner needs a directions array");
    InnerProductTable table =
        inner_product_table(P, cfg.directions, cfg.k_list);
    ordered_json j;
    ordered_json dirs = ordered_json::array();
    for (const auto& d : table.directions) dirs.push_back(rat_list(d));
    j["directions"] = dirs;
    ordered_json mat = ordered_json::array();
    std::vector<std::vector<double>> rows;
    for (size_t i = 0; i < table.pairing.size(); ++i) {
      mat.push_back(rat_list(table.pairing[i]));
      for (size_t l = 0; l < table.pairing[i].size(); ++l)
        rows.push_back({static_cast<double>(i), static_cast<double>(l),
                        static_cast<double>(table.pairing[i][l])});
    }
    j["pairing"] = mat;
    write_json(em.path("inner.json"), j);
    write_csv(em.path("inner.csv"), "i,j,pairing", rows);
    rec.outputs = {"inner.json", "inner.csv"};
  } catch (const NumericalError& e) {
    rec.status = std::string("error:numerical: ") + e.what();
  } catch (const InvariantError& e) {
    rec.status = std::string("error:invariant: ") + e.what();
  } catch (const ConfigError& e) {
    rec.status = std::string("error:config: ") + e.what();
  }
  rec.wall_ms = t.ms();
  em.record(std::move(rec));
}

void run_relative_df(const ExperimentConfig& cfg, Emitter& em) {
  OperationRecord rec;
  rec.name = "relative-df";
  Timer t;
  try {
    DelzantPolytope P = config_polytope(cfg);
    if (cfg.directions.empty())
      throw ConfigError("relative-df needs a directions array");
    ExtremalData ex = extremal_normalisation(P);
    ordered_json j;
    j["s_hat"] = rat_list(ex.s_hat);
    j["chi"] = rat_list(ex.chi);
    j["chi_shift"] = rat_str(ex.chi_shift);
    j["df_chi"] = rat_str(ex.df_chi);
    j["cscK"] = ex.cscK;
    ordered_json scan = ordered_json::array();
    std::vector<std::vector<double>> rows;
    for (size_t i = 0; i < cfg.directions.size(); ++i) {
      const auto& dir = cfg.directions[i];
      Rational rdf = relative_df(P, dir, ex, cfg.k_list);
      Rational df =
          df_invariant(fit_expansions(P, dir, cfg.k_list));
      ordered_json entry;
      entry["direction"] = rat_list(dir);
      entry["df"] = rat_str(df);
      entry["pairing_with_chi"] = rat_str(covariance_pairing(P, dir, ex.chi));
      entry["relative_df"] = rat_str(rdf);
      entry["relative_df_value"] = static_cast<double>(rdf);
      scan.push_back(entry);
      rows.push_back(
          {static_cast<double>(i), static_cast<double>(rdf)});
    }
    j["scan"] = scan;
    write_json(em.path("relative_df.json"), j);
    write_csv(em.path("relative_df.csv"), "index,relative_df", rows);
    rec.outputs = {"relative_df.json", "relative_df.csv"};
  } catch (const NumericalError& e) {
    rec.status = std::string("error:numerical: ") + e.what();
  } catch (const InvariantError& e) {
    rec.status = std::string("error:invariant: ") + e.what();
  } catch (const ConfigError& e) {
    rec.status = std::string("error:config: ") + e.what();
  }
  rec.wall_ms = t.ms();
  em.record(std::move(rec));
}

void run_futaki(const ExperimentConfig& cfg, Emitter& em) {
  OperationRecord rec;
  rec.name = "futaki";
  Timer t;
  try {
    SymplecticPotential pot = config_potential(cfg);
    std::vector<double> lambda = scaled_lambda(cfg);
    int order = config_order(cfg);
    std::vector<int> orders = {std::max(8, order / 2),
                               std::max(12, (3 * order) / 4), order};
    std::vector<std::vector<double>> rows;
    double value = 0;
    for (int o : orders) {
      value = futaki_integral(pot, lambda, o);
      rows.push_back({static_cast<double>(o), value});
    }
    ordered_json j;
    j["lambda"] = lambda;
    j["order"] = order;
    j["value"] = value;
    write_json(em.path("futaki.json"), j);
    write_csv(em.path("futaki.csv"), "order,value", rows);
    rec.outputs = {"futaki.json", "futaki.csv"};
  } catch (const NumericalError& e) {
    rec.status = std::string("error:numerical: ") + e.what();
  } catch (const InvariantError& e) {
    rec.status = std::string("error:invariant: ") + e.what();
  } catch (const ConfigError& e) {
    rec.status = std::string("error:config: ") + e.what();
  }
  rec.wall_ms = t.ms();
  em.record(std::move(rec));
}

void run_limit_weight(const ExperimentConfig& cfg, Emitter& em) {
  SymplecticPotential pot = config_potential(cfg);
  BalanceOptions opts = balance_options(cfg);
  std::vector<SelfConsistentReport> reports;
  std::vector<long> done;
  for (long k : cfg.k_list) {
    OperationRecord rec;
    rec.name = "limit-weight";
    rec.k = k;
    Timer t;
    try {
      Quantisation q = make_quantisation(pot, k, config_order(cfg));
      SelfConsistentReport rep = self_consistent_balance(q, opts);
      ordered_json j = balance_json(rep.final_state, k, q.N,
                                    "self-consistent-A");
      j["converged"] = rep.converged;
      j["outer_iterations"] = rep.outer_iterations;
      std::string name = "limit_weight_k" + std::to_string(k) + ".json";
      write_json(em.path(name), j);
      rec.outputs.push_back(name);
      if (!rep.converged)
        rec.status = "error:numerical: self-consistent balance at k=" +
                     std::to_string(k) + " did not converge";
      reports.push_back(std::move(rep));
      done.push_back(k);
    } catch (const NumericalError& e) {
      rec.status = std::string("error:numerical: ") + e.what();
    } catch (const InvariantError& e) {
      rec.status = std::string("error:invariant: ") + e.what();
    } catch (const ConfigError& e) {
      rec.status = std::string("error:config: ") + e.what();
    }
    rec.wall_ms = t.ms();
    em.record(std::move(rec));
  }
  OperationRecord rec;
  rec.name = "limit-weight";
  Timer t;
  try {
    DelzantPolytope P = config_polytope(cfg);
    if (cfg.beta.empty())
      throw ConfigError("limit-weight needs a beta direction");
    ExtremalData ex = extremal_normalisation(P);
    std::vector<const SelfConsistentReport*> ptrs;
    for (const auto& r : reports) ptrs.push_back(&r);
    LimitWeightCheck c = limit_weight_check(P, done, ptrs, cfg.beta, ex);
    ordered_json j;
    j["beta"] = rat_list(cfg.beta);
    j["k_list"] = c.ks;
    j["terms"] = c.terms;
    j["extrapolated"] = c.extrapolated;
    j["target"] = c.target;
    j["gap"] = c.extrapolated - c.target;
    j["chi"] = rat_list(ex.chi);
    write_json(em.path("limit_weight.json"), j);
    rec.outputs.push_back("limit_weight.json");
    std::vector<std::vector<double>> rows;
    for (size_t i = 0; i < c.terms.size(); ++i)
      rows.push_back({static_cast<double>(c.ks[i]), c.terms[i]});
    write_csv(em.path("limit_weight.csv"), "k,term", rows);
    rec.outputs.push_back("limit_weight.csv");
  } catch (const NumericalError& e) {
    rec.status = std::string("error:numerical: ") + e.what();
  } catch (const InvariantError& e) {
    rec.status = std::string("error:invariant: ") + e.what();
  } catch (const ConfigError& e) {
    rec.status = std::string("error:config: ") + e.what();
  }
  rec.wall_ms = t.ms();
  em.record(std::move(rec));
}

ordered_json manifest_json(const RunManifest& m) {
  ordered_json j;
  j["tool"] = m.tool;
  j["config_hash"] = m.config_hash;
  ordered_json conv;
  for (const auto& [key, val] : m.convention) conv[key] = val;
  j["convention"] = conv;
  ordered_json ops = ordered_json::array();
  for (const auto& rec : m.operations) {
    ordered_json o;
    o["name"] = rec.name;
    if (rec.k >= 0) o["k"] = rec.k;
    o["outputs"] = rec.outputs;
    o["wall_ms"] = rec.wall_ms;
    o["status"] = rec.status;
    ops.push_back(o);
  }
  j["operations"] = ops;
  j["files"] = m.files;
  return j;
}

}  // namespace

RunManifest run_experiment(const ExperimentConfig& cfg, const std::string& op,
                           const std::string& out_dir) {
  fs::create_directories(out_dir);
  Emitter em;
  em.out_dir = out_dir;
  em.manifest.tool = "qel 1.0.0";
  em.manifest.config_hash = cfg.config_hash;
  em.manifest.convention = convention_header();

  if (op == "balance") {
    run_balance(cfg, em);
  } else if (op == "bergman") {
    run_bergman(cfg, em);
  } else if (op == "equiv-rr") {
    run_equiv_rr(cfg, em);
  } else if (op == "fit" || op == "chow" || op == "df") {
    run_fit_family(cfg, em, op);
  } else if (op == "inner") {
    run_inner(cfg, em);
  } else if (op == "relative-df") {
    run_relative_df(cfg, em);
  } else if (op == "futaki") {
    run_futaki(cfg, em);
  } else if (op == "limit-weight") {
    run_limit_weight(cfg, em);
  } else {
    throw ConfigError("unknown operation " + op);
  }

  em.manifest.files.push_back("qel_manifest.json");
  std::sort(em.manifest.files.begin(), em.manifest.files.end());
  em.manifest.files.erase(
      std::unique(em.manifest.files.begin(), em.manifest.files.end()),
      em.manifest.files.end());
  write_json(em.path("qel_manifest.json"), manifest_json(em.manifest));
  return em.manifest;
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read manifest " + path);
  ordered_json j;
  try {
    j = ordered_json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("manifest is not valid JSON: ") + e.what());
  }
  RunManifest m;
  try {
    m.tool = j.at("tool").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    for (auto it = j.at("convention").begin(); it != j.at("convention").end();
         ++it)
      m.convention[it.key()] = it.value().get<std::string>();
    for (const auto& o : j.at("operations")) {
      OperationRecord rec;
      rec.name = o.at("name").get<std::string>();
      rec.k = o.contains("k") ? o["k"].get<long>() : -1;
      rec.outputs = o.at("outputs").get<std::vector<std::string>>();
      rec.wall_ms = o.at("wall_ms").get<double>();
      rec.status = o.at("status").get<std::string>();
      m.operations.push_back(std::move(rec));
    }
    m.files = j.at("files").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest schema: ") + e.what());
  }
  return m;
}

int manifest_exit_code(const RunManifest& m) {
  int code = 0;
  for (const auto& rec : m.operations) {
    if (rec.status.rfind("error:invariant", 0) == 0)
      code = std::max(code, 3);
    else if (rec.status.rfind("error:config", 0) == 0)
      code = std::max(code, 2);
    else if (rec.status.rfind("error:", 0) == 0)
      code = std::max(code, 1);
  }
  return code;
}

// ---- comparison ----

namespace {

double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

const std::set<std::string>& skipped_keys() {
  static const std::set<std::string> keys = {
      "iterations", "outer_iterations", "wall_ms", "a_update_path",
      "energy_path"};
  return keys;
}

void compare_json_values(const ordered_json& a, const ordered_json& b,
                         const std::string& where, CompareReport& rep) {
  if (a.is_object() && b.is_object()) {
    for (auto it = a.begin(); it != a.end(); ++it) {
      if (skipped_keys().count(it.key())) continue;
      if (!b.contains(it.key())) {
        rep.skipped.push_back(where + "/" + it.key() + ": only in a");
        continue;
      }
      compare_json_values(it.value(), b[it.key()], where + "/" + it.key(),
                          rep);
    }
    for (auto it = b.begin(); it != b.end(); ++it)
      if (!a.contains(it.key()) && !skipped_keys().count(it.key()))
        rep.skipped.push_back(where + "/" + it.key() + ": only in b");
    return;
  }
  if (a.is_array() && b.is_array()) {
    if (a.size() != b.size()) {
      rep.skipped.push_back(where + ": array shapes differ");
      return;
    }
    for (size_t i = 0; i < a.size(); ++i)
      compare_json_values(a[i], b[i], where + "[" + std::to_string(i) + "]",
                          rep);
    return;
  }
  if (a.is_number() && b.is_number()) {
    double d = rel_diff(a.get<double>(), b.get<double>());
    if (d > 0)
      rep.compared.push_back(where + ": " + fmt17(a.get<double>()) + " " +
                             fmt17(b.get<double>()) + " " + fmt17(d));
    rep.max_rel_diff = std::max(rep.max_rel_diff, d);
    return;
  }
  if (a != b) rep.skipped.push_back(where + ": non-numeric values differ");
}

std::vector<std::vector<double>> parse_csv(const std::string& path,
                                           std::string& header) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (first) {
      header = line;
      first = false;
      continue;
    }
    std::vector<double> row;
    std::istringstream is(line);
    std::string cell;
    while (std::getline(is, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

void compare_csv(const std::string& pa, const std::string& pb,
                 const std::string& name, CompareReport& rep) {
  std::string ha, hb;
  auto ra = parse_csv(pa, ha);
  auto rb = parse_csv(pb, hb);
  if (ha != hb) {
    rep.skipped.push_back(name + ": headers differ");
    return;
  }
  if (ra.size() != rb.size()) {
    rep.skipped.push_back(name + ": row counts differ");
    return;
  }
  for (size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].size() != rb[i].size()) {
      rep.skipped.push_back(name + ": row " + std::to_string(i) +
                            " widths differ");
      continue;
    }
    for (size_t c = 0; c < ra[i].size(); ++c) {
      double d = rel_diff(ra[i][c], rb[i][c]);
      if (d > 0)
        rep.compared.push_back(name + ":" + std::to_string(i) + "," +
                               std::to_string(c) + ": " + fmt17(ra[i][c]) +
                               " " + fmt17(rb[i][c]) + " " + fmt17(d));
      rep.max_rel_diff = std::max(rep.max_rel_diff, d);
    }
  }
}

}  // namespace

CompareReport compare_runs(const std::string& manifest_a,
                           const std::string& manifest_b, double tolerance,
                           const std::string& out_dir) {
  RunManifest ma = read_manifest(manifest_a);
  RunManifest mb = read_manifest(manifest_b);
  if (ma.convention != mb.convention)
    throw ConfigError(
        "convention headers differ: the runs are not comparable");
  std::set<std::string> ops_a, ops_b;
  for (const auto& r : ma.operations) ops_a.insert(r.name);
  for (const auto& r : mb.operations) ops_b.insert(r.name);
  if (ops_a != ops_b)
    throw ConfigError("operation sets differ: the runs are not comparable");

  std::string dir_a = fs::path(manifest_a).parent_path().string();
  std::string dir_b = fs::path(manifest_b).parent_path().string();
  if (dir_a.empty()) dir_a = ".";
  if (dir_b.empty()) dir_b = ".";

  CompareReport rep;
  rep.tolerance = tolerance;
  std::set<std::string> files_b(mb.files.begin(), mb.files.end());
  for (const std::string& f : ma.files) {
    if (f == "qel_manifest.json" || f == "compare.json") continue;
    if (!files_b.count(f)) {
      rep.skipped.push_back(f + ": only in a");
      continue;
    }
    std::string pa = dir_a + "/" + f;
    std::string pb = dir_b + "/" + f;
    if (f.size() > 4 && f.substr(f.size() - 4) == ".csv") {
      compare_csv(pa, pb, f, rep);
    } else {
      std::ifstream fa(pa), fb(pb);
      if (!fa || !fb) throw ConfigError("missing output file " + f);
      ordered_json ja = ordered_json::parse(fa);
      ordered_json jb = ordered_json::parse(fb);
      compare_json_values(ja, jb, f, rep);
    }
  }
  for (const std::string& f : mb.files)
    if (f != "qel_manifest.json" && f != "compare.json" &&
        !std::count(ma.files.begin(), ma.files.end(), f))
      rep.skipped.push_back(f + ": only in b");

  rep.within = rep.max_rel_diff <= tolerance;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    ordered_json j;
    j["a"] = manifest_a;
    j["b"] = manifest_b;
    j["tolerance"] = tolerance;
    j["max_rel_diff"] = rep.max_rel_diff;
    j["within_tolerance"] = rep.within;
    j["compared"] = rep.compared;
    j["skipped"] = rep.skipped;
    write_json(out_dir + "/compare.json", j);
  }
  return rep;
}

}  // namespace qel
