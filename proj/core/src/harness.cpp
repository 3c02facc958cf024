#include "abandonq/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "abandonq/quadrature.hpp"
#include "abandonq/rng.hpp"

namespace abq {

using nlohmann::json;

namespace {

std::string g12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex16(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---- primitive (de)serialization ----

json primitive_to_json(const PrimitiveSpec& p) {
  json j;
  switch (p.kind) {
    case PrimitiveKind::Exponential:
      j["kind"] = "exponential";
      break;
    case PrimitiveKind::Gamma:
      j["kind"] = "gamma";
      j["shape"] = p.shape;
      break;
    case PrimitiveKind::Lognormal:
      j["kind"] = "lognormal";
      j["sigma"] = p.sigma;
      break;
    case PrimitiveKind::Deterministic:
      j["kind"] = "deterministic";
      j["point_mass"] = p.point_mass;
      break;
    case PrimitiveKind::Hyperexponential:
      j["kind"] = "hyperexponential";
      j["weights"] = p.weights;
      j["rates"] = p.rates;
      break;
    case PrimitiveKind::Uniform:
      j["kind"] = "uniform";
      j["width"] = p.width;
      break;
  }
  return j;
}

PrimitiveSpec primitive_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("kind")) {
    throw ConfigError(where + ": primitive needs an object with a \"kind\"");
  }
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "exponential") return PrimitiveSpec::exponential();
  if (kind == "gamma") return PrimitiveSpec::gamma(j.value("shape", 1.0));
  if (kind == "lognormal") return PrimitiveSpec::lognormal(j.value("sigma", 1.0));
  if (kind == "deterministic") {
    double pm = j.value("point_mass", 1.0);
    if (pm == 1.0) return PrimitiveSpec::deterministic();
    return PrimitiveSpec::degenerate(pm);
  }
  if (kind == "hyperexponential") {
    std::vector<double> w = j.value("weights", std::vector<double>{});
    std::vector<double> r = j.value("rates", std::vector<double>{});
    return PrimitiveSpec::hyperexponential(w, r);
  }
  if (kind == "uniform") return PrimitiveSpec::uniform(j.value("width", 1.0));
  throw ConfigError(where + ": unknown primitive kind \"" + kind + "\"");
}

// ---- patience declaration (de)serialization ----

json patience_to_json(const PatienceDecl& d) {
  json j;
  switch (d.kind) {
    case PatienceDecl::Kind::None:
      j["variant"] = "none";
      break;
    case PatienceDecl::Kind::UnscaledExponential:
      j["variant"] = "unscaled_exponential";
      j["beta"] = d.beta;
      break;
    case PatienceDecl::Kind::UnscaledPower:
      j["variant"] = "unscaled_power";
      j["alpha"] = d.alpha;
      break;
    case PatienceDecl::Kind::HazardPoly:
      j["variant"] = "hazard_poly";
      j["coeffs"] = d.coeffs;
      break;
    case PatienceDecl::Kind::CappedPoly:
      j["variant"] = "capped_poly";
      j["coeffs"] = d.coeffs;
      break;
    case PatienceDecl::Kind::ExternalTable:
      j["variant"] = "external_table";
      j["path"] = d.table_path;
      if (!d.limit_coeffs.empty()) j["limit_coeffs"] = d.limit_coeffs;
      if (!d.limit_table_path.empty()) j["limit_table"] = d.limit_table_path;
      break;
  }
  if (d.growth) {
    j["growth"] = json{{"C", d.growth->C}, {"m", d.growth->m}};
  }
  return j;
}

PatienceDecl patience_from_json(const json& j) {
  PatienceDecl d;
  if (j.is_null()) return d;
  if (!j.is_object()) throw ConfigError("patience: expected an object");
  const std::string v = j.value("variant", "none");
  if (v == "none") {
    d.kind = PatienceDecl::Kind::None;
  } else if (v == "unscaled_exponential") {
    d.kind = PatienceDecl::Kind::UnscaledExponential;
    d.beta = j.value("beta", 1.0);
  } else if (v == "unscaled_power") {
    d.kind = PatienceDecl::Kind::UnscaledPower;
    d.alpha = j.value("alpha", 0.5);
  } else if (v == "hazard_poly") {
    d.kind = PatienceDecl::Kind::HazardPoly;
    d.coeffs = j.value("coeffs", std::vector<double>{});
  } else if (v == "capped_poly") {
    d.kind = PatienceDecl::Kind::CappedPoly;
    d.coeffs = j.value("coeffs", std::vector<double>{});
  } else if (v == "external_table") {
    d.kind = PatienceDecl::Kind::ExternalTable;
    d.table_path = j.value("path", "");
    d.limit_coeffs = j.value("limit_coeffs", std::vector<double>{});
    d.limit_table_path = j.value("limit_table", "");
  } else {
    throw ConfigError("patience: unknown variant \"" + v + "\"");
  }
  if (j.contains("growth")) {
    const json& g = j.at("growth");
    d.growth = GrowthBound{g.value("C", 1.0), g.value("m", 1.0)};
  }
  return d;
}

std::string resolve_path(const std::string& base_dir, const std::string& p) {
  std::filesystem::path fp(p);
  if (fp.is_absolute() || base_dir.empty()) return p;
  return (std::filesystem::path(base_dir) / fp).string();
}

json gates_to_json(const GateSpec& g) {
  json j;
  j["moment_rel_err"] = g.moment_rel_err ? json(*g.moment_rel_err) : json(nullptr);
  j["ks"] = g.ks ? json(*g.ks) : json(nullptr);
  j["pa_rel_err"] = g.pa_rel_err ? json(*g.pa_rel_err) : json(nullptr);
  j["require_monotone_moments"] = g.require_monotone_moments;
  j["require_monotone_abandon"] = g.require_monotone_abandon;
  return j;
}

GateSpec gates_from_json(const json& j) {
  GateSpec g;
  if (!j.is_object()) return g;
  auto opt = [&](const char* k) -> std::optional<double> {
    if (!j.contains(k) || j.at(k).is_null()) return std::nullopt;
    return j.at(k).get<double>();
  };
  g.moment_rel_err = opt("moment_rel_err");
  g.ks = opt("ks");
  g.pa_rel_err = opt("pa_rel_err");
  g.require_monotone_moments = j.value("require_monotone_moments", false);
  g.require_monotone_abandon = j.value("require_monotone_abandon", false);
  return g;
}

}  // namespace

PatienceFamily PatienceDecl::build(const std::string& dir) const {
  PatienceFamily fam = PatienceFamily::none();
  switch (kind) {
    case Kind::None:
      fam = PatienceFamily::none();
      break;
    case Kind::UnscaledExponential:
      fam = PatienceFamily::unscaled_exponential(beta);
      break;
    case Kind::UnscaledPower:
      fam = PatienceFamily::unscaled_power(alpha);
      break;
    case Kind::HazardPoly:
      fam = PatienceFamily::hazard_scaled(HazardFn::poly(coeffs));
      break;
    case Kind::CappedPoly:
      fam = PatienceFamily::capped_limit(LimitFn::poly(coeffs));
      break;
    case Kind::ExternalTable: {
      if (table_path.empty()) throw ConfigError("external_table patience needs a path");
      Table t = load_table_csv(resolve_path(dir, table_path));
      std::optional<LimitFn> lim;
      if (!limit_coeffs.empty()) {
        lim = LimitFn::poly(limit_coeffs);
      } else if (!limit_table_path.empty()) {
        lim = LimitFn::table(load_table_csv(resolve_path(dir, limit_table_path)));
      }
      fam = PatienceFamily::external_table(std::move(t), lim);
      break;
    }
  }
  if (growth) fam.set_growth(*growth);
  return fam;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string dir = std::filesystem::path(path).parent_path().string();
  if (dir.empty()) dir = ".";
  return from_json_string(ss.str(), dir);
}

ExperimentConfig ExperimentConfig::from_json_string(const std::string& text,
                                                    const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");

  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  cfg.schema_version = j.value("schema_version", 0);
  if (cfg.schema_version != 1) {
    throw ConfigError("unsupported schema_version (expected 1)");
  }
  cfg.scenario = j.value("scenario", "unnamed");

  const json& m = j.value("model", json::object());
  cfg.lambda = m.value("lambda", 1.0);
  cfg.theta = m.value("theta", 0.0);
  cfg.p_moment = m.value("p", 4.0);
  if (m.contains("interarrival")) cfg.u_spec = primitive_from_json(m.at("interarrival"), "model.interarrival");
  if (m.contains("service")) cfg.v_spec = primitive_from_json(m.at("service"), "model.service");
  cfg.patience = patience_from_json(m.value("patience", json()));

  const json& e = j.value("experiment", json::object());
  cfg.n_grid = e.value("n_grid", std::vector<std::int64_t>{});
  cfg.arrivals_per_n = e.value("arrivals_per_n", std::int64_t{10000000});
  cfg.seeds_per_n = e.value("seeds_per_n", 4);
  cfg.base_seed = e.value("base_seed", std::uint64_t{1});
  cfg.burn_in_per_replication = e.value("burn_in_per_replication", std::int64_t{-1});
  cfg.num_batches = e.value("num_batches", 32);
  cfg.moment_orders = e.value("moment_orders", std::vector<double>{1.0, 2.0});
  if (e.contains("cdf_grid")) {
    const json& g = e.at("cdf_grid");
    if (g.is_array()) {
      cfg.cdf_grid = g.get<std::vector<double>>();
    } else if (g.is_object()) {
      double start = g.value("start", 0.0);
      double stop = g.value("stop", 5.0);
      int count = g.value("count", 101);
      if (count < 2 || stop <= start) throw ConfigError("cdf_grid: need count >= 2 and stop > start");
      cfg.cdf_grid.resize(count);
      for (int i = 0; i < count; ++i) {
        cfg.cdf_grid[i] = start + (stop - start) * i / (count - 1);
      }
    } else {
      throw ConfigError("cdf_grid: expected array or {start, stop, count}");
    }
  }
  cfg.x_max = e.value("x_max", 50.0);
  cfg.quad_tol = e.value("quad_tol", 1e-10);
  if (e.contains("sigma_bar") && !e.at("sigma_bar").is_null()) {
    cfg.sigma_bar = e.at("sigma_bar").get<double>();
  }
  if (e.contains("per_n")) {
    for (const auto& [key, ov] : e.at("per_n").items()) {
      PerNOverride o;
      if (ov.contains("arrivals")) o.arrivals = ov.at("arrivals").get<std::int64_t>();
      if (ov.contains("seeds")) o.seeds = ov.at("seeds").get<int>();
      if (ov.contains("burn_in")) o.burn_in = ov.at("burn_in").get<std::int64_t>();
      cfg.per_n[std::stoll(key)] = o;
    }
  }

  cfg.gates = gates_from_json(j.value("gates", json::object()));
  cfg.output_dir = j.value("output_dir", "out");
  cfg.waive_unbounded_interarrival = j.value("waive_a5", false);
  return cfg;
}

std::string ExperimentConfig::to_canonical_json() const {
  json j;
  j["schema_version"] = schema_version;
  j["scenario"] = scenario;
  json m;
  m["lambda"] = lambda;
  m["theta"] = theta;
  m["p"] = p_moment;
  m["interarrival"] = primitive_to_json(u_spec);
  m["service"] = primitive_to_json(v_spec);
  m["patience"] = patience_to_json(patience);
  j["model"] = m;
  json e;
  e["n_grid"] = n_grid;
  e["arrivals_per_n"] = arrivals_per_n;
  e["seeds_per_n"] = seeds_per_n;
  e["base_seed"] = base_seed;
  e["burn_in_per_replication"] = burn_in_per_replication;
  e["num_batches"] = num_batches;
  e["moment_orders"] = moment_orders;
  e["cdf_grid"] = cdf_grid;
  e["x_max"] = x_max;
  e["quad_tol"] = quad_tol;
  e["sigma_bar"] = sigma_bar ? json(*sigma_bar) : json(nullptr);
  json pn = json::object();
  for (const auto& [n, o] : per_n) {
    json ov = json::object();
    if (o.arrivals) ov["arrivals"] = *o.arrivals;
    if (o.seeds) ov["seeds"] = *o.seeds;
    if (o.burn_in) ov["burn_in"] = *o.burn_in;
    pn[std::to_string(n)] = ov;
  }
  e["per_n"] = pn;
  j["experiment"] = e;
  j["gates"] = gates_to_json(gates);
  j["waive_a5"] = waive_unbounded_interarrival;
  // output_dir and base_dir are presentation details, not experiment identity
  return j.dump();
}

std::string ExperimentConfig::config_hash() const {
  return hex16(fnv1a64(to_canonical_json()));
}

void ExperimentConfig::validate_shape() const {
  if (schema_version != 1) throw ConfigError("schema_version must be 1");
  if (n_grid.empty()) throw ConfigError("n_grid must be nonempty");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 1) throw ConfigError("n_grid entries must be >= 1");
    if (i > 0 && n_grid[i] <= n_grid[i - 1]) {
      throw ConfigError("n_grid must be strictly increasing");
    }
  }
  if (seeds_per_n < 1) throw ConfigError("seeds_per_n must be >= 1");
  if (arrivals_per_n < 2 * seeds_per_n) {
    throw ConfigError("arrivals_per_n too small for the seed count");
  }
  if (num_batches < 2) throw ConfigError("num_batches must be >= 2");
  if (moment_orders.empty()) throw ConfigError("moment_orders must be nonempty");
  for (double m : moment_orders) {
    if (!(m > 0.0)) throw ConfigError("moment orders must be positive");
  }
  if (cdf_grid.empty()) throw ConfigError("cdf_grid must be nonempty");
  for (std::size_t i = 0; i < cdf_grid.size(); ++i) {
    if (cdf_grid[i] < 0.0) throw ConfigError("cdf_grid entries must be >= 0");
    if (i > 0 && cdf_grid[i] <= cdf_grid[i - 1]) {
      throw ConfigError("cdf_grid must be strictly increasing");
    }
  }
  if (!(x_max > 0.0)) throw ConfigError("x_max must be positive");
  if (!(quad_tol > 0.0) || quad_tol > 1e-2) {
    throw ConfigError("quad_tol must lie in (0, 1e-2]");
  }
  for (const auto& [n, o] : per_n) {
    if (std::find(n_grid.begin(), n_grid.end(), n) == n_grid.end()) {
      throw ConfigError("per_n override for n not in n_grid: " + std::to_string(n));
    }
    if (o.arrivals && *o.arrivals < 2) throw ConfigError("per_n arrivals must be >= 2");
    if (o.seeds && *o.seeds < 1) throw ConfigError("per_n seeds must be >= 1");
  }
  for (std::int64_t n : n_grid) {
    HeavyTrafficParams p{lambda, theta, n};  // throws if mu_n <= 0
    (void)p;
  }
}

AssumptionReport validate_experiment(const ExperimentConfig& cfg) {
  AssumptionReport rep;
  try {
    cfg.validate_shape();
  } catch (const ConfigError& e) {
    rep.errors.emplace_back(e.what());
    return rep;
  }

  auto check_unit_mean = [&](const PrimitiveSpec& s, const char* name) {
    if (std::abs(s.mean() - 1.0) > 1e-12) {
      rep.errors.push_back(std::string(name) + " base distribution must have mean 1 (got " +
                           g12(s.mean()) + ")");
    }
  };
  check_unit_mean(cfg.u_spec, "interarrival");
  check_unit_mean(cfg.v_spec, "service");

  if (!(cfg.p_moment > 2.0)) {
    rep.errors.emplace_back("moments_finite: need a moment order p > 2");
  }
  rep.moments_finite = cfg.u_spec.has_finite_moment(cfg.p_moment) &&
                       cfg.v_spec.has_finite_moment(cfg.p_moment);
  if (!rep.moments_finite) {
    rep.errors.emplace_back("moments_finite: E[u^p] or E[v^p] diverges at p = " +
                            g12(cfg.p_moment));
  }
  for (double m : cfg.moment_orders) {
    if (!(m < cfg.p_moment - 1.0)) {
      rep.errors.push_back("moment order " + g12(m) +
                           " is not below p - 1 = " + g12(cfg.p_moment - 1.0) +
                           "; its stationary estimate is not covered");
    }
  }

  PatienceFamily fam = PatienceFamily::none();
  try {
    fam = cfg.build_patience();
  } catch (const std::exception& e) {
    rep.errors.push_back(std::string("patience family: ") + e.what());
    return rep;
  }

  rep.patience_limit_defined = fam.limit().defined();
  if (!rep.patience_limit_defined) {
    rep.errors.emplace_back(
        "patience_scaling_limit: the scaled patience laws have no limit function "
        "(hazard explodes at zero); no diffusion comparison is possible");
  } else {
    const std::vector<std::int64_t> audit_n = {100, 10000, 1000000};
    rep.scaling_limit = check_scaling_limit(fam, cfg.x_max, audit_n);
    if (!rep.scaling_limit.errors_nonincreasing) {
      rep.errors.emplace_back(
          "patience_scaling_limit: sup-norm errors fail to shrink along n = 1e2, 1e4, 1e6");
    }
    rep.stability = check_stability(fam, cfg.theta, cfg.lambda, cfg.x_max);
    if (fam.growth()) {
      rep.growth = check_growth_bound(fam, audit_n, cfg.x_max);
      if (!rep.growth->ok) {
        rep.errors.push_back("patience growth bound violated: C(1+x^m) with C = " +
                             g12(fam.growth()->C) + ", m = " + g12(fam.growth()->m) +
                             " fails at x = " + g12(rep.growth->witness_x) + ", n = " +
                             std::to_string(rep.growth->witness_n));
      }
    }
    rep.limit_slope_jump = fam.limit().max_slope_jump();
    if (rep.limit_slope_jump > 5.0) {
      rep.warnings.push_back(
          "tabulated limit function has sharp kinks (max adjacent slope jump " +
          g12(rep.limit_slope_jump) + "); quadrature may need a tighter tolerance");
    }
  }

  rep.interarrival_unbounded = cfg.u_spec.unbounded_support();
  if (!rep.interarrival_unbounded) {
    std::string msg =
        "unbounded_interarrival: the interarrival distribution has bounded support, so "
        "the workload cannot reach every level";
    if (cfg.waive_unbounded_interarrival) {
      rep.warnings.push_back(msg + " (waived)");
    } else {
      rep.errors.push_back(msg + "; pass --waive-a5 to run anyway");
    }
  }
  return rep;
}

namespace {

Verdicts compute_verdicts(const std::vector<ReportRow>& rows, const GateSpec& gates,
                          bool pa_meaningful) {
  Verdicts v;
  const double slack = 1e-12;
  if (!rows.empty()) {
    std::size_t orders = rows.front().moments.size();
    for (std::size_t mi = 0; mi < orders; ++mi) {
      for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].moments[mi].rel_err > rows[i - 1].moments[mi].rel_err + slack) {
          v.moments_monotone = false;
        }
      }
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].pa_rel_err > rows[i - 1].pa_rel_err + slack) v.abandon_monotone = false;
    }
    const ReportRow& last = rows.back();
    if (gates.moment_rel_err) {
      for (const MomentCell& c : last.moments) {
        if (c.rel_err > *gates.moment_rel_err) v.gate_moment = false;
      }
    }
    if (gates.ks && last.ks > *gates.ks) v.gate_ks = false;
    if (gates.pa_rel_err && pa_meaningful && last.pa_rel_err > *gates.pa_rel_err) {
      v.gate_pa = false;
    }
  }
  v.all_passed = v.gate_moment && v.gate_ks && v.gate_pa;
  if (gates.require_monotone_moments && !v.moments_monotone) v.all_passed = false;
  if (gates.require_monotone_abandon && pa_meaningful && !v.abandon_monotone) {
    v.all_passed = false;
  }
  return v;
}

struct CellSpec {
  std::size_t n_index = 0;
  int rep = 0;
  SimConfig sim;
};

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& cfg, int threads) {
  RunOutcome out;
  auto t_start = std::chrono::steady_clock::now();

  out.assumptions = validate_experiment(cfg);
  for (const std::string& w : out.assumptions.warnings) out.messages.push_back("warning: " + w);
  if (!out.assumptions.ok()) {
    out.status = RunStatus::ConfigInvalid;
    for (const std::string& e : out.assumptions.errors) out.messages.push_back("error: " + e);
    return out;
  }
  if (!out.assumptions.stability.satisfied) {
    out.status = RunStatus::Unstable;
    out.messages.push_back(
        "error: diffusion_stability: limit drift never turns negative on [0, x_max] "
        "(margin " + g12(out.assumptions.stability.margin) +
        "); the limiting diffusion has no stationary law");
    return out;
  }

  PatienceFamily fam = cfg.build_patience();
  DiffusionModel model =
      DiffusionModel::from_primitives(cfg.u_spec, cfg.v_spec, cfg.lambda, cfg.theta, fam.limit());
  DiffusionStationary stat;
  try {
    stat = build_stationary(model, cfg.quad_tol);
  } catch (const StabilityError& e) {
    out.status = RunStatus::Unstable;
    out.messages.push_back(std::string("error: ") + e.what());
    return out;
  } catch (const QuadratureError& e) {
    out.status = RunStatus::Unstable;
    out.messages.push_back(std::string("error: stationary-law quadrature failed: ") + e.what());
    return out;
  }

  ConvergenceReport rep;
  rep.scenario = cfg.scenario;
  rep.config_json = cfg.to_canonical_json();
  rep.config_hash = cfg.config_hash();
  rep.diffusion.sigma2 = model.sigma2;
  rep.diffusion.drift_const = model.drift_const;
  rep.diffusion.norm_const = stat.norm_const();
  rep.diffusion.x_cut = stat.x_cut();
  rep.diffusion.tail_bound_rel = stat.tail_bound_rel();
  for (double m : cfg.moment_orders) rep.diffusion.moments.push_back(stat.moment(m));
  rep.diffusion.expect_limit = stat.expect_limit();

  // fan (n, seed) cells onto the pool
  std::vector<CellSpec> cells;
  std::vector<int> seeds_for_n(cfg.n_grid.size());
  for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
    std::int64_t n = cfg.n_grid[ni];
    std::int64_t arrivals = cfg.arrivals_per_n;
    int seeds = cfg.seeds_per_n;
    std::int64_t burn = cfg.burn_in_per_replication;
    auto it = cfg.per_n.find(n);
    if (it != cfg.per_n.end()) {
      if (it->second.arrivals) arrivals = *it->second.arrivals;
      if (it->second.seeds) seeds = *it->second.seeds;
      if (it->second.burn_in) burn = *it->second.burn_in;
    }
    seeds_for_n[ni] = seeds;
    std::int64_t per_rep = arrivals / seeds;
    for (int r = 0; r < seeds; ++r) {
      CellSpec c;
      c.n_index = ni;
      c.rep = r;
      c.sim.u_spec = cfg.u_spec;
      c.sim.v_spec = cfg.v_spec;
      c.sim.patience = fam;
      c.sim.params = HeavyTrafficParams{cfg.lambda, cfg.theta, n};
      c.sim.num_arrivals = per_rep;
      c.sim.burn_in_arrivals = burn;
      c.sim.num_batches = cfg.num_batches;
      c.sim.moment_orders = cfg.moment_orders;
      c.sim.cdf_grid = cfg.cdf_grid;
      c.sim.seed = derive_seed(cfg.base_seed, static_cast<std::uint64_t>(ni) * 65537ULL +
                                                  static_cast<std::uint64_t>(r) + 1ULL);
      try {
        c.sim.validate();
      } catch (const ConfigError& e) {
        out.status = RunStatus::ConfigInvalid;
        out.messages.push_back(std::string("error: replication setup for n = ") +
                               std::to_string(n) + ": " + e.what());
        return out;
      }
      cells.push_back(std::move(c));
    }
  }

  int nthreads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  if (nthreads < 1) nthreads = 1;
  nthreads = std::min<int>(nthreads, static_cast<int>(cells.size()));
  std::vector<SimResult> results(cells.size());
  {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error = nullptr;
    std::mutex err_mu;
    auto worker = [&]() {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= cells.size()) break;
        try {
          results[i] = simulate(cells[i].sim);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  // deterministic merge: ascending replication index within ascending n
  for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
    std::int64_t n = cfg.n_grid[ni];
    SimResult merged;
    bool have = false;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].n_index != ni) continue;
      merged = have ? merge(merged, results[i]) : results[i];
      have = true;
    }
    for (const std::string& w : merged.warnings) {
      rep.warnings.push_back("n = " + std::to_string(n) + ": " + w);
    }

    ReportRow row;
    row.n = n;
    row.seeds = seeds_for_n[ni];
    row.sim_time = merged.sim_time;
    for (std::size_t mi = 0; mi < cfg.moment_orders.size(); ++mi) {
      MomentCell cell;
      cell.m = cfg.moment_orders[mi];
      cell.sim = merged.scaled_moments[mi].value;
      cell.ci_half = merged.scaled_moments[mi].ci_half;
      cell.diff = rep.diffusion.moments[mi];
      double denom = std::abs(cell.diff);
      cell.rel_err = denom > 1e-300 ? std::abs(cell.sim - cell.diff) / denom
                                    : std::abs(cell.sim - cell.diff);
      cell.arrival_epoch = merged.arrival_moments[mi];
      row.moments.push_back(cell);
    }
    double ks = 0.0;
    std::vector<double> diff_cdf(cfg.cdf_grid.size());
    for (std::size_t gi = 0; gi < cfg.cdf_grid.size(); ++gi) {
      diff_cdf[gi] = stat.cdf(cfg.cdf_grid[gi]);
      ks = std::max(ks, std::abs(merged.scaled_cdf[gi] - diff_cdf[gi]));
    }
    row.ks = ks;
    double sqn = merged.sqrt_n;
    row.sqrtn_pa = sqn * merged.abandon_fraction.value;
    row.pa_ci = sqn * merged.abandon_fraction.ci_half;
    row.sqrtn_plug_in = sqn * merged.plug_in_abandon;
    row.eh = rep.diffusion.expect_limit;
    row.pa_rel_err = row.eh > 1e-300 ? std::abs(row.sqrtn_pa - row.eh) / row.eh
                                     : std::abs(row.sqrtn_pa - row.eh);
    rep.rows.push_back(std::move(row));

    if (ni + 1 == cfg.n_grid.size()) {
      rep.overlay.n = n;
      rep.overlay.grid = cfg.cdf_grid;
      rep.overlay.diffusion = diff_cdf;
      rep.overlay.empirical.resize(cfg.cdf_grid.size());
      for (std::size_t gi = 0; gi < cfg.cdf_grid.size(); ++gi) {
        rep.overlay.empirical[gi] = merged.scaled_cdf[gi];
      }
    }
  }

  bool pa_meaningful = rep.diffusion.expect_limit > 1e-300;
  rep.verdicts = compute_verdicts(rep.rows, cfg.gates, pa_meaningful);

  rep.meta_timestamp = utc_now();
  rep.meta_threads = nthreads;
  rep.meta_runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  write_report_files(rep, cfg.output_dir);
  out.report = rep;
  if (!rep.verdicts.all_passed) {
    out.status = RunStatus::GateFailed;
    if (!rep.verdicts.gate_moment) out.messages.emplace_back("gate failed: moment relative error");
    if (!rep.verdicts.gate_ks) out.messages.emplace_back("gate failed: distribution distance");
    if (!rep.verdicts.gate_pa) out.messages.emplace_back("gate failed: abandonment relative error");
    if (cfg.gates.require_monotone_moments && !rep.verdicts.moments_monotone) {
      out.messages.emplace_back("gate failed: moment errors are not monotone in n");
    }
    if (cfg.gates.require_monotone_abandon && pa_meaningful && !rep.verdicts.abandon_monotone) {
      out.messages.emplace_back("gate failed: abandonment errors are not monotone in n");
    }
  }
  return out;
}

std::string report_csv(const ConvergenceReport& rep) {
  std::string s =
      "n,m,sim_moment,ci_half,diff_moment,rel_err,ks,sqrtn_pa,pa_ci,eh,pa_rel_err,"
      "seeds,sim_time_s\n";
  for (const ReportRow& r : rep.rows) {
    for (const MomentCell& c : r.moments) {
      s += std::to_string(r.n);
      s += ',';
      s += g12(c.m);
      s += ',';
      s += g12(c.sim);
      s += ',';
      s += g12(c.ci_half);
      s += ',';
      s += g12(c.diff);
      s += ',';
      s += g12(c.rel_err);
      s += ',';
      s += g12(r.ks);
      s += ',';
      s += g12(r.sqrtn_pa);
      s += ',';
      s += g12(r.pa_ci);
      s += ',';
      s += g12(r.eh);
      s += ',';
      s += g12(r.pa_rel_err);
      s += ',';
      s += std::to_string(r.seeds);
      s += ',';
      s += g12(r.sim_time);
      s += '\n';
    }
  }
  return s;
}

namespace {

json row_to_json(const ReportRow& r) {
  json j;
  j["n"] = r.n;
  j["seeds"] = r.seeds;
  j["sim_time_s"] = r.sim_time;
  j["ks"] = r.ks;
  j["sqrtn_pa"] = r.sqrtn_pa;
  j["pa_ci"] = r.pa_ci;
  j["sqrtn_plug_in"] = r.sqrtn_plug_in;
  j["eh"] = r.eh;
  j["pa_rel_err"] = r.pa_rel_err;
  json ms = json::array();
  for (const MomentCell& c : r.moments) {
    ms.push_back(json{{"m", c.m},
                      {"sim", c.sim},
                      {"ci_half", c.ci_half},
                      {"diff", c.diff},
                      {"rel_err", c.rel_err},
                      {"arrival_epoch", c.arrival_epoch}});
  }
  j["moments"] = ms;
  return j;
}

ReportRow row_from_json(const json& j) {
  ReportRow r;
  r.n = j.value("n", std::int64_t{0});
  r.seeds = j.value("seeds", 0);
  r.sim_time = j.value("sim_time_s", 0.0);
  r.ks = j.value("ks", 0.0);
  r.sqrtn_pa = j.value("sqrtn_pa", 0.0);
  r.pa_ci = j.value("pa_ci", 0.0);
  r.sqrtn_plug_in = j.value("sqrtn_plug_in", 0.0);
  r.eh = j.value("eh", 0.0);
  r.pa_rel_err = j.value("pa_rel_err", 0.0);
  for (const json& c : j.value("moments", json::array())) {
    MomentCell cell;
    cell.m = c.value("m", 0.0);
    cell.sim = c.value("sim", 0.0);
    cell.ci_half = c.value("ci_half", 0.0);
    cell.diff = c.value("diff", 0.0);
    cell.rel_err = c.value("rel_err", 0.0);
    cell.arrival_epoch = c.value("arrival_epoch", 0.0);
    r.moments.push_back(cell);
  }
  return r;
}

}  // namespace

std::string report_json(const ConvergenceReport& rep) {
  json j;
  j["schema_version"] = rep.schema_version;
  j["scenario"] = rep.scenario;
  j["config_hash"] = rep.config_hash;
  try {
    j["config"] = json::parse(rep.config_json);
  } catch (const std::exception&) {
    j["config"] = rep.config_json;
  }
  json d;
  d["sigma2"] = rep.diffusion.sigma2;
  d["drift_const"] = rep.diffusion.drift_const;
  d["norm_const"] = rep.diffusion.norm_const;
  d["x_cut"] = rep.diffusion.x_cut;
  d["tail_bound_rel"] = rep.diffusion.tail_bound_rel;
  d["moments"] = rep.diffusion.moments;
  d["expect_limit"] = rep.diffusion.expect_limit;
  j["diffusion"] = d;
  json rows = json::array();
  for (const ReportRow& r : rep.rows) rows.push_back(row_to_json(r));
  j["rows"] = rows;
  j["cdf_overlay"] = json{{"n", rep.overlay.n},
                          {"grid", rep.overlay.grid},
                          {"empirical", rep.overlay.empirical},
                          {"diffusion", rep.overlay.diffusion}};
  j["verdicts"] = json{{"moments_monotone", rep.verdicts.moments_monotone},
                       {"abandon_monotone", rep.verdicts.abandon_monotone},
                       {"gate_moment", rep.verdicts.gate_moment},
                       {"gate_ks", rep.verdicts.gate_ks},
                       {"gate_pa", rep.verdicts.gate_pa},
                       {"all_passed", rep.verdicts.all_passed}};
  j["warnings"] = rep.warnings;
  // volatile block: excluded from any determinism contract
  j["meta"] = json{{"timestamp", rep.meta_timestamp},
                   {"runtime_s", rep.meta_runtime_s},
                   {"threads", rep.meta_threads}};
  return j.dump(2);
}

void write_report_files(const ConvergenceReport& rep, const std::string& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(std::filesystem::path(dir) / "report.csv", std::ios::binary);
    f << report_csv(rep);
  }
  {
    std::ofstream f(std::filesystem::path(dir) / "report.json", std::ios::binary);
    f << report_json(rep) << '\n';
  }
}

ConvergenceReport read_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open report file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("report is not valid JSON: ") + e.what());
  }
  ConvergenceReport rep;
  rep.schema_version = j.value("schema_version", 0);
  if (rep.schema_version != 1) throw ConfigError("unsupported report schema_version");
  rep.scenario = j.value("scenario", "");
  rep.config_hash = j.value("config_hash", "");
  if (j.contains("config")) {
    rep.config_json = j.at("config").is_string() ? j.at("config").get<std::string>()
                                                 : j.at("config").dump();
  }
  const json& d = j.value("diffusion", json::object());
  rep.diffusion.sigma2 = d.value("sigma2", 0.0);
  rep.diffusion.drift_const = d.value("drift_const", 0.0);
  rep.diffusion.norm_const = d.value("norm_const", 0.0);
  rep.diffusion.x_cut = d.value("x_cut", 0.0);
  rep.diffusion.tail_bound_rel = d.value("tail_bound_rel", 0.0);
  rep.diffusion.moments = d.value("moments", std::vector<double>{});
  rep.diffusion.expect_limit = d.value("expect_limit", 0.0);
  for (const json& r : j.value("rows", json::array())) rep.rows.push_back(row_from_json(r));
  const json& ov = j.value("cdf_overlay", json::object());
  rep.overlay.n = ov.value("n", std::int64_t{0});
  rep.overlay.grid = ov.value("grid", std::vector<double>{});
  rep.overlay.empirical = ov.value("empirical", std::vector<double>{});
  rep.overlay.diffusion = ov.value("diffusion", std::vector<double>{});
  const json& v = j.value("verdicts", json::object());
  rep.verdicts.moments_monotone = v.value("moments_monotone", true);
  rep.verdicts.abandon_monotone = v.value("abandon_monotone", true);
  rep.verdicts.gate_moment = v.value("gate_moment", true);
  rep.verdicts.gate_ks = v.value("gate_ks", true);
  rep.verdicts.gate_pa = v.value("gate_pa", true);
  rep.verdicts.all_passed = v.value("all_passed", true);
  rep.warnings = j.value("warnings", std::vector<std::string>{});
  const json& meta = j.value("meta", json::object());
  rep.meta_timestamp = meta.value("timestamp", "");
  rep.meta_runtime_s = meta.value("runtime_s", 0.0);
  rep.meta_threads = meta.value("threads", 0);
  return rep;
}

ConvergenceReport merge_reports(const ConvergenceReport& a, const ConvergenceReport& b) {
  if (a.config_hash != b.config_hash) {
    throw ConfigError("refusing to merge reports with different config hashes (" +
                      a.config_hash + " vs " + b.config_hash + ")");
  }
  ConvergenceReport out = a;
  out.rows.insert(out.rows.end(), b.rows.begin(), b.rows.end());
  std::sort(out.rows.begin(), out.rows.end(),
            [](const ReportRow& x, const ReportRow& y) { return x.n < y.n; });
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    if (out.rows[i].n == out.rows[i - 1].n) {
      throw ConfigError("refusing to merge reports with overlapping n = " +
                        std::to_string(out.rows[i].n));
    }
  }
  out.overlay = (b.overlay.n > a.overlay.n) ? b.overlay : a.overlay;
  out.warnings.insert(out.warnings.end(), b.warnings.begin(), b.warnings.end());
  GateSpec gates;
  try {
    gates = gates_from_json(json::parse(out.config_json).value("gates", json::object()));
  } catch (const std::exception&) {
    // no usable gate spec in the echo: keep defaults (everything passes)
  }
  out.verdicts = compute_verdicts(out.rows, gates, out.diffusion.expect_limit > 1e-300);
  out.meta_timestamp.clear();
  out.meta_runtime_s = 0.0;
  out.meta_threads = 0;
  return out;
}

}  // namespace abq
