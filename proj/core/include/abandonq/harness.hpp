#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "abandonq/diffusion.hpp"
#include "abandonq/patience.hpp"
#include "abandonq/primitives.hpp"
#include "abandonq/scaling.hpp"
#include "abandonq/simulator.hpp"

namespace abq {

// Serializable description of a patience family (the closure-based variants
// stay C++-only; config files can express everything below).
struct PatienceDecl {
  enum class Kind {
    None,
    UnscaledExponential,  // beta
    UnscaledPower,        // alpha (steep at zero: no scaling limit; negative control)
    HazardPoly,           // coeffs, degree-0 first
    CappedPoly,           // coeffs of the capped limit function, coeffs[0] == 0
    ExternalTable,        // table_path (+ optional limit override)
  };
  Kind kind = Kind::None;
  double beta = 1.0;
  double alpha = 0.5;
  std::vector<double> coeffs;
  std::string table_path;
  std::vector<double> limit_coeffs;      // optional explicit limit polynomial
  std::string limit_table_path;          // or tabulated limit
  std::optional<GrowthBound> growth;

  // base_dir resolves relative table paths (directory of the config file)
  PatienceFamily build(const std::string& base_dir) const;
};

struct GateSpec {
  std::optional<double> moment_rel_err;  // applied at the largest n, every order
  std::optional<double> ks;              // grid-KS at the largest n
  std::optional<double> pa_rel_err;      // scaled abandonment error at largest n
  bool require_monotone_moments = false;
  bool require_monotone_abandon = false;
};

struct PerNOverride {
  std::optional<std::int64_t> arrivals;
  std::optional<int> seeds;
  std::optional<std::int64_t> burn_in;
};

struct ExperimentConfig {
  int schema_version = 1;
  std::string scenario = "unnamed";

  double lambda = 1.0;
  double theta = 0.0;
  double p_moment = 4.0;  // moment-finiteness order; moment orders live below it
  PrimitiveSpec u_spec = PrimitiveSpec::exponential();
  PrimitiveSpec v_spec = PrimitiveSpec::exponential();
  PatienceDecl patience;

  std::vector<std::int64_t> n_grid;
  std::int64_t arrivals_per_n = 10000000;  // total, split across the seeds
  int seeds_per_n = 4;
  std::uint64_t base_seed = 1;
  std::int64_t burn_in_per_replication = -1;  // < 0: simulator default
  int num_batches = 32;
  std::vector<double> moment_orders = {1.0, 2.0};
  std::vector<double> cdf_grid;  // scaled-workload thresholds
  double x_max = 50.0;
  double quad_tol = 1e-10;
  std::optional<double> sigma_bar;
  std::map<std::int64_t, PerNOverride> per_n;

  GateSpec gates;
  std::string output_dir = "out";
  bool waive_unbounded_interarrival = false;  // the CLI's --waive-a5
  std::string base_dir = ".";                 // for relative table paths

  static ExperimentConfig from_json_file(const std::string& path);
  static ExperimentConfig from_json_string(const std::string& text,
                                           const std::string& base_dir = ".");
  // canonical serialized form (sorted keys, output_dir stripped); the config
  // hash is FNV-1a64 of this string
  std::string to_canonical_json() const;
  std::string config_hash() const;

  PatienceFamily build_patience() const { return patience.build(base_dir); }
  void validate_shape() const;  // structural sanity, throws ConfigError
};

// Model-assumption audit, run before any simulation.
struct AssumptionReport {
  bool moments_finite = true;            // E[u^p], E[v^p] < inf
  bool patience_limit_defined = true;
  ScalingLimitReport scaling_limit;      // sup-errors over the n grid
  StabilityReport stability;             // limit-drift dominance proxy
  std::optional<GrowthBoundReport> growth;
  bool interarrival_unbounded = true;
  double limit_slope_jump = 0.0;         // smoothness diagnostic for tables
  std::vector<std::string> errors;       // hard config failures
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
};

AssumptionReport validate_experiment(const ExperimentConfig& cfg);

struct MomentCell {
  double m = 0.0;
  double sim = 0.0;
  double ci_half = 0.0;
  double diff = 0.0;
  double rel_err = 0.0;
  double arrival_epoch = 0.0;  // arrival-seen counterpart of sim
};

struct ReportRow {
  std::int64_t n = 0;
  std::vector<MomentCell> moments;
  double ks = 0.0;
  double sqrtn_pa = 0.0;       // sqrt(n) * direct abandonment fraction
  double pa_ci = 0.0;
  double sqrtn_plug_in = 0.0;  // sqrt(n) * mean F^n(V(t_j-))
  double eh = 0.0;             // E[H(V(inf))] under the stationary law
  double pa_rel_err = 0.0;
  int seeds = 0;
  double sim_time = 0.0;       // simulated model time in the window
};

struct CdfOverlay {
  std::int64_t n = 0;
  std::vector<double> grid;
  std::vector<double> empirical;
  std::vector<double> diffusion;
};

struct Verdicts {
  bool moments_monotone = true;   // rel errors nonincreasing along the n grid
  bool abandon_monotone = true;
  bool gate_moment = true;
  bool gate_ks = true;
  bool gate_pa = true;
  bool all_passed = true;
};

struct DiffusionSummary {
  double sigma2 = 0.0;
  double drift_const = 0.0;
  double norm_const = 0.0;
  double x_cut = 0.0;
  double tail_bound_rel = 0.0;
  std::vector<double> moments;  // aligned with moment_orders
  double expect_limit = 0.0;
};

struct ConvergenceReport {
  int schema_version = 1;
  std::string scenario;
  std::string config_hash;
  std::string config_json;  // canonical echo
  DiffusionSummary diffusion;
  std::vector<ReportRow> rows;  // ascending n
  CdfOverlay overlay;           // at the largest n
  Verdicts verdicts;
  std::vector<std::string> warnings;
  // volatile block: never part of the deterministic surface
  std::string meta_timestamp;
  double meta_runtime_s = 0.0;
  int meta_threads = 0;
};

enum class RunStatus : int {
  Ok = 0,
  GateFailed = 1,
  ConfigInvalid = 2,
  Unstable = 3,
};

struct RunOutcome {
  RunStatus status = RunStatus::Ok;
  ConvergenceReport report;  // populated when status is Ok or GateFailed
  AssumptionReport assumptions;
  std::vector<std::string> messages;
};

// Full pipeline: audit assumptions, solve the stationary law, fan (n, seed)
// cells onto a worker pool, merge deterministically (ascending seed within
// ascending n), gate, and write report.csv / report.json under output_dir.
// threads == 0 picks hardware concurrency.  Never throws for config/stability
// problems; those come back as the status.
RunOutcome run_experiment(const ExperimentConfig& cfg, int threads = 0);

// CSV with the fixed column set
//   n,m,sim_moment,ci_half,diff_moment,rel_err,ks,sqrtn_pa,pa_ci,eh,
//   pa_rel_err,seeds,sim_time_s
// one row per (n, moment order); byte-identical across reruns of the same
// config and seeds.
std::string report_csv(const ConvergenceReport& rep);
void write_report_files(const ConvergenceReport& rep, const std::string& dir);
std::string report_json(const ConvergenceReport& rep);
ConvergenceReport read_report_json(const std::string& path);

// Pool rows of two shards of the same experiment (identical config hash —
// anything else refuses); monotonicity verdicts are recomputed, gates are
// re-evaluated against the embedded config's gate spec.
ConvergenceReport merge_reports(const ConvergenceReport& a, const ConvergenceReport& b);

// SVG renderings: error_vs_n.svg, cdf_overlay.svg, abandonment.svg
void emit_plots(const ConvergenceReport& rep, const std::string& dir);

}  // namespace abq
