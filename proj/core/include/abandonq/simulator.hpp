#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "abandonq/patience.hpp"
#include "abandonq/primitives.hpp"
#include "abandonq/scaling.hpp"

namespace abq {

// One arrival of the offered-waiting-time recursion.  The arriving customer
// sees workload v_pre; it joins (adding its service time) exactly when its
// patience strictly exceeds what it sees, ties abandon.  Between arrivals the
// workload drains at unit rate and is floored at zero.
struct StepResult {
  double v_post;       // workload right after the arrival
  double v_next_pre;   // workload seen by the next arrival, u_next later
  bool abandoned;
};

StepResult step(double v_pre, double u_next, double service, double patience);

// Exact per-segment statistics for V(s) = max(v_start - s, 0), s in [0, duration]:
//   moment_integrals[k] = int_0^duration V(s)^{m_k} ds   (closed form)
//   time_below[i]       = Leb{s : V(s) <= grid[i]}       (closed form)
struct SegmentStats {
  std::vector<double> moment_integrals;
  std::vector<double> time_below;
};

SegmentStats accumulate_segment(double v_start, double duration,
                                std::span<const double> moment_orders,
                                std::span<const double> grid);

struct SimConfig {
  PrimitiveSpec u_spec;            // interarrival base, mean 1
  PrimitiveSpec v_spec;            // service base, mean 1
  PatienceFamily patience = PatienceFamily::none();
  HeavyTrafficParams params;

  std::int64_t num_arrivals = 1000000;
  std::int64_t burn_in_arrivals = -1;  // < 0: default max(num/10, 1e4), capped
  int num_batches = 32;
  std::vector<double> moment_orders = {1.0, 2.0};
  std::vector<double> cdf_grid;        // thresholds for sqrt(n)*V, strictly increasing
  std::uint64_t seed = 1;

  // (tau_0, V_0): time of the first arrival and initial workload.  Default:
  // tau_0 is a fresh interarrival draw, V_0 = 0.
  std::optional<std::pair<double, double>> initial_state;

  // Optional per-event CSV (event_time, v_pre, v_post, abandoned), capped at
  // 1e6 rows.
  std::optional<std::string> path_dump;

  void validate() const;
  std::int64_t resolved_burn_in() const;
  std::int64_t batch_size() const;     // (num - burn)/num_batches, truncated
  std::int64_t arrivals_used() const;  // batch_size * num_batches
};

struct Estimate {
  double value = 0.0;
  double ci_half = 0.0;  // 3-sigma batch-means half-width
};

// Per-batch raw sums; kept so merged results can rebuild batch-means CIs.
struct BatchRecord {
  double time_w = 0.0;                   // batch span in drain-scaled time
  std::vector<double> moment_integrals;  // per moment order, scaled units
  std::int64_t arrivals = 0;
  std::int64_t abandoned = 0;
};

// Conservation bookkeeping over the full horizon (not just the measurement
// window); meaningful for single replications only.
struct SimDiagnostics {
  double v_initial = 0.0;
  double v_final = 0.0;
  double elapsed = 0.0;
  double busy_time = 0.0;
  double idle_time = 0.0;
  double accepted_work = 0.0;
  std::int64_t accepted = 0;
};

struct SimResult {
  // echo of what the numbers mean
  std::vector<double> moment_orders;
  std::vector<double> cdf_grid;
  double sqrt_n = 1.0;

  // headline statistics, diffusion-scaled (moments of sqrt(n) * V)
  std::vector<Estimate> scaled_moments;   // time-weighted
  std::vector<double> arrival_moments;    // averages over arrival epochs V(t_j-)
  std::vector<double> scaled_cdf;         // time-weighted P(sqrt(n) V <= g)
  Estimate abandon_fraction;              // abandoned / arrivals (direct count)
  double plug_in_abandon = 0.0;           // mean of F^n(V(t_j-)) over arrivals
  double sim_time = 0.0;                  // measurement window, model time units
  std::int64_t arrivals_used = 0;
  std::int64_t abandoned_count = 0;

  SimDiagnostics diag;
  bool merged = false;
  std::vector<std::string> warnings;

  // poolable raw state (drain-scaled time units)
  double total_time_w = 0.0;
  std::vector<double> moment_integrals_w;
  std::vector<double> occupancy_w;        // per cdf grid cell
  double sum_patience_cdf_pre = 0.0;      // sum of F^n(V(t_j-))
  std::vector<double> sum_arrival_pow;    // sum of (sqrt(n) V(t_j-))^m
  std::vector<BatchRecord> batches;
};

// Run the recursion for cfg.num_arrivals arrivals.  Reproducible: the same
// config and seed give a bitwise-identical result.  Stream discipline: three
// independent substreams (interarrival, service, patience); tau_0 is drawn
// first from the interarrival stream, then each arrival consumes service,
// patience, next-interarrival in that order.
SimResult simulate(const SimConfig& cfg);

struct CoupledResult {
  SimResult base;
  SimResult dominating;
  // max over event epochs (pre- and post-jump) of V - nu_max - V*, where
  // nu_max is the largest service time brought by any arrival so far; the
  // domination argument makes this <= 0 up to rounding.
  double max_violation = 0.0;
};

// Same streams for both systems; the dominating system's patience draws are
// the coupled transports of the base draws.
CoupledResult simulate_coupled(const SimConfig& cfg, const DominatingFamily& dom);

// Time-weighted pooling of replications of the same experiment (same moment
// orders, grid and scale).  Associative and order-insensitive up to float
// roundoff; estimates and CIs are rebuilt from the pooled raw state.
SimResult merge(const SimResult& a, const SimResult& b);

}  // namespace abq
