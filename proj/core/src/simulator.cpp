#include "abandonq/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "abandonq/quadrature.hpp"
#include "abandonq/rng.hpp"

namespace abq {

namespace {

constexpr std::int64_t kPathDumpCap = 1000000;

// m+1 powers with fast paths for the small integer orders that dominate use
struct MomentPow {
  double mp1;  // m + 1
  int imp1;    // m + 1 when m is a small integer, else 0
};

std::vector<MomentPow> make_pows(const std::vector<double>& orders) {
  std::vector<MomentPow> out;
  out.reserve(orders.size());
  for (double m : orders) {
    MomentPow p{m + 1.0, 0};
    const double r = std::round(m);
    if (std::abs(m - r) < 1e-12 && r >= 1.0 && r <= 4.0) {
      p.imp1 = static_cast<int>(r) + 1;
    }
    out.push_back(p);
  }
  return out;
}

inline double pow_mp1(double x, const MomentPow& p) {
  switch (p.imp1) {
    case 2: return x * x;
    case 3: return x * x * x;
    case 4: { const double x2 = x * x; return x2 * x2; }
    case 5: { const double x2 = x * x; return x2 * x2 * x; }
    default: return std::pow(x, p.mp1);
  }
}

// Window statistics engine.  Works in drain-scaled units (w = sqrt(n) * t,
// workload sqrt(n) * V), where the path still drains at unit rate; ratios of
// integrals to time are unit-free, so nothing needs scaling back except the
// reported wall of simulated time.
struct ScaledAccum {
  int num_batches;
  std::int64_t batch_size;
  const std::vector<double>* grid;
  std::vector<MomentPow> pows;

  std::vector<Kahan> batch_time;
  std::vector<std::vector<Kahan>> batch_mom;  // [batch][moment]
  std::vector<std::int64_t> batch_arrivals;
  std::vector<std::int64_t> batch_abandoned;

  // occupancy-below-threshold difference arrays (see segment())
  std::vector<double> occ_const;
  std::vector<double> occ_coef;

  Kahan sum_fn_pre;
  std::vector<Kahan> sum_pow_pre;

  ScaledAccum(const std::vector<double>& orders, const std::vector<double>& g,
              int K, std::int64_t bs)
      : num_batches(K),
        batch_size(bs),
        grid(&g),
        pows(make_pows(orders)),
        batch_time(K),
        batch_mom(K, std::vector<Kahan>(orders.size())),
        batch_arrivals(K, 0),
        batch_abandoned(K, 0),
        occ_const(g.size() + 1, 0.0),
        occ_coef(g.size() + 1, 0.0),
        sum_pow_pre(orders.size()) {}

  void arrival(int b, double v_pre_s, double fn_pre, bool abandoned) {
    ++batch_arrivals[b];
    if (abandoned) ++batch_abandoned[b];
    sum_fn_pre.add(fn_pre);
    for (std::size_t k = 0; k < pows.size(); ++k) {
      // (sqrt(n) V_pre)^m = pow_mp1 / V_pre would divide; compute directly
      const double m = pows[k].mp1 - 1.0;
      double val;
      switch (pows[k].imp1) {
        case 2: val = v_pre_s; break;
        case 3: val = v_pre_s * v_pre_s; break;
        case 4: val = v_pre_s * v_pre_s * v_pre_s; break;
        case 5: { const double x2 = v_pre_s * v_pre_s; val = x2 * x2; break; }
        default: val = std::pow(v_pre_s, m); break;
      }
      sum_pow_pre[k].add(val);
    }
  }

  // One linear drain segment: workload a at the start, duration dw, both in
  // scaled units.  Moment integrals use the closed form
  //   int (a - w)_+^m dw = (a^{m+1} - (a - dw)_+^{m+1}) / (m+1),
  // occupancy below threshold c is dw - min(dw, (a - c)_+), encoded into two
  // difference arrays (constant part and coefficient of c) so the per-segment
  // cost is two binary searches and four writes regardless of grid size.
  void segment(int b, double a, double dw) {
    batch_time[b].add(dw);
    if (a > 0.0) {
      const double e = a > dw ? a - dw : 0.0;
      for (std::size_t k = 0; k < pows.size(); ++k) {
        const double hi = pow_mp1(a, pows[k]);
        const double lo = e > 0.0 ? pow_mp1(e, pows[k]) : 0.0;
        batch_mom[b][k].add((hi - lo) / pows[k].mp1);
      }
    }
    const auto& g = *grid;
    if (!g.empty()) {
      const auto lo_it = std::lower_bound(g.begin(), g.end(), a - dw);
      const auto hi_it = std::lower_bound(lo_it, g.end(), a);
      const auto lo = static_cast<std::size_t>(lo_it - g.begin());
      const auto hi = static_cast<std::size_t>(hi_it - g.begin());
      occ_const[lo] += dw - a;
      occ_const[hi] += a;
      occ_coef[lo] += 1.0;
      occ_coef[hi] -= 1.0;
    }
  }

  void fill(SimResult& r) const {
    const std::size_t M = pows.size();
    r.batches.reserve(num_batches);
    Kahan ttime;
    std::vector<Kahan> tmom(M);
    std::int64_t arrivals = 0, abandoned = 0;
    for (int b = 0; b < num_batches; ++b) {
      BatchRecord rec;
      rec.time_w = batch_time[b].value();
      rec.moment_integrals.resize(M);
      for (std::size_t k = 0; k < M; ++k) {
        rec.moment_integrals[k] = batch_mom[b][k].value();
        tmom[k].add(rec.moment_integrals[k]);
      }
      rec.arrivals = batch_arrivals[b];
      rec.abandoned = batch_abandoned[b];
      ttime.add(rec.time_w);
      arrivals += rec.arrivals;
      abandoned += rec.abandoned;
      r.batches.push_back(std::move(rec));
    }
    r.total_time_w = ttime.value();
    r.moment_integrals_w.resize(M);
    for (std::size_t k = 0; k < M; ++k) r.moment_integrals_w[k] = tmom[k].value();
    r.arrivals_used = arrivals;
    r.abandoned_count = abandoned;
    r.sum_patience_cdf_pre = sum_fn_pre.value();
    r.sum_arrival_pow.resize(M);
    for (std::size_t k = 0; k < M; ++k) r.sum_arrival_pow[k] = sum_pow_pre[k].value();
    // prefix-sum the difference arrays into occupancy per grid cell
    const auto& g = *grid;
    r.occupancy_w.assign(g.size(), 0.0);
    double run_const = 0.0, run_coef = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      run_const += occ_const[i];
      run_coef += occ_coef[i];
      r.occupancy_w[i] = run_const + g[i] * run_coef;
    }
  }
};

// Rebuild the derived estimates (values, CIs, CDF, averages) from the pooled
// raw state; shared by simulate() and merge().
void finalize_estimates(SimResult& r) {
  const std::size_t M = r.moment_orders.size();
  r.scaled_moments.assign(M, Estimate{});
  r.arrival_moments.assign(M, 0.0);
  r.scaled_cdf.assign(r.cdf_grid.size(), 0.0);

  for (std::size_t k = 0; k < M; ++k) {
    if (r.total_time_w > 0.0) {
      r.scaled_moments[k].value = r.moment_integrals_w[k] / r.total_time_w;
    }
    if (r.arrivals_used > 0) {
      r.arrival_moments[k] = r.sum_arrival_pow[k] / static_cast<double>(r.arrivals_used);
    }
  }
  if (r.total_time_w > 0.0) {
    for (std::size_t i = 0; i < r.cdf_grid.size(); ++i) {
      r.scaled_cdf[i] = std::clamp(r.occupancy_w[i] / r.total_time_w, 0.0, 1.0);
    }
  }
  r.abandon_fraction = Estimate{};
  if (r.arrivals_used > 0) {
    r.abandon_fraction.value =
        static_cast<double>(r.abandoned_count) / static_cast<double>(r.arrivals_used);
    r.plug_in_abandon = r.sum_patience_cdf_pre / static_cast<double>(r.arrivals_used);
  }
  r.sim_time = r.total_time_w / r.sqrt_n;

  // batch-means 3-sigma half-widths over every usable batch
  std::size_t zero_batches = 0;
  for (std::size_t k = 0; k <= M; ++k) {  // k == M: abandonment fraction
    std::vector<double> means;
    means.reserve(r.batches.size());
    for (const auto& b : r.batches) {
      if (k < M) {
        if (b.time_w > 0.0) means.push_back(b.moment_integrals[k] / b.time_w);
      } else if (b.arrivals > 0) {
        means.push_back(static_cast<double>(b.abandoned) / static_cast<double>(b.arrivals));
      }
    }
    if (k == 0) {
      zero_batches = r.batches.size() - means.size();
    }
    double ci = 0.0;
    if (means.size() >= 2) {
      double mean = 0.0;
      for (double x : means) mean += x;
      mean /= static_cast<double>(means.size());
      double ss = 0.0;
      for (double x : means) ss += (x - mean) * (x - mean);
      const double sd = std::sqrt(ss / static_cast<double>(means.size() - 1));
      ci = 3.0 * sd / std::sqrt(static_cast<double>(means.size()));
    }
    if (k < M) {
      r.scaled_moments[k].ci_half = ci;
    } else {
      r.abandon_fraction.ci_half = ci;
    }
  }
  if (zero_batches > 0) {
    std::ostringstream os;
    os << zero_batches << " batch(es) spanned zero time; excluded from CIs";
    r.warnings.push_back(os.str());
  }
}

struct PathDumper {
  std::ofstream out;
  std::int64_t rows = 0;
  bool truncated = false;

  explicit PathDumper(const std::string& path) : out(path) {
    if (!out) throw ConfigError("cannot open path dump file: " + path);
    out << "event_time,v_pre,v_post,abandoned\n";
  }
  void row(double t, double v_pre, double v_post, bool abandoned) {
    if (rows >= kPathDumpCap) {
      truncated = true;
      return;
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g,%d\n", t, v_pre, v_post,
                  abandoned ? 1 : 0);
    out << buf;
    ++rows;
  }
};

}  // namespace

StepResult step(double v_pre, double u_next, double service, double patience) {
  StepResult s;
  s.abandoned = v_pre >= patience;  // ties abandon: joining needs v_pre < patience
  s.v_post = s.abandoned ? v_pre : v_pre + service;
  const double drained = s.v_post - u_next;
  s.v_next_pre = drained > 0.0 ? drained : 0.0;
  return s;
}

SegmentStats accumulate_segment(double v_start, double duration,
                                std::span<const double> moment_orders,
                                std::span<const double> grid) {
  if (!(v_start >= 0.0) || !(duration >= 0.0)) {
    throw ConfigError("accumulate_segment: v_start and duration must be >= 0");
  }
  SegmentStats s;
  const double e = v_start > duration ? v_start - duration : 0.0;
  s.moment_integrals.reserve(moment_orders.size());
  for (double m : moment_orders) {
    if (!(m > 0.0)) throw ConfigError("accumulate_segment: moment orders must be > 0");
    const double hi = std::pow(v_start, m + 1.0);
    const double lo = std::pow(e, m + 1.0);
    s.moment_integrals.push_back((hi - lo) / (m + 1.0));
  }
  s.time_below.reserve(grid.size());
  for (double c : grid) {
    const double above = std::min(duration, std::max(0.0, v_start - c));
    s.time_below.push_back(duration - above);
  }
  return s;
}

void SimConfig::validate() const {
  if (num_arrivals < 2) throw ConfigError("sim config: need at least 2 arrivals");
  const std::int64_t burn = resolved_burn_in();
  if (burn < 0 || burn >= num_arrivals) {
    throw ConfigError("sim config: burn-in must lie in [0, num_arrivals)");
  }
  if (num_batches < 2) throw ConfigError("sim config: need at least 2 batches");
  if (batch_size() < 1) {
    throw ConfigError("sim config: num_batches exceeds post-burn-in arrivals");
  }
  for (double m : moment_orders) {
    if (!(m > 0.0)) throw ConfigError("sim config: moment orders must be > 0");
  }
  for (std::size_t i = 0; i < cdf_grid.size(); ++i) {
    if (cdf_grid[i] < 0.0) throw ConfigError("sim config: cdf grid values must be >= 0");
    if (i > 0 && !(cdf_grid[i] > cdf_grid[i - 1])) {
      throw ConfigError("sim config: cdf grid must be strictly increasing");
    }
  }
  if (initial_state) {
    if (!(initial_state->first >= 0.0) || !(initial_state->second >= 0.0)) {
      throw ConfigError("sim config: initial state (tau0, V0) must be nonnegative");
    }
  }
  // params construction already guarantees mu_n > 0; re-derive to be safe
  HeavyTrafficParams check(params.lambda, params.theta, params.n);
  (void)check;
}

std::int64_t SimConfig::resolved_burn_in() const {
  if (burn_in_arrivals >= 0) return burn_in_arrivals;
  const std::int64_t tenth = num_arrivals / 10;
  return std::min(std::max(tenth, static_cast<std::int64_t>(10000)), num_arrivals / 2);
}

std::int64_t SimConfig::batch_size() const {
  return (num_arrivals - resolved_burn_in()) / num_batches;
}

std::int64_t SimConfig::arrivals_used() const {
  return batch_size() * num_batches;
}

namespace {

SimResult make_shell(const SimConfig& cfg) {
  SimResult r;
  r.moment_orders = cfg.moment_orders;
  r.cdf_grid = cfg.cdf_grid;
  r.sqrt_n = cfg.params.sqrt_n();
  return r;
}

}  // namespace

SimResult simulate(const SimConfig& cfg) {
  cfg.validate();
  const double s = cfg.params.sqrt_n();
  const double ia_scale = cfg.params.interarrival_scale();
  const double sv_scale = cfg.params.service_scale();
  const std::int64_t burn = cfg.resolved_burn_in();
  const std::int64_t used = cfg.arrivals_used();
  const std::int64_t bs = cfg.batch_size();

  Rng ru(derive_seed(cfg.seed, 1));
  Rng rv(derive_seed(cfg.seed, 2));
  Rng rd(derive_seed(cfg.seed, 3));

  SimResult r = make_shell(cfg);
  ScaledAccum acc(cfg.moment_orders, cfg.cdf_grid, cfg.num_batches, bs);

  std::optional<PathDumper> dump;
  if (cfg.path_dump) dump.emplace(*cfg.path_dump);

  double tau0, v0;
  if (cfg.initial_state) {
    tau0 = cfg.initial_state->first;
    v0 = cfg.initial_state->second;
  } else {
    tau0 = cfg.u_spec.sample(ru) * ia_scale;
    v0 = 0.0;
  }

  Kahan elapsed, busy, idle, accepted_work;
  r.diag.v_initial = v0;

  // segment before the first arrival: pure drain from v0
  elapsed.add(tau0);
  busy.add(std::min(tau0, v0));
  idle.add(tau0 - std::min(tau0, v0));
  double v_pre = v0 > tau0 ? v0 - tau0 : 0.0;
  double clock = tau0;

  for (std::int64_t j = 1; j <= cfg.num_arrivals; ++j) {
    const double service = cfg.v_spec.sample(rv) * sv_scale;
    const double patience = cfg.patience.sample(cfg.params.n, rd);
    const bool abandoned = v_pre >= patience;
    const double v_post = abandoned ? v_pre : v_pre + service;
    const double u_next = cfg.u_spec.sample(ru) * ia_scale;

    if (!abandoned) {
      ++r.diag.accepted;
      accepted_work.add(service);
    }
    if (dump) dump->row(clock, v_pre, v_post, abandoned);

    if (j > burn && j <= burn + used) {
      const int b = static_cast<int>((j - burn - 1) / bs);
      acc.arrival(b, s * v_pre, cfg.patience.cdf(cfg.params.n, v_pre), abandoned);
      acc.segment(b, s * v_post, s * u_next);
    }

    const double seg_busy = std::min(u_next, v_post);
    busy.add(seg_busy);
    idle.add(u_next - seg_busy);
    elapsed.add(u_next);
    clock += u_next;
    v_pre = v_post > u_next ? v_post - u_next : 0.0;
  }

  acc.fill(r);
  r.diag.v_final = v_pre;
  r.diag.elapsed = elapsed.value();
  r.diag.busy_time = busy.value();
  r.diag.idle_time = idle.value();
  r.diag.accepted_work = accepted_work.value();
  if (dump && dump->truncated) {
    r.warnings.push_back("path dump truncated at 1e6 rows");
  }
  finalize_estimates(r);
  return r;
}

CoupledResult simulate_coupled(const SimConfig& cfg, const DominatingFamily& dom) {
  cfg.validate();
  const double s = cfg.params.sqrt_n();
  const double ia_scale = cfg.params.interarrival_scale();
  const double sv_scale = cfg.params.service_scale();
  const std::int64_t n = cfg.params.n;
  const std::int64_t burn = cfg.resolved_burn_in();
  const std::int64_t used = cfg.arrivals_used();
  const std::int64_t bs = cfg.batch_size();

  Rng ru(derive_seed(cfg.seed, 1));
  Rng rv(derive_seed(cfg.seed, 2));
  Rng rd(derive_seed(cfg.seed, 3));

  CoupledResult out;
  out.base = make_shell(cfg);
  out.dominating = make_shell(cfg);
  out.max_violation = -std::numeric_limits<double>::infinity();
  ScaledAccum acc_b(cfg.moment_orders, cfg.cdf_grid, cfg.num_batches, bs);
  ScaledAccum acc_d(cfg.moment_orders, cfg.cdf_grid, cfg.num_batches, bs);

  double tau0, v0;
  if (cfg.initial_state) {
    tau0 = cfg.initial_state->first;
    v0 = cfg.initial_state->second;
  } else {
    tau0 = cfg.u_spec.sample(ru) * ia_scale;
    v0 = 0.0;
  }

  Kahan elapsed_b, busy_b, idle_b, work_b;
  Kahan busy_d, idle_d, work_d;
  out.base.diag.v_initial = v0;
  out.dominating.diag.v_initial = v0;

  elapsed_b.add(tau0);
  const double warm_busy = std::min(tau0, v0);
  busy_b.add(warm_busy);
  idle_b.add(tau0 - warm_busy);
  busy_d.add(warm_busy);
  idle_d.add(tau0 - warm_busy);

  double vb = v0 > tau0 ? v0 - tau0 : 0.0;  // base pre-arrival workload
  double vd = vb;                           // dominating pre-arrival workload
  double nu_max = 0.0;                      // largest service brought so far

  for (std::int64_t j = 1; j <= cfg.num_arrivals; ++j) {
    const double service = cfg.v_spec.sample(rv) * sv_scale;
    const double d_base = cfg.patience.sample(n, rd);
    const double d_dom = dom.couple(n, d_base);
    const double u_next = cfg.u_spec.sample(ru) * ia_scale;

    out.max_violation = std::max(out.max_violation, vb - nu_max - vd);
    nu_max = std::max(nu_max, service);

    const bool ab_b = vb >= d_base;
    const bool ab_d = vd >= d_dom;
    const double pb = ab_b ? vb : vb + service;
    const double pd = ab_d ? vd : vd + service;

    out.max_violation = std::max(out.max_violation, pb - nu_max - pd);

    if (!ab_b) { ++out.base.diag.accepted; work_b.add(service); }
    if (!ab_d) { ++out.dominating.diag.accepted; work_d.add(service); }

    if (j > burn && j <= burn + used) {
      const int b = static_cast<int>((j - burn - 1) / bs);
      acc_b.arrival(b, s * vb, cfg.patience.cdf(n, vb), ab_b);
      acc_b.segment(b, s * pb, s * u_next);
      acc_d.arrival(b, s * vd, dom.cdf(n, vd), ab_d);
      acc_d.segment(b, s * pd, s * u_next);
    }

    const double busy_seg_b = std::min(u_next, pb);
    busy_b.add(busy_seg_b);
    idle_b.add(u_next - busy_seg_b);
    const double busy_seg_d = std::min(u_next, pd);
    busy_d.add(busy_seg_d);
    idle_d.add(u_next - busy_seg_d);
    elapsed_b.add(u_next);

    vb = pb > u_next ? pb - u_next : 0.0;
    vd = pd > u_next ? pd - u_next : 0.0;
  }

  acc_b.fill(out.base);
  acc_d.fill(out.dominating);
  out.base.diag.v_final = vb;
  out.dominating.diag.v_final = vd;
  out.base.diag.elapsed = elapsed_b.value();
  out.dominating.diag.elapsed = elapsed_b.value();
  out.base.diag.busy_time = busy_b.value();
  out.base.diag.idle_time = idle_b.value();
  out.base.diag.accepted_work = work_b.value();
  out.dominating.diag.busy_time = busy_d.value();
  out.dominating.diag.idle_time = idle_d.value();
  out.dominating.diag.accepted_work = work_d.value();
  finalize_estimates(out.base);
  finalize_estimates(out.dominating);
  return out;
}

SimResult merge(const SimResult& a, const SimResult& b) {
  if (a.moment_orders != b.moment_orders || a.cdf_grid != b.cdf_grid ||
      a.sqrt_n != b.sqrt_n) {
    throw ConfigError("merge: results come from incompatible configurations");
  }
  SimResult r;
  r.moment_orders = a.moment_orders;
  r.cdf_grid = a.cdf_grid;
  r.sqrt_n = a.sqrt_n;
  r.merged = true;

  r.total_time_w = a.total_time_w + b.total_time_w;
  r.moment_integrals_w.resize(a.moment_integrals_w.size());
  for (std::size_t k = 0; k < r.moment_integrals_w.size(); ++k) {
    r.moment_integrals_w[k] = a.moment_integrals_w[k] + b.moment_integrals_w[k];
  }
  r.occupancy_w.resize(a.occupancy_w.size());
  for (std::size_t i = 0; i < r.occupancy_w.size(); ++i) {
    r.occupancy_w[i] = a.occupancy_w[i] + b.occupancy_w[i];
  }
  r.sum_patience_cdf_pre = a.sum_patience_cdf_pre + b.sum_patience_cdf_pre;
  r.sum_arrival_pow.resize(a.sum_arrival_pow.size());
  for (std::size_t k = 0; k < r.sum_arrival_pow.size(); ++k) {
    r.sum_arrival_pow[k] = a.sum_arrival_pow[k] + b.sum_arrival_pow[k];
  }
  r.arrivals_used = a.arrivals_used + b.arrivals_used;
  r.abandoned_count = a.abandoned_count + b.abandoned_count;
  r.batches.reserve(a.batches.size() + b.batches.size());
  r.batches.insert(r.batches.end(), a.batches.begin(), a.batches.end());
  r.batches.insert(r.batches.end(), b.batches.begin(), b.batches.end());

  r.diag.elapsed = a.diag.elapsed + b.diag.elapsed;
  r.diag.busy_time = a.diag.busy_time + b.diag.busy_time;
  r.diag.idle_time = a.diag.idle_time + b.diag.idle_time;
  r.diag.accepted_work = a.diag.accepted_work + b.diag.accepted_work;
  r.diag.accepted = a.diag.accepted + b.diag.accepted;
  r.diag.v_initial = a.diag.v_initial;
  r.diag.v_final = b.diag.v_final;

  r.warnings.reserve(a.warnings.size() + b.warnings.size());
  r.warnings.insert(r.warnings.end(), a.warnings.begin(), a.warnings.end());
  r.warnings.insert(r.warnings.end(), b.warnings.begin(), b.warnings.end());

  finalize_estimates(r);
  return r;
}

}  // namespace abq
