// Command-line front end: run scenarios, audit model assumptions, inspect the
// limiting stationary law, and render report plots.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "abandonq/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitGateFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitUnstable = 3;

abq::ExperimentConfig load_config(const std::string& path, const std::string& out_dir,
                                  bool waive) {
  abq::ExperimentConfig cfg = abq::ExperimentConfig::from_json_file(path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (waive) cfg.waive_unbounded_interarrival = true;
  if (const char* env = std::getenv("ABANDONQ_SEED")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') {
      throw abq::ConfigError(std::string("ABANDONQ_SEED is not an unsigned integer: ") + env);
    }
    cfg.base_seed = static_cast<std::uint64_t>(v);
  }
  return cfg;
}

int cmd_run(const std::string& cfg_path, const std::string& out_dir, int threads, bool waive) {
  abq::ExperimentConfig cfg = load_config(cfg_path, out_dir, waive);
  abq::RunOutcome outcome = abq::run_experiment(cfg, threads);
  for (const std::string& m : outcome.messages) std::printf("%s\n", m.c_str());
  if (outcome.status == abq::RunStatus::Ok || outcome.status == abq::RunStatus::GateFailed) {
    for (const abq::ReportRow& r : outcome.report.rows) {
      std::printf("n = %lld: ", static_cast<long long>(r.n));
      for (const abq::MomentCell& c : r.moments) {
        std::printf("m%.3g rel_err %.3e  ", c.m, c.rel_err);
      }
      std::printf("ks %.3e  sqrt(n)Pa %.6g (eh %.6g)\n", r.ks, r.sqrtn_pa, r.eh);
    }
    std::printf("report written to %s\n", cfg.output_dir.c_str());
    std::printf("%s\n", outcome.status == abq::RunStatus::Ok ? "all gates passed"
                                                             : "GATES FAILED");
  }
  return static_cast<int>(outcome.status);
}

int cmd_validate(const std::string& cfg_path, bool waive) {
  abq::ExperimentConfig cfg = load_config(cfg_path, "", waive);
  abq::AssumptionReport rep = abq::validate_experiment(cfg);

  std::printf("moments_finite:          %s (p = %g)\n", rep.moments_finite ? "ok" : "FAIL",
              cfg.p_moment);
  if (rep.patience_limit_defined) {
    std::printf("patience_scaling_limit:  %s", rep.scaling_limit.errors_nonincreasing ? "ok" : "FAIL");
    std::printf(" (sup errors over n:");
    for (std::size_t i = 0; i < rep.scaling_limit.n_list.size(); ++i) {
      std::printf(" %.3e", rep.scaling_limit.sup_error[i]);
    }
    std::printf(")\n");
  } else {
    std::printf("patience_scaling_limit:  FAIL (no limit function)\n");
  }
  std::printf("diffusion_stability:     %s (drift margin %.6g at x_max = %g)\n",
              rep.stability.satisfied ? "ok" : "FAIL", rep.stability.margin, cfg.x_max);
  if (rep.growth) {
    std::printf("patience_growth_bound:   %s (worst margin %.3e)\n", rep.growth->ok ? "ok" : "FAIL",
                rep.growth->worst_margin);
  }
  std::printf("unbounded_interarrival:  %s\n",
              rep.interarrival_unbounded ? "ok"
              : cfg.waive_unbounded_interarrival ? "waived"
                                                 : "FAIL");
  for (const std::string& w : rep.warnings) std::printf("warning: %s\n", w.c_str());
  for (const std::string& e : rep.errors) std::printf("error: %s\n", e.c_str());

  if (!rep.ok()) return kExitConfig;
  if (!rep.stability.satisfied) return kExitUnstable;
  return kExitOk;
}

int cmd_diffusion(const std::string& cfg_path, const std::string& density_csv,
                  const std::string& cdf_csv, int points) {
  abq::ExperimentConfig cfg = load_config(cfg_path, "", true);
  abq::PatienceFamily fam = cfg.build_patience();
  abq::DiffusionModel model = abq::DiffusionModel::from_primitives(
      cfg.u_spec, cfg.v_spec, cfg.lambda, cfg.theta, fam.limit());
  abq::DiffusionStationary stat = abq::build_stationary(model, cfg.quad_tol);

  std::printf("sigma^2       = %.12g\n", model.sigma2);
  std::printf("drift at 0    = %.12g\n", model.drift_const);
  std::printf("x_cut         = %.12g (tail bound %.3e rel)\n", stat.x_cut(), stat.tail_bound_rel());
  std::printf("normalization = %.12g\n", stat.norm_const());
  for (double m : cfg.moment_orders) {
    std::printf("moment m=%-4g = %.12g\n", m, stat.moment(m));
  }
  std::printf("E[H(V)]       = %.12g\n", stat.expect_limit());
  std::printf("median        = %.12g\n", stat.quantile(0.5));

  auto dump = [&](const std::string& path, bool density) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw abq::ConfigError("cannot write " + path);
    f << (density ? "x,density\n" : "x,cdf\n");
    for (int i = 0; i < points; ++i) {
      double x = stat.x_cut() * i / (points - 1);
      char buf[80];
      std::snprintf(buf, sizeof(buf), "%.12g,%.12g\n", x,
                    density ? stat.density(x) : stat.cdf(x));
      f << buf;
    }
  };
  if (!density_csv.empty()) dump(density_csv, true);
  if (!cdf_csv.empty()) dump(cdf_csv, false);
  return kExitOk;
}

int cmd_plot(const std::string& report_path, const std::string& out_dir) {
  abq::ConvergenceReport rep = abq::read_report_json(report_path);
  std::string dir = out_dir;
  if (dir.empty()) {
    dir = std::filesystem::path(report_path).parent_path().string();
    if (dir.empty()) dir = ".";
  }
  abq::emit_plots(rep, dir);
  std::printf("plots written to %s\n", dir.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heavy-traffic laboratory for single-server queues with impatient customers"};
  app.require_subcommand(1);

  std::string cfg_path, out_dir, report_path, density_csv, cdf_csv;
  int threads = 0;
  int points = 401;
  bool waive = false;

  CLI::App* run = app.add_subcommand(
      "run", "simulate a scenario across its n grid and write the convergence report");
  run->add_option("--config", cfg_path, "scenario JSON file")->required();
  run->add_option("--out", out_dir, "output directory (overrides the config)");
  run->add_option("--threads", threads, "worker threads, 0 = all cores")
      ->check(CLI::NonNegativeNumber);
  run->add_flag("--waive-a5", waive, "accept an interarrival law with bounded support");

  CLI::App* validate = app.add_subcommand("validate", "audit the model assumptions and exit");
  validate->add_option("--config", cfg_path, "scenario JSON file")->required();
  validate->add_flag("--waive-a5", waive, "accept an interarrival law with bounded support");

  CLI::App* diffusion =
      app.add_subcommand("diffusion", "solve the limiting stationary law and print its summary");
  diffusion->add_option("--config", cfg_path, "scenario JSON file")->required();
  diffusion->add_option("--density-csv", density_csv, "write the stationary density to CSV");
  diffusion->add_option("--cdf-csv", cdf_csv, "write the stationary CDF to CSV");
  diffusion->add_option("--points", points, "rows in the CSV exports")
      ->check(CLI::Range(2, 100000));

  CLI::App* plot = app.add_subcommand("plot", "render SVG plots from a report");
  plot->add_option("--report", report_path, "report.json from a run")->required();
  plot->add_option("--out", out_dir, "directory for the SVG files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(cfg_path, out_dir, threads, waive);
    if (validate->parsed()) return cmd_validate(cfg_path, waive);
    if (diffusion->parsed()) return cmd_diffusion(cfg_path, density_csv, cdf_csv, points);
    if (plot->parsed()) return cmd_plot(report_path, out_dir);
  } catch (const abq::StabilityError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUnstable;
  } catch (const abq::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}
