#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "fedspan/config.hpp"
#include "fedspan/errors.hpp"
#include "fedspan/report.hpp"

namespace fs = std::filesystem;
using namespace fedspan;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kAbort = 3;

struct Args {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  out << s << '\n';
}

int report_abort(const RunTrace& t) {
  if (!t.aborted) return kOk;
  std::cerr << "aborted: round " << t.abort_k << ", phase " << t.abort_phase << ": " << t.abort_reason << '\n';
  return kAbort;
}

int cmd_run(const Config& cfg, const fs::path& out) {
  std::vector<ModelVector> probes;
  RunTrace t = run_with_probes(cfg.scenario, probes);
  write_trace_csv((out / "trace.csv").string(), t);
  write_ledger_csv((out / "ledger.csv").string(), ledger_rows(t));
  write_rounds_csv((out / "rounds.csv").string(), t);
  std::vector<MethodRun> runs{{"fed_span", t}};
  write_loss_curve_csv((out / "loss_curve.csv").string(), runs, cfg.scenario.t0);
  auto summary = compare_methods(cfg, runs);
  write_threshold_csv((out / "thresholds.csv").string(), summary);
  write_text(out / "summary.json", summary_json(summary));
  BoundReport b = evaluate_bound(cfg, t, probes);
  write_text(out / "bound.json", bound_report_json(b));
  write_text(out / "optimize.json", optimize_report_json(optimize_resources(cfg, t, b)));
  std::cout << "rounds " << t.rounds.size() << ", final loss " << summary.front().final_loss << '\n';
  return report_abort(t);
}

int cmd_compare(const Config& cfg, const fs::path& out, int jobs) {
  auto runs = run_methods(cfg, jobs);
  for (const auto& r : runs) write_trace_csv((out / ("trace_" + r.method + ".csv")).string(), r.trace);
  write_loss_curve_csv((out / "loss_curve.csv").string(), runs, cfg.scenario.t0);
  auto summary = compare_methods(cfg, runs);
  write_threshold_csv((out / "thresholds.csv").string(), summary);
  write_text(out / "summary.json", summary_json(summary));
  std::cout << "method,aggregations,energy_j,transfer_s,wall_s,final_loss\n";
  for (const auto& s : summary) {
    std::cout << s.method << ',' << s.aggregations << ',' << s.total_energy_j << ',' << s.total_transfer_s << ','
              << s.wall_s << ',' << s.final_loss << '\n';
    for (const auto& d : s.diagnostics) std::cerr << s.method << ": " << d << '\n';
  }
  return report_abort(runs.front().trace);
}

int cmd_bound(const Config& cfg, const fs::path& out) {
  std::vector<ModelVector> probes;
  RunTrace t = run_with_probes(cfg.scenario, probes);
  BoundReport b = evaluate_bound(cfg, t, probes);
  write_text(out / "bound.json", bound_report_json(b));
  std::cout << "bound " << b.breakdown.total() << ", measured " << b.measured_avg_grad_sq << '\n';
  return report_abort(t);
}

int cmd_optimize(const Config& cfg, const fs::path& out) {
  std::vector<ModelVector> probes;
  RunTrace t = run_with_probes(cfg.scenario, probes);
  BoundReport b = evaluate_bound(cfg, t, probes);
  auto rows = optimize_resources(cfg, t, b);
  write_text(out / "optimize.json", optimize_report_json(rows));
  for (const auto& r : rows)
    std::cout << "L=" << r.L << " objective " << r.exact_objective << " worst violation " << r.check.worst << '\n';
  return report_abort(t);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fed-Span federated learning simulator for LEO constellations"};
  app.require_subcommand(1);
  Args a;
  auto common = [&a](CLI::App* sub, bool out) {
    sub->add_option("--config", a.config, "scenario file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", a.seed, "root seed override");
    if (out) {
      sub->add_option("--out", a.out, "output directory");
      sub->add_option("--jobs", a.jobs, "parallel runs")->check(CLI::PositiveNumber);
    }
  };
  CLI::App* run = app.add_subcommand("run", "simulate Fed-Span and write traces and reports");
  CLI::App* compare = app.add_subcommand("compare", "Fed-Span against the configured baselines");
  CLI::App* bound = app.add_subcommand("bound", "evaluate the convergence bound on a run");
  CLI::App* optimize = app.add_subcommand("optimize", "solve the per-round resource allocation");
  CLI::App* validate = app.add_subcommand("validate", "load and check a scenario");
  for (auto* s : {run, compare, bound, optimize}) common(s, true);
  common(validate, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    Config cfg = load_config(a.config, a.seed);
    if (validate->parsed()) {
      std::cout << cfg.name << ": " << cfg.scenario.timeline->n_sats() << " satellites, "
                << cfg.scenario.partition.n_clusters << " clusters, K=" << cfg.scenario.K << ", L=" << cfg.scenario.L
                << '\n';
      return kOk;
    }
    calibrate_step(cfg);
    fs::path out(a.out);
    fs::create_directories(out);
    if (run->parsed()) return cmd_run(cfg, out);
    if (compare->parsed()) return cmd_compare(cfg, out, a.jobs);
    if (bound->parsed()) return cmd_bound(cfg, out);
    return cmd_optimize(cfg, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kAbort;
  }
}
