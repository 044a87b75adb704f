#pragma once

#include <string>
#include <vector>

#include "fedspan/config.hpp"

namespace fedspan {

// Minimum of the global loss at time t: closed form for the quadratic family,
// gradient descent with backtracking otherwise.
double reference_min_loss(const Config& cfg, double t);

struct ThresholdHit {
  double fraction = 0.0;     // of the initial optimality gap
  double target_loss = 0.0;
  bool reached = false;
  double transfer_s = 0.0;   // cumulative link transmission time up to the hit
  double wall_s = 0.0;       // elapsed simulated time up to the hit
  double energy_j = 0.0;     // cumulative energy up to the hit
};

struct MethodSummary {
  std::string method;
  std::vector<ThresholdHit> hits;
  double total_energy_j = 0.0;
  double total_transfer_s = 0.0;
  double wall_s = 0.0;
  int aggregations = 0;
  double final_loss = 0.0;
  bool aborted = false;
  std::vector<std::string> diagnostics;
};

MethodSummary summarize(const std::string& method, const RunTrace& t, double t0, double f0, double fstar,
                        const std::vector<double>& fractions);

struct MethodRun {
  std::string method;
  RunTrace trace;
};

// Fed-Span followed by each configured baseline, at most `jobs` at a time.
std::vector<MethodRun> run_methods(const Config& cfg, int jobs);
std::vector<MethodSummary> compare_methods(const Config& cfg, const std::vector<MethodRun>& runs);

// Fed-Span run that also records the global model at the start of each round.
RunTrace run_with_probes(const Scenario& s, std::vector<ModelVector>& probes);

std::vector<LedgerRow> ledger_rows(const RunTrace& t);
void write_rounds_csv(const std::string& path, const RunTrace& t);
// method,t,cum_latency_s,cum_transfer_s,cum_energy_j,loss
void write_loss_curve_csv(const std::string& path, const std::vector<MethodRun>& runs, double t0);
// method,fraction,reached,energy_j,transfer_s,wall_s
void write_threshold_csv(const std::string& path, const std::vector<MethodSummary>& rows);
std::string summary_json(const std::vector<MethodSummary>& rows);

struct BoundReport {
  BoundParams params;
  EstimateReport estimate;
  BoundBreakdown breakdown;
  double f0_minus_fstar = 0.0;
  double measured_avg_grad_sq = 0.0;
  bool cap_ok = true;
  double cap = 0.0;
  std::vector<std::string> notes;
};

BoundReport evaluate_bound(const Config& cfg, const RunTrace& t, const std::vector<ModelVector>& probes);

// Cap step-size policy: the estimated heterogeneity depends on the trajectory,
// so eta is rescaled to the cap of its own run until it sits under it.
// Returns the number of passes; no-op for a fixed step size.
int calibrate_step(Config& cfg, int max_passes = 8);
std::string bound_report_json(const BoundReport& r);

struct OptimizeEntry {
  int L = 1;
  ResourceSolution solution;
  ConstraintCheck check;
  double exact_objective = 0.0;  // without the auxiliary penalty
};

// Resource allocation of one round per candidate L, seeded from a Fed-Span run.
std::vector<OptimizeEntry> optimize_resources(const Config& cfg, const RunTrace& t, const BoundReport& b);
std::string optimize_report_json(const std::vector<OptimizeEntry>& rows);

}  // namespace fedspan
