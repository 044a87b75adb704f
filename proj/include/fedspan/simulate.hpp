#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fedspan/accounting.hpp"
#include "fedspan/clustering.hpp"
#include "fedspan/constellation.hpp"
#include "fedspan/learning.hpp"
#include "fedspan/link.hpp"
#include "fedspan/schedule.hpp"
#include "fedspan/spanning.hpp"

namespace fedspan {

enum class BatteryPolicy { Skip, Abort };

struct PhaseEvent {
  int k = 0;
  int ell = 0;  // 1-based local round, 0 for global phases
  std::string phase;
  double t = 0.0;
  const std::vector<ModelVector>* held = nullptr;  // model per satellite after the phase
  const Eigen::MatrixXd* grads = nullptr;           // cumulative gradients (M x N), training phases only
};

struct Scenario {
  std::shared_ptr<const ConstellationTimeline> timeline;
  std::shared_ptr<const LossOracle> oracle;
  LinkBudgetParams link = LinkBudgetParams::reference();
  RFParams rf;
  VCPartition partition;
  ComputeParams compute;

  int K = 1;
  int L = 1;
  Eigen::VectorXi e_c;        // per cluster
  Eigen::VectorXd frac;       // per satellite
  Eigen::VectorXd cpu_freq;   // per satellite
  double eta = 0.01;
  PhaseCaps caps;
  double tau_tti = 3.0;
  double tau_loc = 0.0;  // 0 selects the default for L
  double t0 = 0.0;
  SchedulePolicy policy = SchedulePolicy::EvenSpread;

  double model_bits = 6.5e6 * 8.0;
  int terminals_per_sat = 4;
  int max_links_per_sat = 4;
  double alpha2 = 1.0, alpha3 = 1.0;
  // Optional fixed topologies; when absent the spanning module builds them
  // at every phase from the link candidates.
  std::optional<DirectedForest> global_down, global_up, local_down, local_up;

  double battery_init_j = 500.0;
  double battery_cap_j = 500.0;
  BatteryPolicy battery_policy = BatteryPolicy::Skip;

  ModelVector w0;
  std::uint64_t seed = 1;
  std::function<void(const PhaseEvent&)> observer;
};

// Throws ArgumentError naming the first inconsistent field.
void validate_scenario(const Scenario& s);

struct TraceRow {
  int k = 0;
  int ell = 0;
  std::string phase;
  double t_start = 0.0;
  double latency_s = 0.0;
  double energy_j = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double battery_min = 0.0;
  double transfer_s = 0.0;  // sum of link transmission times, not written to CSV
};

struct RoundSummary {
  int k = 0;
  double t_init = 0.0;
  double idle_s = 0.0;  // total idle time of the round
  double loss = 0.0;
  double grad_norm_sq = 0.0;  // at the model the round starts from
  int skipped = 0;            // training slots skipped for battery
};

struct RunTrace {
  std::vector<TraceRow> rows;
  std::vector<RoundSummary> rounds;
  ModelVector final_model;
  bool aborted = false;
  int abort_k = -1;
  std::string abort_phase;
  std::string abort_reason;
  double battery_min = 0.0;
  double battery_max = 0.0;
  std::vector<std::string> diagnostics;
};

RunTrace run_fed_span(const Scenario& s);

enum class BaselineKind { Async, Buffered, Opportunistic, SinkSync };
const char* to_string(BaselineKind k);
BaselineKind baseline_from_string(const std::string& s);

struct BaselineOptions {
  BaselineKind kind = BaselineKind::Async;
  int buffer = 4;            // buffered: arrivals per aggregation
  double poll_s = 10.0;      // opportunistic tick
  double hold_back_s = 10.0;
  int sink = 0;              // sink_sync relay target
  int max_aggregations = 0;  // 0: run to the horizon
  double horizon_s = 0.0;    // 0: timeline horizon
};

struct BaselineEvent {
  double t = 0.0;
  int sat = -1;
  std::string kind;  // train_done, upload_start, arrival, aggregate, download
};

struct BaselineTrace {
  RunTrace trace;
  std::vector<BaselineEvent> events;
};

BaselineTrace run_baseline(const Scenario& s, const BaselineOptions& o);

// `k,ell,phase,t_start,latency_s,energy_j,loss,grad_norm,battery_min`
void write_trace_csv(const std::string& path, const RunTrace& t);
void write_trace_csv(std::ostream& out, const RunTrace& t);

}  // namespace fedspan
