#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace fedspan {

struct PhaseCaps {
  double gd_max = 1.0;
  double lt_max = 1.0;
  double la_max = 1.0;
  double ld_max = 1.0;
  double ga_max = 1.0;
};

struct TTIGrid {
  int X = 0;
  double tau_tti = 0.0;
  double tau_loc = 0.0;
  double t_init = 0.0;
  double tau_gd_max = 0.0;
  std::vector<double> starts;
};

TTIGrid make_tti_grid(double t_init, double tau_gd_max, double tau_loc, double tau_tti);

enum class SchedulePolicy { EvenSpread, Earliest };

struct RoundPlan {
  int k = 0;
  double t_init = 0.0;
  int L = 1;
  Eigen::MatrixXi tti_assignment;  // (L-1) x X, lambda_{l,x}
  std::vector<int> tti_index;      // assigned TTI per local round l < L
  Eigen::VectorXi sgd_counts;      // e_c per cluster
  double t_gd = 0.0;
  std::vector<double> t_lt;  // size L; the last entry is the final training
  std::vector<double> t_la;  // size L-1
  std::vector<double> t_ld;  // size L-1
  double t_ga = 0.0;
  PhaseCaps caps;
  double tau_loc = 0.0;
  double tau_tti = 0.0;
  Eigen::VectorXd minibatch_frac;  // per satellite
  Eigen::VectorXd cpu_freq;        // per satellite
};

RoundPlan plan_round(const TTIGrid& grid, int L, const PhaseCaps& caps,
                     SchedulePolicy policy = SchedulePolicy::EvenSpread, int k = 0);

struct IdleTimes {
  std::vector<double> per_round;
  double total = 0.0;
};

IdleTimes idle_times(const RoundPlan& plan, const std::vector<double>& realized_train_latency);

// tau_loc giving X = 2 (L_max - 1) TTIs (at least one).
double default_tau_loc(int L_max, double tau_tti);

// Wall-clock length of one global round.
inline double round_duration(const RoundPlan& p) { return p.caps.gd_max + p.tau_loc + p.caps.ga_max; }

std::string plan_to_json(const RoundPlan& p);

}  // namespace fedspan
