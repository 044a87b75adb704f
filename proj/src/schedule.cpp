#include "fedspan/schedule.hpp"

#include <cmath>

#include "json.hpp"

#include "fedspan/errors.hpp"

namespace fedspan {

TTIGrid make_tti_grid(double t_init, double tau_gd_max, double tau_loc, double tau_tti) {
  if (!(tau_tti > 0.0)) throw ArgumentError("make_tti_grid: tau_tti must be positive");
  if (tau_loc < 0.0) throw ArgumentError("make_tti_grid: tau_loc must be non-negative");
  TTIGrid g;
  g.X = static_cast<int>(std::floor(tau_loc / tau_tti + 1e-12));
  g.tau_tti = tau_tti;
  g.tau_loc = tau_loc;
  g.t_init = t_init;
  g.tau_gd_max = tau_gd_max;
  for (int x = 0; x < g.X; ++x) g.starts.push_back(t_init + tau_gd_max + x * tau_tti);
  return g;
}

RoundPlan plan_round(const TTIGrid& grid, int L, const PhaseCaps& caps, SchedulePolicy policy, int k) {
  if (L < 1) throw ArgumentError("plan_round: L must be at least 1");
  if (L - 1 > grid.X)
    throw CapacityError("plan_round: " + std::to_string(L - 1) + " local rounds need TTIs but only " +
                        std::to_string(grid.X) + " exist");
  if (L > 1 && grid.tau_tti < caps.lt_max + caps.la_max + caps.ld_max)
    throw ArgumentError("plan_round: tau_tti shorter than lt_max + la_max + ld_max");
  RoundPlan p;
  p.k = k;
  p.t_init = grid.t_init;
  p.L = L;
  p.caps = caps;
  p.tau_loc = grid.tau_loc;
  p.tau_tti = grid.tau_tti;
  p.t_gd = grid.t_init;
  p.t_ga = grid.t_init + grid.tau_gd_max + grid.tau_loc;
  p.tti_assignment = Eigen::MatrixXi::Zero(L - 1, grid.X);
  for (int l = 0; l < L - 1; ++l) {
    int x = policy == SchedulePolicy::Earliest ? l : static_cast<int>((static_cast<long long>(l) * grid.X) / (L - 1));
    p.tti_index.push_back(x);
    p.tti_assignment(l, x) = 1;
    double t = grid.starts[x];
    p.t_lt.push_back(t);
    p.t_la.push_back(t + caps.lt_max);
    p.t_ld.push_back(t + caps.lt_max + caps.la_max);
  }
  double last = L == 1 ? grid.t_init + grid.tau_gd_max : p.t_ld.back() + caps.ld_max;
  if (last + caps.lt_max > p.t_ga + 1e-9)
    throw CapacityError("plan_round: final local training does not fit before global aggregation");
  p.t_lt.push_back(last);
  return p;
}

IdleTimes idle_times(const RoundPlan& plan, const std::vector<double>& realized) {
  IdleTimes out;
  for (size_t l = 0; l < realized.size(); ++l) {
    if (realized[l] > plan.caps.lt_max)
      throw DeadlineError("local round " + std::to_string(l) + ": training took " + std::to_string(realized[l]) +
                          " s, cap " + std::to_string(plan.caps.lt_max) + " s");
    out.per_round.push_back(plan.caps.lt_max - realized[l]);
    out.total += out.per_round.back();
  }
  return out;
}

double default_tau_loc(int L_max, double tau_tti) { return std::max(1, 2 * (L_max - 1)) * tau_tti; }

std::string plan_to_json(const RoundPlan& p) {
  nlohmann::ordered_json j;
  j["k"] = p.k;
  j["t_init"] = p.t_init;
  j["L"] = p.L;
  j["tti_index"] = p.tti_index;
  j["t_gd"] = p.t_gd;
  j["t_lt"] = p.t_lt;
  j["t_la"] = p.t_la;
  j["t_ld"] = p.t_ld;
  j["t_ga"] = p.t_ga;
  j["tau_loc"] = p.tau_loc;
  j["tau_tti"] = p.tau_tti;
  j["caps"] = {{"gd_max", p.caps.gd_max}, {"lt_max", p.caps.lt_max}, {"la_max", p.caps.la_max},
               {"ld_max", p.caps.ld_max}, {"ga_max", p.caps.ga_max}};
  j["sgd_counts"] = std::vector<int>(p.sgd_counts.data(), p.sgd_counts.data() + p.sgd_counts.size());
  j["minibatch_frac"] = std::vector<double>(p.minibatch_frac.data(), p.minibatch_frac.data() + p.minibatch_frac.size());
  j["cpu_freq"] = std::vector<double>(p.cpu_freq.data(), p.cpu_freq.data() + p.cpu_freq.size());
  return j.dump(2);
}

}  // namespace fedspan
