#include "fedspan/accounting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fedspan/csv.hpp"
#include "fedspan/errors.hpp"

namespace fedspan {

namespace {

double hop_time(const Eigen::MatrixXd& rates, int from, int to, double bits) {
  double r = rates(from, to);
  if (!(r > 0.0))
    throw InfeasibleError("zero rate on forest edge " + std::to_string(from) + "->" + std::to_string(to));
  return bits / r;
}

void require_direction(const DirectedForest& f, Direction d) {
  if (f.direction != d) throw StructureError(std::string("expected a ") + to_string(d) + " forest");
}

}  // namespace

LatencyReport dispatch_latency(const DirectedForest& f, const Eigen::MatrixXd& rates, double model_bits) {
  require_direction(f, Direction::Downward);
  const int n = f.n();
  std::vector<int> parent = toward_root(f);
  LatencyReport rep;
  rep.arrival = Eigen::VectorXd::Zero(n);
  for (int v : root_first_order(f)) {
    if (parent[v] < 0) continue;
    double h = hop_time(rates, parent[v], v, model_bits);
    rep.arrival(v) = rep.arrival(parent[v]) + h;
    rep.edges.push_back({parent[v], v, h});
  }
  rep.total = n ? rep.arrival.maxCoeff() : 0.0;
  return rep;
}

LatencyReport aggregation_latency(const DirectedForest& f, const Eigen::MatrixXd& rates, double model_bits) {
  require_direction(f, Direction::Upward);
  const int n = f.n();
  std::vector<int> next = toward_root(f);
  std::vector<int> order = root_first_order(f);
  LatencyReport rep;
  rep.arrival = Eigen::VectorXd::Zero(n);
  // Leaves first: a node is complete once every predecessor has reported.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    int v = *it;
    if (next[v] < 0) continue;
    double h = hop_time(rates, v, next[v], model_bits);
    rep.arrival(next[v]) = std::max(rep.arrival(next[v]), rep.arrival(v) + h);
    rep.edges.push_back({v, next[v], h});
  }
  rep.total = 0.0;
  for (int v = 0; v < n; ++v)
    if (next[v] < 0) rep.total = std::max(rep.total, rep.arrival(v));
  return rep;
}

LatencyReport phase_latency(const DirectedForest& f, const Eigen::MatrixXd& rates, double model_bits) {
  return f.direction == Direction::Downward ? dispatch_latency(f, rates, model_bits)
                                            : aggregation_latency(f, rates, model_bits);
}

Eigen::VectorXd sender_energy(const DirectedForest& f, const Eigen::MatrixXd& rates, double model_bits,
                              const Eigen::VectorXd& tx_power) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(f.n());
  for (int i = 0; i < f.n(); ++i)
    for (int j = 0; j < f.n(); ++j)
      if (f.adj(i, j)) e(i) += hop_time(rates, i, j, model_bits) * tx_power(i);
  return e;
}

double phase_energy(const DirectedForest& f, const Eigen::MatrixXd& rates, double model_bits,
                    const Eigen::VectorXd& tx_power) {
  return sender_energy(f, rates, model_bits, tx_power).sum();
}

TrainCost train_cost(const ComputeParams& p, int e, double minibatch_size, double f) {
  if (!(f > 0.0)) throw ArgumentError("train_cost: frequency must be positive");
  if (f > p.f_max) throw ConstraintError("train_cost: frequency exceeds f_max");
  if (e < 0) throw ArgumentError("train_cost: negative iteration count");
  TrainCost c;
  c.latency_s = e * p.cycles_per_point * minibatch_size / f;
  c.energy_j = p.chipset_cap / 2.0 * f * f * f * c.latency_s;
  return c;
}

BatteryStep battery_step(const BatteryState& s, const Eigen::VectorXd& harvest, const Eigen::VectorXd& tx,
                         const Eigen::VectorXd& compute) {
  BatteryStep out;
  out.state.cap_j = s.cap_j;
  out.state.level_j = (s.level_j - tx - compute + harvest).cwiseMin(s.cap_j);
  out.feasible.resize(static_cast<size_t>(s.level_j.size()));
  for (Eigen::Index i = 0; i < s.level_j.size(); ++i) out.feasible[i] = s.level_j(i) + harvest(i) > tx(i) + compute(i);
  return out;
}

void write_ledger_csv(const std::string& path, const std::vector<LedgerRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "k,phase,latency_s,energy_j,battery_min_j\n";
  for (const auto& r : rows)
    out << r.k << ',' << r.phase << ',' << csv::num(r.latency_s) << ',' << csv::num(r.energy_j) << ','
        << csv::num(r.battery_min_j) << '\n';
}

}  // namespace fedspan
