#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "fedspan/graph.hpp"

namespace fedspan {

struct EdgeTime {
  int from = 0;
  int to = 0;
  double seconds = 0.0;
};

struct LatencyReport {
  Eigen::VectorXd arrival;  // per node
  double total = 0.0;
  std::vector<EdgeTime> edges;
};

// rates: satellite-level matrix, rates(i, j) for the edge i -> j.
LatencyReport dispatch_latency(const DirectedForest& f, const Eigen::MatrixXd& rates, double model_bits);
LatencyReport aggregation_latency(const DirectedForest& f, const Eigen::MatrixXd& rates, double model_bits);
LatencyReport phase_latency(const DirectedForest& f, const Eigen::MatrixXd& rates, double model_bits);

// tx_power: per satellite transmit power (the sender pays).
double phase_energy(const DirectedForest& f, const Eigen::MatrixXd& rates, double model_bits,
                    const Eigen::VectorXd& tx_power);

struct ComputeParams {
  double cycles_per_point = 1360.0;
  double chipset_cap = 2e-27;
  double f_max = 2.3e9;
};

struct TrainCost {
  double latency_s = 0.0;
  double energy_j = 0.0;
};

TrainCost train_cost(const ComputeParams& p, int e, double minibatch_size, double f);

struct BatteryState {
  Eigen::VectorXd level_j;
  Eigen::VectorXd cap_j;
};

struct BatteryStep {
  BatteryState state;
  std::vector<bool> feasible;  // level + harvest > tx + compute, per satellite
};

BatteryStep battery_step(const BatteryState& s, const Eigen::VectorXd& harvest_j, const Eigen::VectorXd& tx_energy_j,
                         const Eigen::VectorXd& compute_energy_j);

// Per-sender transmit energy of one phase.
Eigen::VectorXd sender_energy(const DirectedForest& f, const Eigen::MatrixXd& rates, double model_bits,
                              const Eigen::VectorXd& tx_power);

struct LedgerRow {
  int k = 0;
  std::string phase;
  double latency_s = 0.0;
  double energy_j = 0.0;
  double battery_min_j = 0.0;
};

void write_ledger_csv(const std::string& path, const std::vector<LedgerRow>& rows);

}  // namespace fedspan
