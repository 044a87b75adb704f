#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "fedspan/accounting.hpp"
#include "fedspan/clustering.hpp"
#include "fedspan/convergence.hpp"
#include "fedspan/optimizer.hpp"

namespace fedspan {

// Continuous resource allocation of one global round under a fixed topology,
// partition and L.
struct ResourceInputs {
  VCPartition partition;
  Eigen::VectorXd D_n;
  Eigen::VectorXd sigma_n;
  ComputeParams compute;
  BoundParams bound;
  int L = 1;
  double eta = 0.01;
  double drift = 0.0;  // Delta of the round
  double tau_lt_max = 1.0;
  double f_min = 1e6;
  // Battery: level at round start, harvest over the round, fixed transmit energy.
  Eigen::VectorXd battery_level;
  Eigen::VectorXd harvest;
  Eigen::VectorXd tx_energy;
  double tx_latency = 0.0;
  double alpha1 = 1.0, alpha2 = 1.0, alpha3 = 1.0;
  double e_lo = 1.0, e_hi = 10.0;
  double frac_min = 1e-3;
  double p = 20.0;
  double eps = 1e-3;
  // Fixed values used when the corresponding variable is not optimized.
  bool optimize_frac = true;
  bool optimize_e = true;
  Eigen::VectorXd frac_fixed;
  Eigen::VectorXi e_fixed;
};

struct ResourceLayout {
  std::vector<int> f, frac, e;
  int T = -1, idle = -1, emax = -1, epi = -1;
  int size = 0;
};

struct ResourceProblem {
  ProblemBuilder builder;
  Eigen::VectorXd x0;
  ResourceLayout layout;
};

ResourceProblem build_resource_subproblem(const ResourceInputs& in);

struct ResourceSolution {
  Eigen::VectorXd f, frac, e_relaxed;
  Eigen::VectorXi e;  // rounded down, at least e_lo
  double T = 0.0;     // training window per local round
  double idle = 0.0;  // idle time per local round
  double objective = 0.0;
  SCAState sca;
};

ResourceSolution solve_resource(const ResourceInputs& in, const SCAOptions& opt = {});

// Values of one solution in terms of the original variables.
struct ResourcePoint {
  Eigen::VectorXd f, frac, e;
  double T = 0.0, idle = 0.0;
};
ResourcePoint unpack(const ResourceInputs& in, const ResourceLayout& lay, const Eigen::VectorXd& x);

// Largest relative violation of the unapproximated constraints, with the
// name of the worst one.
struct ConstraintCheck {
  double worst = 0.0;
  std::string name;
};
ConstraintCheck check_original(const ResourceInputs& in, const ResourcePoint& pt);

// Exact objective of the unapproximated problem (bound terms, latency, energy).
double resource_objective(const ResourceInputs& in, const ResourcePoint& pt);

}  // namespace fedspan
