#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "fedspan/clustering.hpp"
#include "fedspan/learning.hpp"

namespace fedspan {

struct BoundParams {
  double beta = 10.0;
  double theta = 3.0;
  Eigen::VectorXd sigma_n;  // per satellite
  double lambda_max = 0.9;
  double zeta_loc_hat = 1.0;
  double zeta_glob1 = 1.0;
  double zeta_glob2 = 0.0;
  // Phi bounds; non-positive values mean "take min/max over the rounds".
  double phi_min = 0.0;
  double phi_max = 0.0;
  // Caps used by the asymptotic bound.
  double l_min = 0, l_max = 0;
  double ebar_min = 0, ebar_max = 0;
  double ehat_min = 0, ehat_max = 0;
  double e_max = 0;
  double sigma_max = 0;
  double alpha = 0;
  double chi = 0;
};

// Precondition check on the parameter ranges. Throws ArgumentError.
void check_params(const BoundParams& p);

struct RoundInputs {
  double eta = 0.0;
  int L = 1;
  VCPartition partition;
  Eigen::VectorXi e_c;       // per cluster
  Eigen::MatrixXd frac;      // N x L minibatch fractions; N x 1 is broadcast over l
  Eigen::VectorXd D_n;
  double omega = 0.0;        // total idle time of the round
  double delta = 0.0;        // model drift of the round
  double lambda = 0.9;       // Lambda of the round
};

// Phi = eta/2 * sum_c D_c L e_c / D.
double round_phi(const RoundInputs& r);

double step_size_cap(const BoundParams& p, int L, int e_max, double lambda_k, const VCPartition& part,
                     const Eigen::VectorXd& D_n, const Eigen::VectorXi& e_c);

struct BoundBreakdown {
  double a = 0, b = 0, c = 0, d = 0, e = 0;
  double total() const { return a + b + c + d + e; }
};

// `cap_check` enforces eta_k <= step_size_cap (PreconditionError otherwise).
BoundBreakdown general_bound(const BoundParams& p, const std::vector<RoundInputs>& rounds, double f0_minus_fstar,
                             bool cap_check = true);

double corollary_bound(const BoundParams& p, int K, int N, double f0_minus_fstar);
// eta = alpha / sqrt(l_max ehat_max K / N).
double corollary_step(const BoundParams& p, int K, int N);

double minibatch_noise(double frac, double sigma, double D_n, double theta);

struct EstimateReport {
  double beta = 0.0;
  int beta_samples = 0;
  double theta = 0.0;
  int theta_samples = 0;
  Eigen::VectorXd sigma_n;
  // Per window: sum over satellites of the largest measured drift.
  Eigen::VectorXd delta;
  int delta_samples = 0;
  std::vector<std::string> warnings;
};

struct EstimateOptions {
  int pairs = 64;        // model pairs for beta
  int datum_pairs = 64;  // datum pairs per satellite for theta
  int min_samples = 8;
  std::uint64_t seed = 1;
};

// probes: models visited by a run (e.g. one per round). windows: idle
// intervals (t_begin, t_end] in seconds, one per round.
EstimateReport estimate_params(const LossOracle& oracle, const std::vector<ModelVector>& probes,
                               const std::vector<std::pair<double, double>>& windows, const EstimateOptions& opt = {});

// Largest D_n/D F_n(w | t) - D_n/D F_n(w | t-1) over the probes.
double measured_drift(const LossOracle& oracle, int sat, const std::vector<ModelVector>& probes, double t);

std::string bound_to_json(const BoundBreakdown& b);

}  // namespace fedspan
