#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "fedspan/constellation.hpp"
#include "fedspan/link.hpp"

namespace fedspan {

struct VCPartition {
  std::vector<int> assignment;  // cluster id per satellite, -1 when unassigned
  int n_clusters = 0;

  std::vector<std::vector<int>> members() const;
  static VCPartition single(int n_sats);
};

Diagnostics validate_partition(const VCPartition& p, int n_sats);
// Matrix form gamma (C x N); exposes multiple assignment, which the vector form
// cannot express.
Diagnostics validate_partition(const Eigen::MatrixXi& gamma);

// Gradients of one satellite at the shared probe points, one column per probe.
using ProbeGradients = Eigen::MatrixXd;

double zeta_loc_min(const std::vector<ProbeGradients>& member_grads, const Eigen::VectorXd& a);

struct HeterogeneityStats {
  Eigen::VectorXd zeta_loc_min;  // per cluster
  double zeta_loc_hat = 1.0;
  double zeta_glob2_lb = 0.0;
  Eigen::VectorXd a;  // per satellite, sums to one within each cluster
  Eigen::VectorXd b;  // per cluster, sums to one
};

// a: per satellite, b: per cluster. Empty vectors select the data weights
// a_n = D_n / D_c and b_c = D_c / D computed from `data_sizes`.
HeterogeneityStats zeta_glob2_bound(const VCPartition& p, const std::vector<ProbeGradients>& grads,
                                    Eigen::VectorXd a, Eigen::VectorXd b,
                                    const Eigen::VectorXd& data_sizes = {});

// Directly sampled global dissimilarity with zeta_glob1 = 1: the largest
// sum_c b_c |grad F_c|^2 - |sum_c b_c grad F_c|^2 over probes.
double zeta_glob2_sample(const VCPartition& p, const std::vector<ProbeGradients>& grads,
                         const Eigen::VectorXd& a, const Eigen::VectorXd& b);

void data_weights(const VCPartition& p, const Eigen::VectorXd& data_sizes, Eigen::VectorXd& a, Eigen::VectorXd& b);

struct ClusterData {
  std::vector<ProbeGradients> grads;  // may be empty: geography only
  Eigen::VectorXd data_sizes;
  double geo_weight = 1.0;
  double data_weight = 1.0;
};

double cluster_objective(const ConstellationTimeline& tl, int t, const ClusterData& data, const VCPartition& p);

VCPartition cluster_heuristic(const ConstellationTimeline& tl, int t, const ClusterData& data, int c_target);

VCPartition read_partition_csv(const std::string& path);
void write_partition_csv(const std::string& path, const VCPartition& p);

}  // namespace fedspan
