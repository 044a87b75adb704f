#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "fedspan/clustering.hpp"
#include "fedspan/graph.hpp"
#include "fedspan/link.hpp"

namespace fedspan {

inline constexpr double kInfeasibleCost = std::numeric_limits<double>::infinity();

double edge_cost(double rate_bps, double model_bits, double tx_power_w, double alpha2, double alpha3);

struct SpanningOptions {
  Direction direction = Direction::Downward;
  int terminals_per_sat = 4;
  double model_bits = 6.5e6 * 8.0;
  double tx_power_w = 1.0;
  double alpha2 = 1.0;
  double alpha3 = 1.0;
  std::vector<int> roots;  // one per cluster; empty selects roots automatically
};

struct SpanningSolution {
  DirectedForest forest;
  CBM cbm;
  Eigen::MatrixXd rate;  // satellite-level rates of the realized edges
  double objective = 0.0;
  int depth = 0;
};

// Sum over trees of alpha2 * tree latency + alpha3 * tree energy.
double forest_objective(const DirectedForest& f, const Eigen::MatrixXd& rate, const SpanningOptions& o);

SpanningSolution build_forest(const CandidateSet& cands, const VCPartition& part, const SpanningOptions& o);
SpanningSolution brute_force_optimum(const CandidateSet& cands, const VCPartition& part, const SpanningOptions& o);

// Every forest link must meet the minimum rate at each second of
// [t_start, t_start + duration_s). Returns one entry per broken link.
Diagnostics stability_filter(const ConstellationTimeline& tl, const LinkBudgetParams& p, const SpanningSolution& s,
                             int t_start, int duration_s);

void write_edges_header(std::ostream& out);
void write_edges(std::ostream& out, const CBM& cbm, const std::string& phase);

}  // namespace fedspan
