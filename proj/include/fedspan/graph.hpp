#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "fedspan/link.hpp"

namespace fedspan {

using Adjacency = Eigen::MatrixXi;

enum class Direction { Downward, Upward };

const char* to_string(Direction d);

// Gamma plus root indicators. Downward trees carry edges parent -> child,
// upward trees child -> parent. An empty cluster vector means one cluster.
struct DirectedForest {
  Adjacency adj;
  Eigen::VectorXi roots;
  Direction direction = Direction::Downward;
  std::vector<int> cluster;

  int n() const { return static_cast<int>(adj.rows()); }
  int cluster_of(int node) const { return cluster.empty() ? 0 : cluster[node]; }
};

Adjacency cbm_to_adjacency(const CBM& cbm);

Diagnostics validate_tree(const DirectedForest& f);
inline bool is_valid(const DirectedForest& f) { return validate_tree(f).empty(); }

// Sum over q = 1..n-1 of Gamma^q with entries saturated at n.
Adjacency saturating_path_counts(const Adjacency& gamma);

std::vector<DirectedForest> enumerate_arborescences(const Adjacency& mask, int root, Direction direction);

// Nodes from `node` to its root, inclusive. Throws StructureError on an
// invalid forest.
std::vector<int> path_to_root(const DirectedForest& f, int node);

// Neighbor one hop closer to the root for every node (-1 at roots). Assumes
// degree conditions hold.
std::vector<int> toward_root(const DirectedForest& f);

// Builds a forest from per-node next-hop indices (-1 marks a root).
DirectedForest forest_from_next_hop(const std::vector<int>& next, Direction direction,
                                    std::vector<int> cluster = {});

// Nodes ordered so that every node appears after its next hop toward the root.
std::vector<int> root_first_order(const DirectedForest& f);

Adjacency read_adjacency_csv(const std::string& path);
void write_adjacency_csv(const std::string& path, const Adjacency& adj);

}  // namespace fedspan
