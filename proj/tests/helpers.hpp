#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "fedspan/graph.hpp"

namespace testing {

// Next-hop vector of a uniformly shuffled recursive tree over `nodes`.
inline void random_tree_into(const std::vector<int>& nodes, std::mt19937_64& rng, std::vector<int>& next) {
  std::vector<int> order = nodes;
  std::shuffle(order.begin(), order.end(), rng);
  next[order[0]] = -1;
  for (std::size_t i = 1; i < order.size(); ++i) next[order[i]] = order[rng() % i];
}

inline fedspan::DirectedForest random_tree(int n, std::mt19937_64& rng, fedspan::Direction d) {
  std::vector<int> nodes(n), next(n);
  std::iota(nodes.begin(), nodes.end(), 0);
  random_tree_into(nodes, rng, next);
  return fedspan::forest_from_next_hop(next, d);
}

// One tree per cluster; cluster sizes are at least two.
inline fedspan::DirectedForest random_forest(const std::vector<int>& cluster, int C, std::mt19937_64& rng,
                                             fedspan::Direction d) {
  std::vector<int> next(cluster.size());
  for (int c = 0; c < C; ++c) {
    std::vector<int> nodes;
    for (std::size_t i = 0; i < cluster.size(); ++i)
      if (cluster[i] == c) nodes.push_back(static_cast<int>(i));
    random_tree_into(nodes, rng, next);
  }
  return fedspan::forest_from_next_hop(next, d, cluster);
}

// Random assignment of n nodes to C clusters with at least two members each.
inline std::vector<int> random_clusters(int n, int C, std::mt19937_64& rng) {
  std::vector<int> a(n);
  for (int i = 0; i < n; ++i) a[i] = i < 2 * C ? i / 2 : static_cast<int>(rng() % C);
  std::shuffle(a.begin(), a.end(), rng);
  return a;
}

inline std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("fedspan_" + name)).string();
}

inline std::string write_temp(const std::string& name, const std::string& body) {
  std::string p = temp_path(name);
  std::ofstream(p) << body;
  return p;
}

}  // namespace testing
