#include "fedspan/graph.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>

#include "fedspan/csv.hpp"
#include "fedspan/errors.hpp"

namespace fedspan {

const char* to_string(Direction d) { return d == Direction::Downward ? "downward" : "upward"; }

Adjacency cbm_to_adjacency(const CBM& cbm) {
  Adjacency g = Adjacency::Zero(cbm.n_sats, cbm.n_sats);
  for (const auto& l : cbm.links) g(l.from_sat, l.to_sat) = 1;
  return g;
}

Adjacency saturating_path_counts(const Adjacency& gamma) {
  const int n = static_cast<int>(gamma.rows());
  Adjacency power = gamma.cwiseMin(n);
  Adjacency sum = power;
  for (int q = 2; q <= n - 1; ++q) {
    power = (power * gamma).cwiseMin(n);
    sum = (sum + power).cwiseMin(n);
  }
  return sum;
}

Diagnostics validate_tree(const DirectedForest& f) {
  Diagnostics out;
  const int n = f.n();
  const bool down = f.direction == Direction::Downward;
  auto node = [](int i) { return "node " + std::to_string(i); };
  if (f.adj.cols() != n || f.roots.size() != n || (!f.cluster.empty() && static_cast<int>(f.cluster.size()) != n)) {
    out.push_back({"shape", "adjacency, roots and clusters disagree on size"});
    return out;
  }
  for (int i = 0; i < n; ++i) {
    if (f.adj(i, i) != 0) out.push_back({"diagonal", node(i)});
    for (int j = 0; j < n; ++j)
      if (f.adj(i, j) != 0 && f.adj(i, j) != 1) out.push_back({"binary", node(i) + "," + std::to_string(j)});
  }

  std::map<int, std::vector<int>> members;
  for (int i = 0; i < n; ++i) members[f.cluster_of(i)].push_back(i);

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (f.adj(i, j) && f.cluster_of(i) != f.cluster_of(j))
        out.push_back({"cross-cluster", std::to_string(i) + "->" + std::to_string(j)});

  for (const auto& [c, mem] : members) {
    const int m = static_cast<int>(mem.size());
    std::string tag = "cluster " + std::to_string(c);
    Adjacency sub(m, m);
    int root = -1, root_count = 0, edges = 0;
    for (int a = 0; a < m; ++a) {
      for (int b = 0; b < m; ++b) {
        sub(a, b) = f.adj(mem[a], mem[b]);
        edges += sub(a, b);
      }
      if (f.roots(mem[a])) {
        root = a;
        ++root_count;
      }
    }
    if (root_count != 1) {
      out.push_back({"root-count", tag + " has " + std::to_string(root_count) + " roots"});
      continue;
    }
    if (edges != m - 1)
      out.push_back({"edge-count", tag + " has " + std::to_string(edges) + " edges, expected " + std::to_string(m - 1)});
    Eigen::VectorXi in = sub.colwise().sum().transpose();
    Eigen::VectorXi outd = sub.rowwise().sum();
    for (int a = 0; a < m; ++a) {
      int want = a == root ? 0 : 1;
      int have = down ? in(a) : outd(a);
      if (have != want)
        out.push_back({"degree", node(mem[a]) + (down ? " in-degree " : " out-degree ") + std::to_string(have) +
                                     ", expected " + std::to_string(want)});
    }
    Adjacency paths = saturating_path_counts(sub);
    for (int a = 0; a < m; ++a) {
      if (a == root) continue;
      int count = down ? paths(root, a) : paths(a, root);
      if (count != 1)
        out.push_back({"path", node(mem[a]) + " has " + std::to_string(count) + " paths to the root"});
    }
  }
  return out;
}

std::vector<DirectedForest> enumerate_arborescences(const Adjacency& mask, int root, Direction direction) {
  const int n = static_cast<int>(mask.rows());
  if (n > 8) throw SizeError("enumerate_arborescences supports at most 8 nodes");
  if (root < 0 || root >= n) throw ArgumentError("root out of range");
  const bool down = direction == Direction::Downward;
  std::vector<std::vector<int>> options(static_cast<size_t>(n));
  for (int v = 0; v < n; ++v) {
    if (v == root) continue;
    for (int u = 0; u < n; ++u) {
      if (u == v) continue;
      if (down ? mask(u, v) : mask(v, u)) options[v].push_back(u);
    }
  }
  std::vector<DirectedForest> out;
  std::vector<int> next(static_cast<size_t>(n), -1);
  auto reaches_root = [&]() {
    for (int v = 0; v < n; ++v) {
      int cur = v, steps = 0;
      while (cur != root && steps <= n) {
        cur = next[cur];
        ++steps;
      }
      if (cur != root) return false;
    }
    return true;
  };
  std::function<void(int)> rec = [&](int v) {
    if (v == n) {
      if (reaches_root()) out.push_back(forest_from_next_hop(next, direction));
      return;
    }
    if (v == root) return rec(v + 1);
    for (int u : options[v]) {
      next[v] = u;
      rec(v + 1);
    }
    next[v] = -1;
  };
  rec(0);
  return out;
}

std::vector<int> toward_root(const DirectedForest& f) {
  const int n = f.n();
  std::vector<int> next(static_cast<size_t>(n), -1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (f.adj(i, j)) {
        if (f.direction == Direction::Downward)
          next[j] = i;
        else
          next[i] = j;
      }
  for (int i = 0; i < n; ++i)
    if (f.roots(i)) next[i] = -1;
  return next;
}

std::vector<int> path_to_root(const DirectedForest& f, int node) {
  if (node < 0 || node >= f.n()) throw ArgumentError("node out of range");
  Diagnostics d = validate_tree(f);
  if (!d.empty()) throw StructureError("invalid forest: " + d.front().rule + " (" + d.front().detail + ")");
  std::vector<int> next = toward_root(f);
  std::vector<int> path{node};
  while (next[path.back()] >= 0) path.push_back(next[path.back()]);
  return path;
}

DirectedForest forest_from_next_hop(const std::vector<int>& next, Direction direction, std::vector<int> cluster) {
  const int n = static_cast<int>(next.size());
  DirectedForest f;
  f.adj = Adjacency::Zero(n, n);
  f.roots = Eigen::VectorXi::Zero(n);
  f.direction = direction;
  f.cluster = std::move(cluster);
  for (int v = 0; v < n; ++v) {
    if (next[v] < 0) {
      f.roots(v) = 1;
      continue;
    }
    if (direction == Direction::Downward)
      f.adj(next[v], v) = 1;
    else
      f.adj(v, next[v]) = 1;
  }
  return f;
}

std::vector<int> root_first_order(const DirectedForest& f) {
  const int n = f.n();
  std::vector<int> next = toward_root(f);
  std::vector<int> depth(static_cast<size_t>(n), -1);
  std::function<int(int, int)> d = [&](int v, int guard) -> int {
    if (depth[v] >= 0) return depth[v];
    if (next[v] < 0 || guard > n) return depth[v] = 0;
    return depth[v] = d(next[v], guard + 1) + 1;
  };
  std::vector<int> order(static_cast<size_t>(n));
  for (int v = 0; v < n; ++v) {
    d(v, 0);
    order[v] = v;
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return depth[a] < depth[b]; });
  return order;
}

Adjacency read_adjacency_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<std::vector<int>> rows;
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (csv::trim(line).empty()) continue;
    std::vector<int> row;
    for (const auto& cell : csv::split(line)) {
      if (cell != "0" && cell != "1") throw ParseError("line " + std::to_string(no) + ": entries must be 0 or 1");
      row.push_back(cell == "1");
    }
    rows.push_back(row);
  }
  const int n = static_cast<int>(rows.size());
  Adjacency g(n, n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(rows[i].size()) != n) throw ParseError("adjacency must be square");
    for (int j = 0; j < n; ++j) g(i, j) = rows[i][j];
  }
  return g;
}

void write_adjacency_csv(const std::string& path, const Adjacency& adj) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (int i = 0; i < adj.rows(); ++i) {
    for (int j = 0; j < adj.cols(); ++j) out << (j ? "," : "") << adj(i, j);
    out << '\n';
  }
}

}  // namespace fedspan
