#include "fedspan/spanning.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "fedspan/accounting.hpp"
#include "fedspan/csv.hpp"
#include "fedspan/errors.hpp"

namespace fedspan {

double edge_cost(double rate_bps, double model_bits, double tx_power_w, double alpha2, double alpha3) {
  if (!(rate_bps > 0.0)) return kInfeasibleCost;
  double lat = model_bits / rate_bps;
  return alpha2 * lat + alpha3 * lat * tx_power_w;
}

namespace {

struct TreeBuild {
  std::vector<int> next;  // toward the root, indexed by cluster-local position
  double objective = kInfeasibleCost;
};

// Rate of the edge that carries a model between the tree node u and v,
// following the phase direction.
double oriented_rate(const CandidateSet& c, Direction d, int u_tree, int v_new) {
  return d == Direction::Downward ? c.rate(u_tree, v_new) : c.rate(v_new, u_tree);
}

DirectedForest local_forest(const std::vector<int>& next, Direction d) { return forest_from_next_hop(next, d); }

double tree_objective(const std::vector<int>& mem, const std::vector<int>& next, const CandidateSet& c,
                      const SpanningOptions& o) {
  const int m = static_cast<int>(mem.size());
  DirectedForest f = local_forest(next, o.direction);
  Eigen::MatrixXd r(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) r(a, b) = c.rate(mem[a], mem[b]);
  return forest_objective(f, r, o);
}

std::vector<int> subtree(const std::vector<int>& next, int w) {
  std::vector<int> out{w};
  for (size_t i = 0; i < out.size(); ++i)
    for (int v = 0; v < static_cast<int>(next.size()); ++v)
      if (next[v] == out[i]) out.push_back(v);
  return out;
}

// Cheapest-edge growth from `root` with terminal budget, plus a repair step
// that re-parents a child of a saturated node when growth is blocked.
std::vector<int> grow(const std::vector<int>& mem, int root, double blend, const CandidateSet& c,
                      const SpanningOptions& o, int cluster_id) {
  const int m = static_cast<int>(mem.size());
  const int cap = o.terminals_per_sat;
  std::vector<int> next(static_cast<size_t>(m), -1);
  std::vector<bool> in(static_cast<size_t>(m), false);
  std::vector<int> deg(static_cast<size_t>(m), 0);
  std::vector<double> arrival(static_cast<size_t>(m), 0.0);
  auto lat = [&](int u, int v) {
    double r = oriented_rate(c, o.direction, mem[u], mem[v]);
    return r > 0.0 ? o.model_bits / r : kInfeasibleCost;
  };
  auto cost = [&](int u, int v) {
    return edge_cost(oriented_rate(c, o.direction, mem[u], mem[v]), o.model_bits, o.tx_power_w, o.alpha2, o.alpha3);
  };
  auto refresh_arrival = [&]() {
    for (int pass = 0; pass < m; ++pass)
      for (int v = 0; v < m; ++v)
        if (in[v] && next[v] >= 0) arrival[v] = arrival[next[v]] + lat(next[v], v);
  };
  in[root] = true;
  for (int added = 1; added < m; ++added) {
    int bu = -1, bv = -1;
    double best = kInfeasibleCost;
    bool any_edge = false;
    for (int u = 0; u < m; ++u) {
      if (!in[u]) continue;
      for (int v = 0; v < m; ++v) {
        if (in[v]) continue;
        double ec = cost(u, v);
        if (!std::isfinite(ec)) continue;
        any_edge = true;
        if (deg[u] >= cap || deg[v] >= cap) continue;
        double key = ec + blend * o.alpha2 * arrival[u];
        if (key < best) {
          best = key;
          bu = u;
          bv = v;
        }
      }
    }
    if (!any_edge)
      throw InfeasibleError("cluster " + std::to_string(cluster_id) + " is disconnected under the candidate links");
    if (bu < 0) {
      // Repair: free a terminal at a saturated tree node by moving one of its
      // children under another node with spare capacity.
      double best_repair = kInfeasibleCost;
      int ru = -1, rv = -1, rw = -1, rx = -1;
      for (int u = 0; u < m; ++u) {
        if (!in[u] || deg[u] < cap) continue;
        for (int v = 0; v < m; ++v) {
          if (in[v] || !std::isfinite(cost(u, v))) continue;
          for (int w = 0; w < m; ++w) {
            if (next[w] != u) continue;
            auto sub = subtree(next, w);
            for (int x = 0; x < m; ++x) {
              if (!in[x] || x == u || deg[x] >= cap || std::find(sub.begin(), sub.end(), x) != sub.end()) continue;
              double delta = cost(x, w) - cost(u, w) + cost(u, v);
              if (std::isfinite(delta) && delta < best_repair) {
                best_repair = delta;
                ru = u, rv = v, rw = w, rx = x;
              }
            }
          }
        }
      }
      if (ru < 0)
        throw InfeasibleError("cluster " + std::to_string(cluster_id) + ": terminal budget blocks a spanning tree");
      next[rw] = rx;
      deg[ru]--;
      deg[rx]++;
      bu = ru;
      bv = rv;
    }
    next[bv] = bu;
    in[bv] = true;
    deg[bu]++;
    deg[bv]++;
    refresh_arrival();
  }
  return next;
}

int fallback_root(const std::vector<int>& mem, const CandidateSet& c, const SpanningOptions& o) {
  int best = 0;
  double best_sum = kInfeasibleCost;
  for (size_t a = 0; a < mem.size(); ++a) {
    double s = 0.0;
    for (size_t b = 0; b < mem.size(); ++b) {
      if (a == b) continue;
      double ec = edge_cost(c.rate(mem[a], mem[b]), o.model_bits, o.tx_power_w, o.alpha2, o.alpha3);
      if (std::isfinite(ec)) s += ec;
    }
    if (s < best_sum) {
      best_sum = s;
      best = static_cast<int>(a);
    }
  }
  return best;
}

SpanningSolution assemble(const CandidateSet& c, const VCPartition& part, const std::vector<int>& next_global,
                          const SpanningOptions& o) {
  const int n = c.n_sats();
  SpanningSolution s;
  s.forest = forest_from_next_hop(next_global, o.direction, part.assignment);
  s.rate = Eigen::MatrixXd::Zero(n, n);
  s.cbm.n_sats = n;
  s.cbm.terminals_per_sat = o.terminals_per_sat;
  s.cbm.t = c.t;
  std::vector<int> used(static_cast<size_t>(n), 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (s.forest.adj(i, j)) {
        s.rate(i, j) = c.rate(i, j);
        s.cbm.links.push_back({i, used[i]++, j, used[j]++});
      }
  s.objective = forest_objective(s.forest, s.rate, o);
  for (int v = 0; v < n; ++v) {
    int d = 0;
    for (int cur = v; next_global[cur] >= 0; cur = next_global[cur]) ++d;
    s.depth = std::max(s.depth, d);
  }
  return s;
}

void check_inputs(const CandidateSet& c, const VCPartition& part, const SpanningOptions& o) {
  if (static_cast<int>(part.assignment.size()) != c.n_sats())
    throw ArgumentError("partition size does not match candidate set");
  for (int a : part.assignment)
    if (a < 0 || a >= part.n_clusters) throw ArgumentError("partition leaves a satellite unassigned");
  if (!o.roots.empty() && static_cast<int>(o.roots.size()) != part.n_clusters)
    throw ArgumentError("one root per cluster required");
}

}  // namespace

double forest_objective(const DirectedForest& f, const Eigen::MatrixXd& rate, const SpanningOptions& o) {
  Eigen::VectorXd power = Eigen::VectorXd::Constant(f.n(), o.tx_power_w);
  LatencyReport rep = phase_latency(f, rate, o.model_bits);
  std::vector<int> next = toward_root(f);
  // Per-tree latency: the largest arrival among nodes of each tree.
  std::vector<int> root_of(static_cast<size_t>(f.n()));
  for (int v = 0; v < f.n(); ++v) {
    int cur = v;
    for (int guard = 0; next[cur] >= 0 && guard <= f.n(); ++guard) cur = next[cur];
    root_of[v] = cur;
  }
  Eigen::VectorXd tree_lat = Eigen::VectorXd::Zero(f.n());
  for (int v = 0; v < f.n(); ++v) {
    double a = f.direction == Direction::Downward ? rep.arrival(v) : rep.arrival(root_of[v]);
    tree_lat(root_of[v]) = std::max(tree_lat(root_of[v]), a);
  }
  return o.alpha2 * tree_lat.sum() + o.alpha3 * phase_energy(f, rate, o.model_bits, power);
}

SpanningSolution build_forest(const CandidateSet& c, const VCPartition& part, const SpanningOptions& o) {
  check_inputs(c, part, o);
  const int n = c.n_sats();
  std::vector<int> next_global(static_cast<size_t>(n), -1);
  auto mem = part.members();
  const double blends[] = {0.0, 0.5, 1.0};
  for (int cid = 0; cid < part.n_clusters; ++cid) {
    const auto& m = mem[cid];
    std::vector<int> roots;
    if (!o.roots.empty()) {
      auto it = std::find(m.begin(), m.end(), o.roots[cid]);
      if (it == m.end()) throw ArgumentError("root of cluster " + std::to_string(cid) + " is not a member");
      roots.push_back(static_cast<int>(it - m.begin()));
    } else if (m.size() <= 32) {
      for (size_t a = 0; a < m.size(); ++a) roots.push_back(static_cast<int>(a));
    } else {
      roots.push_back(fallback_root(m, c, o));
    }
    TreeBuild best;
    std::string last_error;
    for (int r : roots) {
      for (double blend : blends) {
        try {
          auto next = grow(m, r, blend, c, o, cid);
          double obj = tree_objective(m, next, c, o);
          if (obj < best.objective) {
            best.objective = obj;
            best.next = next;
          }
        } catch (const InfeasibleError& e) {
          last_error = e.what();
        }
      }
    }
    if (best.next.empty()) throw InfeasibleError(last_error);
    for (size_t a = 0; a < m.size(); ++a) next_global[m[a]] = best.next[a] < 0 ? -1 : m[best.next[a]];
  }
  return assemble(c, part, next_global, o);
}

SpanningSolution brute_force_optimum(const CandidateSet& c, const VCPartition& part, const SpanningOptions& o) {
  check_inputs(c, part, o);
  const int n = c.n_sats();
  std::vector<int> next_global(static_cast<size_t>(n), -1);
  auto mem = part.members();
  for (int cid = 0; cid < part.n_clusters; ++cid) {
    const auto& m = mem[cid];
    const int k = static_cast<int>(m.size());
    if (k > 6) throw SizeError("brute_force_optimum supports clusters of at most 6 satellites");
    Adjacency mask = Adjacency::Zero(k, k);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b)
        if (a != b && c.rate(m[a], m[b]) > 0.0) mask(a, b) = 1;
    double best = kInfeasibleCost;
    std::vector<int> best_next;
    for (int r = 0; r < k; ++r) {
      if (!o.roots.empty() && m[r] != o.roots[cid]) continue;
      for (const auto& f : enumerate_arborescences(mask, r, o.direction)) {
        Eigen::VectorXi deg = f.adj.rowwise().sum() + f.adj.colwise().sum().transpose();
        if (deg.maxCoeff() > o.terminals_per_sat) continue;
        auto next = toward_root(f);
        double obj = tree_objective(m, next, c, o);
        if (obj < best) {
          best = obj;
          best_next = next;
        }
      }
    }
    if (best_next.empty())
      throw InfeasibleError("cluster " + std::to_string(cid) + " admits no spanning tree under the candidate links");
    for (int a = 0; a < k; ++a) next_global[m[a]] = best_next[a] < 0 ? -1 : m[best_next[a]];
  }
  return assemble(c, part, next_global, o);
}

Diagnostics stability_filter(const ConstellationTimeline& tl, const LinkBudgetParams& p, const SpanningSolution& s,
                             int t_start, int duration_s) {
  if (t_start < 0 || duration_s < 0 || t_start + duration_s - 1 > tl.horizon())
    throw RangeError("stability window outside horizon");
  Diagnostics out;
  const auto& adj = s.forest.adj;
  for (int i = 0; i < adj.rows(); ++i)
    for (int j = 0; j < adj.cols(); ++j) {
      if (!adj(i, j)) continue;
      for (int t = t_start; t < t_start + duration_s; ++t) {
        double r = link_rate_at(tl, p, i, j, t);
        if (r < p.min_rate_bps) {
          out.push_back({"broken", std::to_string(i) + "->" + std::to_string(j) + " at t=" + std::to_string(t)});
          break;
        }
      }
    }
  return out;
}

void write_edges_header(std::ostream& out) { out << "from_sat,from_term,to_sat,to_term,phase,t\n"; }

void write_edges(std::ostream& out, const CBM& cbm, const std::string& phase) {
  for (const auto& l : cbm.links)
    out << l.from_sat << ',' << l.from_term << ',' << l.to_sat << ',' << l.to_term << ',' << phase << ','
        << csv::num(cbm.t) << '\n';
}

}  // namespace fedspan
