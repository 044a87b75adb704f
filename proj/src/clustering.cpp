#include "fedspan/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "fedspan/csv.hpp"
#include "fedspan/errors.hpp"

namespace fedspan {

std::vector<std::vector<int>> VCPartition::members() const {
  std::vector<std::vector<int>> m(static_cast<size_t>(n_clusters));
  for (size_t s = 0; s < assignment.size(); ++s)
    if (assignment[s] >= 0 && assignment[s] < n_clusters) m[assignment[s]].push_back(static_cast<int>(s));
  return m;
}

VCPartition VCPartition::single(int n_sats) { return {std::vector<int>(static_cast<size_t>(n_sats), 0), 1}; }

Diagnostics validate_partition(const VCPartition& p, int n_sats) {
  Diagnostics out;
  if (static_cast<int>(p.assignment.size()) != n_sats)
    out.push_back({"coverage", "assignment has " + std::to_string(p.assignment.size()) + " entries for " +
                                   std::to_string(n_sats) + " satellites"});
  std::vector<int> size(static_cast<size_t>(std::max(p.n_clusters, 0)), 0);
  for (size_t s = 0; s < p.assignment.size(); ++s) {
    int c = p.assignment[s];
    if (c < 0) {
      out.push_back({"coverage", "satellite " + std::to_string(s) + " unassigned"});
    } else if (c >= p.n_clusters) {
      out.push_back({"cluster-id", "satellite " + std::to_string(s) + " in unknown cluster " + std::to_string(c)});
    } else {
      size[c]++;
    }
  }
  for (int c = 0; c < p.n_clusters; ++c)
    if (size[c] < 2) out.push_back({"min-size", "cluster " + std::to_string(c) + " has " + std::to_string(size[c]) + " members"});
  return out;
}

Diagnostics validate_partition(const Eigen::MatrixXi& gamma) {
  Diagnostics out;
  for (int n = 0; n < gamma.cols(); ++n) {
    int k = gamma.col(n).sum();
    if (k == 0) out.push_back({"coverage", "satellite " + std::to_string(n) + " unassigned"});
    if (k > 1) out.push_back({"uniqueness", "satellite " + std::to_string(n) + " in " + std::to_string(k) + " clusters"});
  }
  for (int c = 0; c < gamma.rows(); ++c)
    if (gamma.row(c).sum() < 2)
      out.push_back({"min-size", "cluster " + std::to_string(c) + " has " + std::to_string(gamma.row(c).sum()) + " members"});
  return out;
}

double zeta_loc_min(const std::vector<ProbeGradients>& g, const Eigen::VectorXd& a) {
  if (g.empty()) throw ArgumentError("zeta_loc_min: empty cluster");
  if (static_cast<int>(g.size()) != a.size()) throw ArgumentError("zeta_loc_min: weight count mismatch");
  const Eigen::Index probes = g.front().cols();
  if (probes < 1) throw ArgumentError("zeta_loc_min: no probe points");
  double best = 0.0;
  for (Eigen::Index p = 0; p < probes; ++p) {
    double num = 0.0;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(g.front().rows());
    for (size_t n = 0; n < g.size(); ++n) {
      num += a(n) * g[n].col(p).squaredNorm();
      mean += a(n) * g[n].col(p);
    }
    double den = mean.squaredNorm();
    if (!(den > 0.0)) throw DegenerateError("zeta_loc_min: weighted gradient vanishes at probe " + std::to_string(p));
    best = std::max(best, num / den);
  }
  return best;
}

void data_weights(const VCPartition& p, const Eigen::VectorXd& d, Eigen::VectorXd& a, Eigen::VectorXd& b) {
  const int n = static_cast<int>(p.assignment.size());
  Eigen::VectorXd dc = Eigen::VectorXd::Zero(p.n_clusters);
  for (int s = 0; s < n; ++s) dc(p.assignment[s]) += d(s);
  a.resize(n);
  for (int s = 0; s < n; ++s) a(s) = d(s) / dc(p.assignment[s]);
  b = dc / dc.sum();
}

namespace {

std::vector<Eigen::VectorXd> cluster_gradient(const VCPartition& p, const std::vector<ProbeGradients>& g,
                                              const Eigen::VectorXd& a, Eigen::Index probe,
                                              std::vector<double>* spread) {
  std::vector<Eigen::VectorXd> gc(static_cast<size_t>(p.n_clusters), Eigen::VectorXd::Zero(g.front().rows()));
  if (spread) spread->assign(static_cast<size_t>(p.n_clusters), 0.0);
  for (size_t s = 0; s < g.size(); ++s) {
    int c = p.assignment[s];
    gc[c] += a(s) * g[s].col(probe);
    if (spread) (*spread)[c] += a(s) * g[s].col(probe).squaredNorm();
  }
  return gc;
}

}  // namespace

HeterogeneityStats zeta_glob2_bound(const VCPartition& p, const std::vector<ProbeGradients>& grads, Eigen::VectorXd a,
                                    Eigen::VectorXd b, const Eigen::VectorXd& data_sizes) {
  if (a.size() == 0 || b.size() == 0) {
    if (data_sizes.size() != static_cast<Eigen::Index>(grads.size()))
      throw ArgumentError("zeta_glob2_bound: weights or data sizes required");
    data_weights(p, data_sizes, a, b);
  }
  HeterogeneityStats st;
  st.a = a;
  st.b = b;
  st.zeta_loc_min.resize(p.n_clusters);
  auto mem = p.members();
  for (int c = 0; c < p.n_clusters; ++c) {
    std::vector<ProbeGradients> g;
    Eigen::VectorXd w(static_cast<Eigen::Index>(mem[c].size()));
    for (size_t i = 0; i < mem[c].size(); ++i) {
      g.push_back(grads[mem[c][i]]);
      w(i) = a(mem[c][i]);
    }
    st.zeta_loc_min(c) = zeta_loc_min(g, w);
  }
  st.zeta_loc_hat = st.zeta_loc_min.maxCoeff();
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> spread;
  for (Eigen::Index q = 0; q < grads.front().cols(); ++q) {
    auto gc = cluster_gradient(p, grads, a, q, &spread);
    double num = 0.0;
    Eigen::VectorXd total = Eigen::VectorXd::Zero(grads.front().rows());
    for (int c = 0; c < p.n_clusters; ++c) {
      num += b(c) * spread[c];
      total += b(c) * gc[c];
    }
    best = std::max(best, (num - st.zeta_loc_hat * total.squaredNorm()) / st.zeta_loc_hat);
  }
  st.zeta_glob2_lb = best;
  return st;
}

double zeta_glob2_sample(const VCPartition& p, const std::vector<ProbeGradients>& grads, const Eigen::VectorXd& a,
                         const Eigen::VectorXd& b) {
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index q = 0; q < grads.front().cols(); ++q) {
    auto gc = cluster_gradient(p, grads, a, q, nullptr);
    double lhs = 0.0;
    Eigen::VectorXd total = Eigen::VectorXd::Zero(grads.front().rows());
    for (int c = 0; c < p.n_clusters; ++c) {
      lhs += b(c) * gc[c].squaredNorm();
      total += b(c) * gc[c];
    }
    best = std::max(best, lhs - total.squaredNorm());
  }
  return best;
}

double cluster_objective(const ConstellationTimeline& tl, int t, const ClusterData& data, const VCPartition& p) {
  auto mem = p.members();
  const double scale = kPi * tl.r_eff();
  double geo = 0.0, het = 0.0;
  for (const auto& m : mem) {
    if (m.size() < 2) return std::numeric_limits<double>::infinity();
    double s = 0.0;
    int pairs = 0;
    for (size_t i = 0; i < m.size(); ++i)
      for (size_t j = i + 1; j < m.size(); ++j) {
        s += distance_at(tl, m[i], m[j], t) / scale;
        ++pairs;
      }
    geo += s / pairs;
    if (!data.grads.empty() && data.data_weight > 0.0) {
      std::vector<ProbeGradients> g;
      Eigen::VectorXd w(static_cast<Eigen::Index>(m.size()));
      double dc = 0.0;
      for (int s2 : m) dc += data.data_sizes.size() ? data.data_sizes(s2) : 1.0;
      for (size_t i = 0; i < m.size(); ++i) {
        g.push_back(data.grads[m[i]]);
        w(i) = (data.data_sizes.size() ? data.data_sizes(m[i]) : 1.0) / dc;
      }
      try {
        het += zeta_loc_min(g, w) - 1.0;
      } catch (const DegenerateError&) {
        het += 1e6;
      }
    }
  }
  return data.geo_weight * geo + data.data_weight * het;
}

VCPartition cluster_heuristic(const ConstellationTimeline& tl, int t, const ClusterData& data, int c_target) {
  const int n = tl.n_sats();
  if (c_target < 1 || 2 * c_target > n) throw ArgumentError("cluster_heuristic: need 1 <= C and 2C <= N");
  if (c_target == 1) return VCPartition::single(n);

  // Farthest-point seeding from satellite 0.
  std::vector<int> seeds{0};
  while (static_cast<int>(seeds.size()) < c_target) {
    int best = -1;
    double best_d = -1.0;
    for (int s = 0; s < n; ++s) {
      if (std::find(seeds.begin(), seeds.end(), s) != seeds.end()) continue;
      double d = std::numeric_limits<double>::infinity();
      for (int q : seeds) d = std::min(d, distance_at(tl, s, q, t));
      if (d > best_d) {
        best_d = d;
        best = s;
      }
    }
    seeds.push_back(best);
  }
  VCPartition p{std::vector<int>(static_cast<size_t>(n), -1), c_target};
  for (int c = 0; c < c_target; ++c) p.assignment[seeds[c]] = c;
  // Each seed first takes its nearest free satellite so every cluster has two.
  for (int c = 0; c < c_target; ++c) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int s = 0; s < n; ++s) {
      if (p.assignment[s] >= 0) continue;
      double d = distance_at(tl, s, seeds[c], t);
      if (d < best_d) {
        best_d = d;
        best = s;
      }
    }
    p.assignment[best] = c;
  }
  for (int s = 0; s < n; ++s) {
    if (p.assignment[s] >= 0) continue;
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < c_target; ++c) {
      double d = distance_at(tl, s, seeds[c], t);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    p.assignment[s] = best;
  }

  // Local improvement: single moves and pairwise swaps, first improvement.
  double cur = cluster_objective(tl, t, data, p);
  for (int pass = 0; pass < 50; ++pass) {
    bool improved = false;
    for (int s = 0; s < n; ++s) {
      for (int c = 0; c < c_target; ++c) {
        int old = p.assignment[s];
        if (c == old) continue;
        p.assignment[s] = c;
        double v = cluster_objective(tl, t, data, p);
        if (v < cur - 1e-12) {
          cur = v;
          improved = true;
        } else {
          p.assignment[s] = old;
        }
      }
    }
    for (int s = 0; s < n; ++s)
      for (int q = s + 1; q < n; ++q) {
        if (p.assignment[s] == p.assignment[q]) continue;
        std::swap(p.assignment[s], p.assignment[q]);
        double v = cluster_objective(tl, t, data, p);
        if (v < cur - 1e-12) {
          cur = v;
          improved = true;
        } else {
          std::swap(p.assignment[s], p.assignment[q]);
        }
      }
    if (!improved) break;
  }
  return p;
}

VCPartition read_partition_csv(const std::string& path) {
  csv::Table t = csv::read(path);
  if (t.header != std::vector<std::string>{"sat_id", "cluster_id"})
    throw ParseError("line 1: expected header 'sat_id,cluster_id'");
  std::map<int, int> m;
  int clusters = 0;
  for (size_t i = 0; i < t.rows.size(); ++i) {
    if (t.rows[i].size() != 2) throw ParseError("line " + std::to_string(t.line[i]) + ": expected 2 fields");
    try {
      int s = std::stoi(t.rows[i][0]);
      int c = std::stoi(t.rows[i][1]);
      if (s < 0 || c < 0) throw std::invalid_argument("negative");
      m[s] = c;
      clusters = std::max(clusters, c + 1);
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(t.line[i]) + ": bad integer");
    }
  }
  VCPartition p;
  p.n_clusters = clusters;
  p.assignment.assign(m.empty() ? 0 : static_cast<size_t>(m.rbegin()->first + 1), -1);
  for (auto [s, c] : m) p.assignment[s] = c;
  return p;
}

void write_partition_csv(const std::string& path, const VCPartition& p) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "sat_id,cluster_id\n";
  for (size_t s = 0; s < p.assignment.size(); ++s) out << s << ',' << p.assignment[s] << '\n';
}

}  // namespace fedspan
