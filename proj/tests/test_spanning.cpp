#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "fedspan/errors.hpp"
#include "fedspan/spanning.hpp"

using namespace fedspan;

namespace {

CandidateSet candidates(const Eigen::MatrixXd& rate) {
  CandidateSet c;
  c.rate = rate;
  c.terminals_per_sat = 4;
  return c;
}

Eigen::MatrixXd random_rates(int n, std::mt19937_64& rng, double density = 1.0) {
  std::uniform_real_distribution<double> u(7e9, 40e9), coin(0, 1);
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (coin(rng) < density || b == a + 1) r(a, b) = r(b, a) = u(rng);
  return r;
}

// Exhaustive search over parent vectors: downward phase latency is the
// largest root-to-node path time, energy the sum over edges.
double exhaustive_best(const Eigen::MatrixXd& rate, const SpanningOptions& o) {
  const int n = static_cast<int>(rate.rows());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> parent(n);
  std::function<void(int, int)> rec = [&](int v, int root) {
    if (v == n) {
      double energy = 0.0, latency = 0.0;
      std::vector<int> deg(n, 0);
      for (int u = 0; u < n; ++u) {
        if (u == root) continue;
        double hop = o.model_bits / rate(parent[u], u);
        energy += hop * o.tx_power_w;
        ++deg[u];
        ++deg[parent[u]];
        double path = 0.0;
        int cur = u, steps = 0;
        while (cur != root && steps <= n) {
          path += o.model_bits / rate(parent[cur], cur);
          cur = parent[cur];
          ++steps;
        }
        if (cur != root) return;  // cycle
        latency = std::max(latency, path);
      }
      for (int d : deg)
        if (d > o.terminals_per_sat) return;
      best = std::min(best, o.alpha2 * latency + o.alpha3 * energy);
      return;
    }
    if (v == root) {
      rec(v + 1, root);
      return;
    }
    for (int p = 0; p < n; ++p)
      if (p != v && rate(p, v) > 0) {
        parent[v] = p;
        rec(v + 1, root);
      }
  };
  for (int r = 0; r < n; ++r) rec(0, r);
  return best;
}

}  // namespace

TEST_CASE("edge cost") {
  CHECK(edge_cost(9e9, 8e6, 1.0, 0.0, 0.0) == 0.0);
  CHECK(edge_cost(8e9, 8e6, 1.0, 1.0, 1.0) == doctest::Approx(2e-3).epsilon(1e-14));
  CHECK(std::isinf(edge_cost(0.0, 8e6, 1.0, 1.0, 1.0)));
}

TEST_CASE("dominant hub yields a star") {
  Eigen::MatrixXd r = Eigen::MatrixXd::Constant(5, 5, 7.5e9);
  r.row(0).setConstant(40e9);
  r.col(0).setConstant(40e9);
  r.diagonal().setZero();
  SpanningOptions o;
  SpanningSolution s = build_forest(candidates(r), VCPartition::single(5), o);
  CHECK(s.forest.roots(0) == 1);
  CHECK(s.forest.adj.row(0).sum() == 4);
  CHECK(s.depth == 1);
  CHECK(is_valid(s.forest));
}

TEST_CASE("chain-only candidates give the chain") {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(5, 5);
  for (int i = 0; i + 1 < 5; ++i) r(i, i + 1) = r(i + 1, i) = 10e9;
  SpanningOptions o;
  o.roots = {0};
  SpanningSolution s = build_forest(candidates(r), VCPartition::single(5), o);
  CHECK(s.depth == 4);
  for (int i = 0; i + 1 < 5; ++i) CHECK(s.forest.adj(i, i + 1) == 1);
}

TEST_CASE("disconnected cluster is infeasible") {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(4, 4);
  r(0, 1) = r(1, 0) = r(2, 3) = r(3, 2) = 10e9;
  CHECK_THROWS_AS(build_forest(candidates(r), VCPartition::single(4), SpanningOptions{}), InfeasibleError);
}

TEST_CASE("greedy against the exact optimum") {
  std::mt19937_64 rng(17);
  for (Direction d : {Direction::Downward, Direction::Upward}) {
    for (int trial = 0; trial < 40; ++trial) {
      Eigen::MatrixXd r = random_rates(5, rng, 0.7);
      SpanningOptions o;
      o.direction = d;
      o.terminals_per_sat = 2 + trial % 3;
      CandidateSet c = candidates(r);
      c.terminals_per_sat = o.terminals_per_sat;
      SpanningSolution exact;
      try {
        exact = brute_force_optimum(c, VCPartition::single(5), o);
      } catch (const InfeasibleError&) {
        continue;
      }
      SpanningSolution greedy = build_forest(c, VCPartition::single(5), o);
      CHECK(is_valid(greedy.forest));
      Eigen::VectorXi deg = greedy.forest.adj.rowwise().sum() + greedy.forest.adj.colwise().sum().transpose();
      CHECK(deg.maxCoeff() <= o.terminals_per_sat);
      CHECK(greedy.objective >= exact.objective * (1 - 1e-12));
      CHECK(greedy.objective <= 1.5 * exact.objective);
    }
  }
}

TEST_CASE("brute force matches an independent exhaustive search") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd r = random_rates(5, rng, 0.8);
    SpanningOptions o;
    o.alpha2 = 1.0 + trial % 3;
    o.alpha3 = 0.5;
    SpanningSolution s = brute_force_optimum(candidates(r), VCPartition::single(5), o);
    CHECK(s.objective == doctest::Approx(exhaustive_best(r, o)).epsilon(1e-12));
  }
}

TEST_CASE("brute force on uniform edges and on a single tree") {
  Eigen::MatrixXd r = Eigen::MatrixXd::Constant(6, 6, 10e9);
  r.diagonal().setZero();
  SpanningOptions o;
  o.alpha2 = 0.0;  // tree latency depends on shape; energy does not
  SpanningSolution s = brute_force_optimum(candidates(r), VCPartition{{0, 0, 0, 1, 1, 1}, 2}, o);
  CHECK(s.objective == doctest::Approx(4 * edge_cost(10e9, o.model_bits, 1.0, 0.0, 1.0)).epsilon(1e-12));

  Eigen::MatrixXd chain = Eigen::MatrixXd::Zero(4, 4);
  for (int i = 0; i + 1 < 4; ++i) chain(i, i + 1) = chain(i + 1, i) = 9e9;
  SpanningOptions fixed;
  fixed.roots = {0};
  SpanningSolution t = brute_force_optimum(candidates(chain), VCPartition::single(4), fixed);
  for (int i = 0; i + 1 < 4; ++i) CHECK(t.forest.adj(i, i + 1) == 1);
}

TEST_CASE("forest respects clusters and realizes a valid CBM") {
  std::mt19937_64 rng(3);
  Eigen::MatrixXd r = random_rates(8, rng);
  VCPartition p{{0, 1, 0, 1, 0, 1, 0, 1}, 2};
  SpanningSolution s = build_forest(candidates(r), p, SpanningOptions{});
  CHECK(is_valid(s.forest));
  CHECK(s.forest.roots.sum() == 2);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      if (s.forest.adj(i, j)) CHECK(p.assignment[i] == p.assignment[j]);
  RateTable rt;
  for (const auto& l : s.cbm.links) rt[l] = r(l.from_sat, l.to_sat);
  CHECK(validate_cbm(s.cbm, rt, 7e9).empty());
  CHECK(cbm_to_adjacency(s.cbm) == s.forest.adj);
}

TEST_CASE("stability filter") {
  LinkBudgetParams p = LinkBudgetParams::reference();
  ConstellationTimeline still = static_constellation({{0, 0}, {0, 0.05}, {0, 0.1}}, 30);
  CandidateSet c = feasible_cbm_candidates(still, p, 0, 4);
  SpanningSolution s = build_forest(c, VCPartition::single(3), SpanningOptions{});
  CHECK(stability_filter(still, p, s, 0, 30).empty());

  // satellite 1 drifts away past the laser range halfway through
  const double limit = threshold_distance_km(p) / still.r_eff();
  ConstellationTimeline tl(2, 20);
  for (int t = 0; t <= 20; ++t) {
    tl.set_sample(0, t, 0.0, 0.0);
    tl.set_sample(1, t, 0.0, limit * (0.52 + 0.05 * t));
  }
  SpanningSolution pair = build_forest(feasible_cbm_candidates(tl, p, 0, 4), VCPartition::single(2), SpanningOptions{});
  Diagnostics d = stability_filter(tl, p, pair, 0, 20);
  REQUIRE(d.size() == 1);
  CHECK(d.front().rule == "broken");
  // brute-force per-second re-evaluation
  int first_bad = -1;
  for (int t = 0; t < 20 && first_bad < 0; ++t)
    if (link_rate_at(tl, p, 0, 1, t) < p.min_rate_bps) first_bad = t;
  CHECK(first_bad == 10);
  CHECK(d.front().detail.find("t=" + std::to_string(first_bad)) != std::string::npos);
}
