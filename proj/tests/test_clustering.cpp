#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <functional>
#include <limits>
#include <random>

#include "fedspan/clustering.hpp"
#include "helpers.hpp"

using namespace fedspan;

namespace {

bool has(const Diagnostics& d, const std::string& rule) {
  for (const auto& v : d)
    if (v.rule == rule) return true;
  return false;
}

// max over probes of sum_n a_n |g_n|^2 / |sum_n a_n g_n|^2
double ratio_oracle(const std::vector<ProbeGradients>& g, const Eigen::VectorXd& a) {
  double best = 0.0;
  for (Eigen::Index p = 0; p < g.front().cols(); ++p) {
    double num = 0.0;
    Eigen::VectorXd s = Eigen::VectorXd::Zero(g.front().rows());
    for (std::size_t n = 0; n < g.size(); ++n) {
      num += a(n) * g[n].col(p).squaredNorm();
      s += a(n) * g[n].col(p);
    }
    best = std::max(best, num / s.squaredNorm());
  }
  return best;
}

}  // namespace

TEST_CASE("validate_partition") {
  CHECK(validate_partition(VCPartition{{0, 0, 1, 1}, 2}, 4).empty());
  CHECK(has(validate_partition(VCPartition{{0, 0, 0, 1}, 2}, 4), "min-size"));
  CHECK(has(validate_partition(VCPartition{{0, 0, -1, 0}, 1}, 4), "coverage"));

  Eigen::MatrixXi gamma(2, 4);
  gamma << 1, 1, 1, 0,  //
      0, 0, 1, 1;
  CHECK(has(validate_partition(gamma), "uniqueness"));
}

TEST_CASE("zeta_loc_min") {
  ProbeGradients g(3, 2);
  g << 1, 2, 0, 1, 3, 0;
  CHECK(zeta_loc_min({g, g, g}, Eigen::Vector3d::Constant(1.0 / 3)) == doctest::Approx(1.0));

  ProbeGradients e1(2, 1), e2(2, 1);
  e1 << 1, 0;
  e2 << 0, 1;
  CHECK(zeta_loc_min({e1, e2}, Eigen::Vector2d(0.5, 0.5)) == doctest::Approx(2.0));

  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ProbeGradients> gs(3, ProbeGradients(4, 6));
    for (auto& m : gs)
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng) + 0.5;
    Eigen::Vector3d a(0.2, 0.3, 0.5);
    CHECK(zeta_loc_min(gs, a) == doctest::Approx(ratio_oracle(gs, a)).epsilon(1e-12));
  }
}

TEST_CASE("zeta_glob2_bound degenerate cases") {
  ProbeGradients g(2, 3);
  g << 1, 0, 2, 1, 1, -1;
  std::vector<ProbeGradients> same(4, g);
  Eigen::VectorXd D = Eigen::VectorXd::Constant(4, 100);
  CHECK(zeta_glob2_bound(VCPartition{{0, 0, 1, 1}, 2}, same, {}, {}, D).zeta_glob2_lb == doctest::Approx(0.0));

  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  std::vector<ProbeGradients> het(4, ProbeGradients(2, 5));
  for (auto& m : het)
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  CHECK(zeta_glob2_bound(VCPartition::single(4), het, {}, {}, D).zeta_glob2_lb == doctest::Approx(0.0));
}

TEST_CASE("sampled global dissimilarity respects the lower bound") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd;
  const int N = 12;
  std::vector<ProbeGradients> grads(N, ProbeGradients(3, 4));
  for (int n = 0; n < N; ++n)
    for (Eigen::Index i = 0; i < grads[n].size(); ++i) grads[n].data()[i] = nd(rng) + (n % 3);
  Eigen::VectorXd D = Eigen::VectorXd::Constant(N, 1.0);
  for (int C : {2, 3}) {
    for (int trial = 0; trial < 200; ++trial) {
      VCPartition p{testing::random_clusters(N, C, rng), C};
      HeterogeneityStats h = zeta_glob2_bound(p, grads, {}, {}, D);
      CHECK(zeta_glob2_sample(p, grads, h.a, h.b) >= h.zeta_glob2_lb - 1e-12);
    }
  }
}

TEST_CASE("cluster heuristic") {
  ClusterData cd;
  ConstellationTimeline tl = static_constellation({{0, 0}, {0, 0.01}, {0, 0.02}, {0.5, 1.0}, {0.5, 1.01}, {0.5, 1.02}}, 1);
  cd.data_sizes = Eigen::VectorXd::Constant(6, 100);
  VCPartition one = cluster_heuristic(tl, 0, cd, 1);
  CHECK(one.n_clusters == 1);
  for (int c : one.assignment) CHECK(c == 0);

  VCPartition two = cluster_heuristic(tl, 0, cd, 2);
  CHECK(two.n_clusters == 2);
  CHECK(two.assignment[0] == two.assignment[1]);
  CHECK(two.assignment[1] == two.assignment[2]);
  CHECK(two.assignment[3] == two.assignment[4]);
  CHECK(two.assignment[4] == two.assignment[5]);
  CHECK(two.assignment[0] != two.assignment[3]);
}

TEST_CASE("cluster heuristic against exhaustive pairings") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<GeoPoint> pts;
    for (int i = 0; i < 6; ++i) pts.push_back({u(rng), u(rng)});
    ConstellationTimeline tl = static_constellation(pts, 1);
    ClusterData cd;
    cd.data_sizes = Eigen::VectorXd::Constant(6, 100);
    VCPartition h = cluster_heuristic(tl, 0, cd, 3);
    double best = std::numeric_limits<double>::infinity();
    // all 15 ways of splitting six satellites into three pairs
    std::vector<int> a(6, -1);
    std::function<void(int)> rec = [&](int c) {
      int first = -1;
      for (int i = 0; i < 6; ++i)
        if (a[i] < 0) {
          first = i;
          break;
        }
      if (first < 0) {
        best = std::min(best, cluster_objective(tl, 0, cd, VCPartition{a, 3}));
        return;
      }
      a[first] = c;
      for (int j = first + 1; j < 6; ++j)
        if (a[j] < 0) {
          a[j] = c;
          rec(c + 1);
          a[j] = -1;
        }
      a[first] = -1;
    };
    rec(0);
    CHECK(cluster_objective(tl, 0, cd, h) <= 1.1 * best + 1e-9);
  }
}

TEST_CASE("partition csv round trip") {
  VCPartition p{{1, 0, 1, 0, 2, 2}, 3};
  std::string path = testing::temp_path("part.csv");
  write_partition_csv(path, p);
  VCPartition q = read_partition_csv(path);
  CHECK(q.assignment == p.assignment);
  CHECK(q.n_clusters == 3);
}
