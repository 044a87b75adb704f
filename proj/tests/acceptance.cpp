// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fedspan/accounting.hpp"
#include "fedspan/clustering.hpp"
#include "fedspan/config.hpp"
#include "fedspan/convergence.hpp"
#include "fedspan/graph.hpp"
#include "fedspan/learning.hpp"
#include "fedspan/link.hpp"
#include "fedspan/optimizer.hpp"
#include "fedspan/report.hpp"
#include "fedspan/resource.hpp"
#include "fedspan/simulate.hpp"
#include "helpers.hpp"

using namespace fedspan;

namespace {

const std::string kScenarios = FEDSPAN_SCENARIO_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Eigen::MatrixXd random_matrix(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

// ---- 1

ModelVector hierarchical_delta(const std::vector<Eigen::MatrixXd>& g, const VCPartition& part,
                               const Eigen::VectorXd& D_n, const Eigen::VectorXi& e_c, double eta,
                               std::mt19937_64& rng) {
  const int L = static_cast<int>(g.size()), N = static_cast<int>(D_n.size()), M = static_cast<int>(g[0].rows());
  Eigen::VectorXd D_c = Eigen::VectorXd::Zero(part.n_clusters);
  for (int n = 0; n < N; ++n) D_c(part.assignment[n]) += D_n(n);
  ModelVector w = ModelVector::Zero(M);
  std::vector<ModelVector> held(N, w);
  for (int l = 0; l + 1 < L; ++l) {
    DirectedForest up = testing::random_forest(part.assignment, part.n_clusters, rng, Direction::Upward);
    Eigen::MatrixXd acc = tree_aggregate(up, g[l], D_n);
    std::vector<ModelVector> bar(part.n_clusters);
    for (int n = 0; n < N; ++n)
      if (up.roots(n)) {
        const int c = part.assignment[n];
        ModelVector wc = held[n];
        bar[c] = apply_vc_update<double>(wc, acc.col(n), eta, D_c(c));
      }
    for (int n = 0; n < N; ++n) held[n] = bar[part.assignment[n]];
  }
  Eigen::MatrixXd ghat(M, N);
  Eigen::VectorXd wt(N);
  Eigen::VectorXi e_n(N);
  for (int n = 0; n < N; ++n) {
    ghat.col(n) = (w - (held[n] - eta * g[L - 1].col(n))) / eta;
    e_n(n) = e_c(part.assignment[n]);
    wt(n) = D_n(n) / (e_n(n) * L);
  }
  DirectedForest gup = testing::random_tree(N, rng, Direction::Upward);
  Eigen::MatrixXd acc = tree_aggregate(gup, ghat, wt);
  int root = 0;
  while (!gup.roots(root)) ++root;
  const double xi = boosting_coefficient(D_n, e_n, L);
  return apply_global_update<double>(w, acc.col(root), eta, xi, D_n.sum()) - w;
}

Outcome aggregation_identity() {
  auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  const int Cs[] = {1, 2, 4};
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int C = Cs[trial % 3];
    const int N = 2 * C + static_cast<int>(rng() % (17 - 2 * C));
    const int L = 1 + static_cast<int>(rng() % 4);
    VCPartition part{testing::random_clusters(N, C, rng), C};
    Eigen::VectorXd D(N);
    for (int n = 0; n < N; ++n) D(n) = 50 + static_cast<double>(rng() % 500);
    Eigen::VectorXi e_c(C);
    for (int c = 0; c < C; ++c) e_c(c) = 1 + static_cast<int>(rng() % 5);
    std::vector<Eigen::MatrixXd> g;
    for (int l = 0; l < L; ++l) g.push_back(random_matrix(6, N, rng));
    const ModelVector tree = hierarchical_delta(g, part, D, e_c, 0.03, rng);
    const ModelVector flat = flat_oracle(g, part, D, e_c, 0.03);
    worst = std::max(worst, (tree - flat).norm() / flat.norm());
  }
  const double dt = seconds_since(t0);
  return {worst <= 1e-12 && dt < 10.0, "worst relative " + fmt(worst) + ", " + fmt(dt) + " s"};
}

// ---- 2

std::shared_ptr<QuadraticFamily> dyadic_family(int N, int M, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Eigen::MatrixXd> data;
  for (int n = 0; n < N; ++n)
    data.push_back(
        Eigen::MatrixXd::NullaryExpr(M, 4, [&] { return static_cast<double>(static_cast<int>(rng() % 17) - 8); }));
  return std::make_shared<QuadraticFamily>(std::move(data));
}

ModelVector textbook_fedavg(const LossOracle& q, const ModelVector& w, double eta) {
  const Eigen::VectorXd D = q.data_sizes();
  ModelVector next = ModelVector::Zero(w.size());
  for (int n = 0; n < q.n_sats(); ++n) next += D(n) / D.sum() * (w - eta * q.local_grad(w, n, 0.0));
  return next;
}

Outcome fedavg_degeneracy() {
  Config cfg = load_config(kScenarios + "/minimal.ini");
  int exact = 0, total = 0;
  for (int K : {1, 2, 3}) {
    for (std::uint64_t seed : {5u, 6u}) {
      Scenario s = cfg.scenario;
      const int N = s.timeline->n_sats();
      s.oracle = dyadic_family(N, 3, seed);
      s.K = K;
      s.L = 1;
      s.partition = VCPartition::single(N);
      s.e_c = Eigen::VectorXi::Ones(1);
      s.frac = Eigen::VectorXd::Ones(N);
      s.eta = 0.25;
      s.w0 = ModelVector::Zero(3);
      std::vector<int> star(N, 0);
      star[0] = -1;
      s.global_down = forest_from_next_hop(star, Direction::Downward);
      s.global_up = forest_from_next_hop(star, Direction::Upward);
      RunTrace tr = run_fed_span(s);
      ModelVector w = s.w0;
      for (int k = 0; k < K; ++k) w = textbook_fedavg(*s.oracle, w, s.eta);
      ++total;
      if (!tr.aborted && tr.final_model == w) ++exact;
    }
  }
  return {exact == total, std::to_string(exact) + "/" + std::to_string(total) + " runs bitwise equal"};
}

// ---- 3

// Downward arborescence rooted at r: root has no parent, every other node
// exactly one, and every node is reachable from r.
bool arborescence_oracle(const Adjacency& adj, int r) {
  const int n = static_cast<int>(adj.rows());
  for (int v = 0; v < n; ++v) {
    const int indeg = adj.col(v).sum();
    if (adj(v, v) != 0) return false;
    if (indeg != (v == r ? 0 : 1)) return false;
  }
  std::vector<char> seen(n, 0);
  std::queue<int> q;
  q.push(r);
  seen[r] = 1;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v = 0; v < n; ++v)
      if (adj(u, v) && !seen[v]) {
        seen[v] = 1;
        q.push(v);
      }
  }
  return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
}

DirectedForest single_root(const Adjacency& adj, int root, Direction d) {
  DirectedForest f;
  f.adj = adj;
  f.roots = Eigen::VectorXi::Zero(adj.rows());
  f.roots(root) = 1;
  f.direction = d;
  return f;
}

std::vector<int> key(const Adjacency& a) { return std::vector<int>(a.data(), a.data() + a.size()); }

// Every parent choice (an in-neighbour in the mask, or none) for every non-root node.
void parent_vectors(const Adjacency& mask, int r, const std::function<void(const Adjacency&)>& visit) {
  const int n = static_cast<int>(mask.rows());
  std::vector<std::vector<int>> opts(n);
  for (int v = 0; v < n; ++v) {
    opts[v].push_back(-1);
    if (v == r) continue;
    for (int u = 0; u < n; ++u)
      if (u != v && mask(u, v)) opts[v].push_back(u);
  }
  std::vector<std::size_t> idx(n, 0);
  while (true) {
    Adjacency a = Adjacency::Zero(n, n);
    for (int v = 0; v < n; ++v)
      if (opts[v][idx[v]] >= 0) a(opts[v][idx[v]], v) = 1;
    visit(a);
    int v = 0;
    while (v < n && ++idx[v] == opts[v].size()) idx[v++] = 0;
    if (v == n) break;
  }
}

Outcome tree_enumeration() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  long checks = 0, mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 4);
    const double p = 0.3 + 0.6 * u(rng);
    Adjacency mask = Adjacency::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j && u(rng) < p) mask(i, j) = 1;
    for (int r = 0; r < n; ++r) {
      for (Direction dir : {Direction::Downward, Direction::Upward}) {
        const bool down = dir == Direction::Downward;
        // upward trees are transposed downward trees
        const Adjacency dmask = down ? mask : Adjacency(mask.transpose());
        std::set<std::vector<int>> listed;
        for (const auto& f : enumerate_arborescences(mask, r, dir)) {
          const Adjacency d = down ? f.adj : Adjacency(f.adj.transpose());
          listed.insert(key(d));
          ++checks;
          if (!arborescence_oracle(d, r) || !is_valid(f) || ((f.adj.array() > mask.array()).any())) ++mismatches;
        }
        long valid = 0;
        parent_vectors(dmask, r, [&](const Adjacency& d) {
          const bool truth = arborescence_oracle(d, r);
          valid += truth;
          const Adjacency a = down ? d : Adjacency(d.transpose());
          ++checks;
          if (is_valid(single_root(a, r, dir)) != truth) ++mismatches;
          if ((listed.count(key(d)) != 0) != truth) ++mismatches;
        });
        // arbitrary subgraphs of the mask
        for (int extra = 0; extra < 8; ++extra) {
          Adjacency d = Adjacency::Zero(n, n);
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              if (dmask(i, j) && u(rng) < 0.5) d(i, j) = 1;
          const Adjacency a = down ? d : Adjacency(d.transpose());
          ++checks;
          if (is_valid(single_root(a, r, dir)) != arborescence_oracle(d, r)) ++mismatches;
        }
        ++checks;
        if (valid != static_cast<long>(listed.size())) ++mismatches;
      }
    }
  }
  Adjacency full = Adjacency::Ones(4, 4) - Adjacency::Identity(4, 4);
  bool sixteen = true;
  for (int r = 0; r < 4; ++r)
    for (Direction dir : {Direction::Downward, Direction::Upward})
      sixteen = sixteen && enumerate_arborescences(full, r, dir).size() == 16;
  return {mismatches == 0 && sixteen, std::to_string(checks) + " checks, " + std::to_string(mismatches) +
                                          " mismatches, K4 count " + (sixteen ? "16" : "wrong")};
}

// ---- 4

Outcome proposition_bound() {
  auto t0 = Clock::now();
  std::mt19937_64 rng(404);
  std::normal_distribution<double> nd;
  const int N = 24, M = 3, P = 4;
  // latent groups give the gradients a heterogeneous mean
  std::vector<ProbeGradients> grads(N, ProbeGradients(M, P));
  Eigen::MatrixXd group = 2.0 * random_matrix(M, 6, rng);
  for (int n = 0; n < N; ++n)
    for (int j = 0; j < P; ++j)
      for (int m = 0; m < M; ++m) grads[n](m, j) = group(m, n % 6) + 0.7 * nd(rng);
  Eigen::VectorXd D = Eigen::VectorXd::NullaryExpr(N, [&] { return 100.0 + static_cast<double>(rng() % 900); });
  long violations = 0;
  std::vector<double> means;
  for (int C : {2, 4, 8}) {
    double sum = 0.0;
    for (int trial = 0; trial < 20000; ++trial) {
      VCPartition p{testing::random_clusters(N, C, rng), C};
      HeterogeneityStats h = zeta_glob2_bound(p, grads, {}, {}, D);
      const double s = zeta_glob2_sample(p, grads, h.a, h.b);
      if (s < h.zeta_glob2_lb - 1e-12 * std::max(1.0, std::abs(h.zeta_glob2_lb))) ++violations;
      sum += s;
    }
    means.push_back(sum / 20000.0);
  }
  const double dt = seconds_since(t0);
  const bool increasing = means[0] < means[1] && means[1] < means[2];
  return {violations == 0 && increasing && dt < 60.0,
          std::to_string(violations) + " violations, means " + fmt(means[0]) + " < " + fmt(means[1]) + " < " +
              fmt(means[2]) + ", " + fmt(dt) + " s"};
}

// ---- 5

std::string quadratic_ini(int K) {
  std::ostringstream os;
  os << "[scenario]\nname = bound\nseed = 1\n"
     << "[constellation]\nkind = static\npoints = 0:0, 0:10, 0:20, 0:30, 0:40, 0:50, 0:60, 0:70\np_solar_w = 15\n"
     << "[partition]\nkind = explicit\nassignment = 0, 0, 0, 0, 1, 1, 1, 1\n"
     << "[learning]\nfamily = quadratic\ndim = 6\nheterogeneity = 1.0\nsample_spread = 1.0\n"
     << "K = " << K << "\nL = 2\ne = 2\nfrac = 0.5\neta_policy = cap\neta_scale = 0.9\n"
     << "[schedule]\ntau_tti = 3\npolicy = even\n";
  return os.str();
}

Outcome theorem_bound() {
  const std::string path20 = testing::write_temp("acc_bound20.ini", quadratic_ini(20));
  int held = 0;
  double worst_ratio = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Config cfg = load_config(path20, seed);
    calibrate_step(cfg);
    std::vector<ModelVector> probes;
    RunTrace tr = run_with_probes(cfg.scenario, probes);
    BoundReport b = evaluate_bound(cfg, tr, probes);
    const bool ok = !tr.aborted && b.cap_ok && static_cast<int>(tr.rounds.size()) == 20 &&
                    b.measured_avg_grad_sq <= b.breakdown.total();
    held += ok;
    worst_ratio = std::max(worst_ratio, b.measured_avg_grad_sq / b.breakdown.total());
  }
  std::vector<double> logK, logG;
  bool decreasing = true;
  double prev = std::numeric_limits<double>::infinity();
  for (int K : {4, 16, 64}) {
    const std::string path = testing::write_temp("acc_bound" + std::to_string(K) + ".ini", quadratic_ini(K));
    double avg = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      Config cfg = load_config(path, seed);
      calibrate_step(cfg);
      RunTrace tr = run_fed_span(cfg.scenario);
      double g = 0.0;
      for (const auto& r : tr.rounds) g += r.grad_norm_sq;
      avg += g / static_cast<double>(std::max<std::size_t>(1, tr.rounds.size())) / 10.0;
    }
    decreasing = decreasing && avg < prev;
    prev = avg;
    logK.push_back(std::log(static_cast<double>(K)));
    logG.push_back(std::log(avg));
  }
  const double mk = (logK[0] + logK[1] + logK[2]) / 3, mg = (logG[0] + logG[1] + logG[2]) / 3;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < 3; ++i) {
    num += (logK[i] - mk) * (logG[i] - mg);
    den += (logK[i] - mk) * (logK[i] - mk);
  }
  const double slope = num / den;
  return {held == 10 && decreasing && slope <= -0.4,
          std::to_string(held) + "/10 seeds within bound (worst measured/bound " + fmt(worst_ratio) +
              "), log-log slope " + fmt(slope)};
}

// ---- 6

Outcome agm_condensation() {
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> c(0.1, 3.0), a(-2.0, 2.0), lz(-1.5, 1.5);
  long below = 0, tight = 0;
  double worst_gap = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const int n = 1 + static_cast<int>(rng() % 5);
    Posynomial p;
    const int terms = 1 + static_cast<int>(rng() % 6);
    for (int t = 0; t < terms; ++t) p.terms.emplace_back(c(rng), Eigen::VectorXd::NullaryExpr(n, [&] { return a(rng); }));
    const Eigen::VectorXd z = Eigen::VectorXd::NullaryExpr(n, [&] { return std::exp(lz(rng)); });
    const Eigen::VectorXd y = Eigen::VectorXd::NullaryExpr(n, [&] { return std::exp(lz(rng)); });
    const Monomial m = agm_condense(p, z);
    const double gap = std::abs(m(z) - p(z)) / p(z);
    worst_gap = std::max(worst_gap, gap);
    tight += gap <= 1e-12;
    below += m(y) <= p(y) * (1 + 1e-12);
  }
  return {below == 10000 && tight == 10000, std::to_string(below) + "/10000 under, " + std::to_string(tight) +
                                                "/10000 tight (worst " + fmt(worst_gap) + ")"};
}

// ---- 7

ResourceInputs random_inputs(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int N = 4 + static_cast<int>(rng() % 3), C = 2;
  ResourceInputs in;
  in.partition = VCPartition{testing::random_clusters(N, C, rng), C};
  in.D_n = Eigen::VectorXd::NullaryExpr(N, [&] { return std::floor(500 + 1000 * u(rng)); });
  in.sigma_n = Eigen::VectorXd::NullaryExpr(N, [&] { return 1 + 2 * u(rng); });
  in.bound.beta = 1;
  in.bound.theta = 1;
  in.bound.zeta_glob2 = 0.1;
  in.L = 1 + static_cast<int>(rng() % 3);
  in.eta = 0.01;
  in.drift = 1e-4 * u(rng);
  in.tau_lt_max = 0.2 + 0.3 * u(rng);
  in.f_min = 1e7;
  in.battery_level = Eigen::VectorXd::NullaryExpr(N, [&] { return 2 + 3 * u(rng); });
  in.harvest = Eigen::VectorXd::Constant(N, 0.5);
  in.tx_energy = Eigen::VectorXd::Constant(N, 0.01);
  in.tx_latency = 0.02;
  in.alpha1 = 1;
  in.alpha2 = 1 + u(rng);
  in.alpha3 = 1 + u(rng);
  in.e_hi = 8;
  return in;
}

Outcome sca_monotone() {
  int monotone = 0, feasible = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ResourceInputs in = random_inputs(700 + seed);
    ResourceSolution sol = solve_resource(in);
    const auto& h = sol.sca.history;
    bool ok = true, seen = false;
    for (std::size_t i = 0; i < h.size(); ++i) {
      if (seen && i > 0 && h[i] > h[i - 1] + 1e-9) ok = false;
      seen = seen || sol.sca.feasible[i];
    }
    monotone += ok;
    ResourceProblem rp = build_resource_subproblem(in);
    ConstraintCheck chk = check_original(in, unpack(in, rp.layout, sol.sca.x));
    worst = std::max(worst, chk.worst);
    feasible += chk.worst <= 1e-3;
  }
  GPProgram gp;
  gp.vars.add("y1");
  gp.vars.add("y2");
  Monomial y1 = Monomial::variable(0, 2), y2 = Monomial::variable(1, 2);
  gp.objective = y1 * y2;
  gp.add_ineq(4.0 * pow(y1 * y2, -1.0), "product");
  gp.add_eq(y1 / y2, "symmetry");
  SCAState st = sca_loop([&](const Eigen::VectorXd&, double) { return gp; }, Eigen::Vector2d(0.5, 7.0));
  const double err = std::max(std::abs(st.x(0) - 2), std::abs(st.x(1) - 2));
  return {monotone == 20 && feasible == 20 && err < 1e-4,
          std::to_string(monotone) + "/20 monotone, " + std::to_string(feasible) + "/20 feasible (worst " +
              fmt(worst) + "), toy GP error " + fmt(err)};
}

// ---- 8

Outcome latency_recursions() {
  std::mt19937_64 rng(808);
  const double bits = 8e6;
  std::uniform_int_distribution<int> hop(1, 9);
  long mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const Direction dir = trial % 2 ? Direction::Upward : Direction::Downward;
    DirectedForest f = testing::random_tree(n, rng, dir);
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (f.adj(i, j)) r(i, j) = bits / hop(rng);
    if (dir == Direction::Downward) {
      LatencyReport rep = dispatch_latency(f, r, bits);
      double worst = 0.0;
      for (int v = 0; v < n; ++v) {
        const auto path = path_to_root(f, v);
        double sum = 0.0;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) sum += bits / r(path[i + 1], path[i]);
        mismatches += rep.arrival(v) != sum;
        worst = std::max(worst, sum);
      }
      mismatches += rep.total != worst;
    } else {
      LatencyReport rep = aggregation_latency(f, r, bits);
      double longest = 0.0;
      for (int v = 0; v < n; ++v) {
        const auto path = path_to_root(f, v);
        double sum = 0.0;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) sum += bits / r(path[i], path[i + 1]);
        longest = std::max(longest, sum);
      }
      mismatches += rep.total != longest;
    }
  }
  const ComputeParams cp;
  bool table = cp.cycles_per_point == 1360.0 && cp.chipset_cap == 2e-27 && cp.f_max == 2.3e9;
  // 3 passes over 500 points at 2 GHz: 1.02 ms and 1e-27 * 8e27 * 1.02e-3 J
  TrainCost lit = train_cost(cp, 3, 500.0, 2e9);
  double worst = std::max(std::abs(lit.latency_s - 1.02e-3) / 1.02e-3, std::abs(lit.energy_j - 8.16e-3) / 8.16e-3);
  std::uniform_real_distribution<double> fr(1e8, 2.3e9), bs(1.0, 2000.0);
  for (int i = 0; i < 1000; ++i) {
    const int e = 1 + static_cast<int>(rng() % 10);
    const double f = fr(rng), B = bs(rng);
    TrainCost c = train_cost(cp, e, B, f);
    const double lat = e * 1360.0 * B / f;
    const double en = 1e-27 * f * f * f * lat;
    worst = std::max(worst, std::abs(c.latency_s - lat) / lat);
    worst = std::max(worst, std::abs(c.energy_j - en) / en);
  }
  return {mismatches == 0 && table && worst <= 1e-12,
          std::to_string(mismatches) + " latency mismatches, train_cost worst relative " + fmt(worst)};
}

// ---- 9

Outcome link_budget() {
  const LinkBudgetParams p = LinkBudgetParams::reference();
  bool strict = true;
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 100; ++i) {
    const double d = 100.0 + i * 80.0;
    const double r = terminal_rate(p, d, 0.0);
    strict = strict && r < prev;
    prev = r;
  }
  const double lib = threshold_distance_km(p);
  // second bisection: doubling bracket, fixed iteration count
  double lo = 1.0, hi = 2.0;
  while (terminal_rate(p, hi, 0.0) >= p.min_rate_bps) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (terminal_rate(p, mid, 0.0) >= p.min_rate_bps ? lo : hi) = mid;
  }
  const double gap_m = std::abs(lo - lib) * 1000.0;
  // the candidate builder flips on either side of the threshold
  auto candidate = [&](double d_km) {
    const double r_eff = kEarthRadiusKm + 500.0;
    auto tl = static_constellation({GeoPoint{0.0, 0.0}, GeoPoint{0.0, d_km / r_eff}}, 2);
    return feasible_cbm_candidates(tl, p, 0, 4).rate(0, 1) > 0.0;
  };
  const bool flips = candidate(lib * (1 - 1e-6)) && !candidate(lib * (1 + 1e-6));
  return {strict && gap_m <= 1.0 && flips, std::string(strict ? "strictly decreasing" : "not monotone") +
                                               ", threshold " + fmt(lib) + " km, bisections differ by " +
                                               fmt(gap_m) + " m, gating " + (flips ? "flips" : "does not flip")};
}

// ---- 10, 11, 12

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Every CSV a run emits, concatenated.
std::string run_outputs(const Config& cfg, const std::vector<MethodRun>& runs, const std::string& tag) {
  std::ostringstream all;
  for (const auto& r : runs) {
    all << "# trace " << r.method << "\n";
    write_trace_csv(all, r.trace);
  }
  const std::string rounds = testing::temp_path(tag + "_rounds.csv");
  const std::string curve = testing::temp_path(tag + "_curve.csv");
  const std::string thr = testing::temp_path(tag + "_thr.csv");
  const std::string ledger = testing::temp_path(tag + "_ledger.csv");
  write_rounds_csv(rounds, runs.front().trace);
  write_loss_curve_csv(curve, runs, cfg.scenario.t0);
  write_threshold_csv(thr, compare_methods(cfg, runs));
  write_ledger_csv(ledger, ledger_rows(runs.front().trace));
  for (const auto& p : {rounds, curve, thr, ledger}) all << read_file(p);
  return all.str();
}

const char* kShipped[] = {"minimal", "dynamic", "battery_stress"};

Outcome battery_safety(std::map<std::string, std::vector<MethodRun>>& cache) {
  std::string detail;
  bool ok = true;
  for (const char* name : kShipped) {
    Config cfg = load_config(kScenarios + "/" + name + ".ini");
    auto& runs = cache[name] = run_methods(cfg, 4);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& r : runs) {
      lo = std::min(lo, r.trace.battery_min);
      hi = std::max(hi, r.trace.battery_max);
    }
    ok = ok && lo >= 0.0 && hi <= cfg.scenario.battery_cap_j;
    detail += std::string(name) + " [" + fmt(lo) + ", " + fmt(hi) + "] ";
  }
  // abort policy: the run stops at the first infeasible phase
  Config stress = load_config(kScenarios + "/battery_stress.ini");
  Scenario s = stress.scenario;
  bool after_abort = false;
  double last_t = -1.0;
  int last_k = -1;
  s.observer = [&](const PhaseEvent& ev) {
    last_t = std::max(last_t, ev.t);
    last_k = std::max(last_k, ev.k);
  };
  RunTrace tr = run_fed_span(s);
  const bool is_abort = s.battery_policy == BatteryPolicy::Abort && tr.aborted &&
                        tr.abort_reason.rfind("battery", 0) == 0 && !tr.rows.empty() &&
                        tr.rows.back().phase.rfind("abort:", 0) == 0;
  for (std::size_t i = 0; i + 1 < tr.rows.size(); ++i)
    if (tr.rows[i].k > tr.abort_k) after_abort = true;
  if (last_k > tr.abort_k) after_abort = true;
  if (!tr.rows.empty() && last_t > tr.rows.back().t_start) after_abort = true;
  ok = ok && is_abort && !after_abort && static_cast<int>(tr.rounds.size()) <= tr.abort_k + 1;
  detail += "abort at round " + std::to_string(tr.abort_k) + " (" + tr.abort_reason + ")";
  return {ok, detail};
}

Outcome determinism(const std::map<std::string, std::vector<MethodRun>>& cache) {
  int same = 0;
  for (const char* name : kShipped) {
    Config cfg = load_config(kScenarios + "/" + name + ".ini");
    const std::string a = run_outputs(cfg, cache.at(name), std::string("det_a_") + name);
    const std::string b = run_outputs(cfg, run_methods(cfg, 1), std::string("det_b_") + name);
    same += a == b && !a.empty();
  }
  return {same == 3, std::to_string(same) + "/3 scenarios byte-identical across runs"};
}

Outcome baseline_comparison(const std::map<std::string, std::vector<MethodRun>>& cache) {
  Config cfg = load_config(kScenarios + "/dynamic.ini");
  const auto& runs = cache.at("dynamic");
  const auto sums = compare_methods(cfg, runs);
  const MethodSummary* fed = nullptr;
  const MethodSummary* sink = nullptr;
  for (const auto& s : sums) {
    if (s.method == "fed_span") fed = &s;
    if (s.method == "sink_sync") sink = &s;
  }
  if (!fed || !sink) return {false, "missing fed_span or sink_sync run"};
  const bool setup = cfg.scenario.timeline->gateways.size() == 15 && cfg.thresholds.size() == 3;
  bool ok = setup;
  std::string detail = setup ? "" : "scenario shape wrong; ";
  for (std::size_t i = 0; i < fed->hits.size(); ++i) {
    const auto& f = fed->hits[i];
    const auto& b = sink->hits[i];
    const bool win = f.reached && (!b.reached || f.transfer_s < b.transfer_s);
    ok = ok && win;
    detail += fmt(f.fraction) + ": " + (f.reached ? fmt(f.transfer_s) : std::string("miss")) + " s vs " +
              (b.reached ? fmt(b.transfer_s) : std::string("miss")) + " s; ";
  }
  return {ok && fed->hits.size() == 3, detail};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %d: %s %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  };
  std::map<std::string, std::vector<MethodRun>> cache;
  report(1, aggregation_identity);
  report(2, fedavg_degeneracy);
  report(3, tree_enumeration);
  report(4, proposition_bound);
  report(5, theorem_bound);
  report(6, agm_condensation);
  report(7, sca_monotone);
  report(8, latency_recursions);
  report(9, link_budget);
  report(10, [&] { return battery_safety(cache); });
  report(11, [&] { return determinism(cache); });
  report(12, [&] { return baseline_comparison(cache); });
  return failed == 0 ? 0 : 1;
}
