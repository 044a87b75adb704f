#include "fedspan/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "fedspan/csv.hpp"
#include "fedspan/errors.hpp"

namespace fedspan {

void validate_scenario(const Scenario& s) {
  if (!s.timeline) throw ArgumentError("scenario.timeline: missing");
  if (!s.oracle) throw ArgumentError("scenario.oracle: missing");
  const int N = s.timeline->n_sats();
  if (s.oracle->n_sats() != N) throw ArgumentError("scenario.oracle: satellite count differs from the timeline");
  if (static_cast<int>(s.partition.assignment.size()) != N)
    throw ArgumentError("scenario.partition: one assignment per satellite required");
  Diagnostics d = validate_partition(s.partition, N);
  if (!d.empty()) throw ArgumentError("scenario.partition: " + d.front().rule + ": " + d.front().detail);
  if (s.K < 0) throw ArgumentError("scenario.K: must be non-negative");
  if (s.L < 1) throw ArgumentError("scenario.L: must be >= 1");
  if (s.e_c.size() != s.partition.n_clusters) throw ArgumentError("scenario.e_c: one value per cluster required");
  if ((s.e_c.array() < 0).any()) throw ArgumentError("scenario.e_c: must be non-negative");
  if (s.frac.size() != N || (s.frac.array() <= 0).any() || (s.frac.array() > 1).any())
    throw ArgumentError("scenario.frac: one value in (0, 1] per satellite required");
  if (s.cpu_freq.size() != N || (s.cpu_freq.array() <= 0).any() || (s.cpu_freq.array() > s.compute.f_max).any())
    throw ArgumentError("scenario.cpu_freq: one value in (0, f_max] per satellite required");
  if (!(s.eta > 0)) throw ArgumentError("scenario.eta: must be positive");
  if (s.w0.size() != s.oracle->dim()) throw ArgumentError("scenario.w0: dimension differs from the loss");
  if (s.battery_cap_j <= 0 || s.battery_init_j < 0 || s.battery_init_j > s.battery_cap_j)
    throw ArgumentError("scenario.battery: need 0 <= init <= cap");
  if (s.L > 1 && s.tau_tti < s.caps.lt_max + s.caps.la_max + s.caps.ld_max)
    throw ArgumentError("scenario.tau_tti: shorter than lt_max + la_max + ld_max");
}

const char* to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::Async: return "async";
    case BaselineKind::Buffered: return "buffered";
    case BaselineKind::Opportunistic: return "opportunistic";
    case BaselineKind::SinkSync: return "sink_sync";
  }
  return "?";
}

BaselineKind baseline_from_string(const std::string& s) {
  if (s == "async") return BaselineKind::Async;
  if (s == "buffered") return BaselineKind::Buffered;
  if (s == "opportunistic") return BaselineKind::Opportunistic;
  if (s == "sink_sync") return BaselineKind::SinkSync;
  throw ArgumentError("unknown baseline kind: " + s);
}

namespace {

struct Abort {
  std::string phase;
  std::string reason;
};

class FedSpanRun {
 public:
  explicit FedSpanRun(const Scenario& s)
      : s_(s), tl_(*s.timeline), orc_(*s.oracle), N_(tl_.n_sats()), D_n_(orc_.data_sizes()) {
    bat_.level_j = Eigen::VectorXd::Constant(N_, s.battery_init_j);
    bat_.cap_j = Eigen::VectorXd::Constant(N_, s.battery_cap_j);
    t_acc_ = static_cast<int>(std::floor(s.t0));
    tr_.battery_min = tr_.battery_max = s.battery_init_j;
    D_c_ = Eigen::VectorXd::Zero(s.partition.n_clusters);
    for (int n = 0; n < N_; ++n) D_c_(s.partition.assignment[n]) += D_n_(n);
    tx_power_ = Eigen::VectorXd::Constant(N_, s.link.tx_power_w);
  }

  RunTrace run() {
    ModelVector w = s_.w0;
    const double tau_loc = s_.tau_loc > 0 ? s_.tau_loc : default_tau_loc(s_.L, s_.tau_tti);
    const double dur = s_.caps.gd_max + tau_loc + s_.caps.ga_max;
    if (s_.K > 0 && s_.t0 + s_.K * dur > tl_.horizon())
      throw RangeError("scenario needs " + std::to_string(s_.t0 + s_.K * dur) + " s but the timeline ends at " +
                       std::to_string(tl_.horizon()) + " s");
    try {
      for (int k = 0; k < s_.K; ++k) {
        TTIGrid grid = make_tti_grid(s_.t0 + k * dur, s_.caps.gd_max, tau_loc, s_.tau_tti);
        RoundPlan plan = plan_round(grid, s_.L, s_.caps, s_.policy, k);
        w = round(k, plan, w);
      }
    } catch (const Abort& a) {
      tr_.aborted = true;
      tr_.abort_phase = a.phase;
      tr_.abort_reason = a.reason;
    }
    tr_.final_model = w;
    return std::move(tr_);
  }

 private:
  const Scenario& s_;
  const ConstellationTimeline& tl_;
  const LossOracle& orc_;
  int N_;
  Eigen::VectorXd D_n_, D_c_, tx_power_;
  BatteryState bat_;
  int t_acc_ = 0;
  RunTrace tr_;
  std::vector<ModelVector> held_;
  int cur_k_ = 0;

  int tsec(double t) const { return std::clamp(static_cast<int>(std::floor(t + 1e-9)), 0, tl_.horizon()); }

  [[noreturn]] void abort(int ell, const std::string& phase, double t, const std::string& why) {
    tr_.abort_k = cur_k_;
    TraceRow r;
    r.k = cur_k_;
    r.ell = ell;
    r.phase = "abort:" + phase;
    r.t_start = t;
    r.battery_min = bat_.level_j.minCoeff();
    r.loss = std::numeric_limits<double>::quiet_NaN();
    r.grad_norm = std::numeric_limits<double>::quiet_NaN();
    tr_.rows.push_back(r);
    throw Abort{phase, why};
  }

  void accrue(double t) {
    const int now = tsec(t);
    if (now <= t_acc_) return;
    for (int n = 0; n < N_; ++n)
      bat_.level_j(n) = std::min(bat_.cap_j(n), bat_.level_j(n) + harvested_energy(tl_, n, t_acc_, now));
    t_acc_ = now;
    track();
  }

  void track() {
    tr_.battery_min = std::min(tr_.battery_min, bat_.level_j.minCoeff());
    tr_.battery_max = std::max(tr_.battery_max, bat_.level_j.maxCoeff());
  }

  // Applies consumption; returns the satellites with positive consumption
  // that cannot afford it. Nothing is applied when any such satellite exists.
  std::vector<int> consume(const Eigen::VectorXd& tx, const Eigen::VectorXd& compute) {
    BatteryStep st = battery_step(bat_, Eigen::VectorXd::Zero(N_), tx, compute);
    std::vector<int> bad;
    for (int n = 0; n < N_; ++n)
      if (tx(n) + compute(n) > 0 && !st.feasible[n]) bad.push_back(n);
    if (bad.empty()) {
      bat_ = st.state;
      track();
    }
    return bad;
  }

  struct Topology {
    DirectedForest forest;
    Eigen::MatrixXd rate;
  };

  Topology topology(bool global, Direction dir, double t, int ell, const std::string& phase) {
    const std::optional<DirectedForest>& fixed =
        global ? (dir == Direction::Downward ? s_.global_down : s_.global_up)
               : (dir == Direction::Downward ? s_.local_down : s_.local_up);
    const int ts = tsec(t);
    Topology out;
    if (fixed) {
      out.forest = *fixed;
      out.rate = Eigen::MatrixXd::Zero(N_, N_);
      for (int i = 0; i < N_; ++i)
        for (int j = 0; j < N_; ++j)
          if (fixed->adj(i, j)) out.rate(i, j) = link_rate_at(tl_, s_.link, i, j, ts);
      return out;
    }
    CandidateSet c = feasible_cbm_candidates(tl_, s_.link, ts, s_.max_links_per_sat, s_.terminals_per_sat);
    SpanningOptions o;
    o.direction = dir;
    o.terminals_per_sat = s_.terminals_per_sat;
    o.model_bits = s_.model_bits;
    o.tx_power_w = s_.link.tx_power_w;
    o.alpha2 = s_.alpha2;
    o.alpha3 = s_.alpha3;
    try {
      SpanningSolution sol = build_forest(c, global ? VCPartition::single(N_) : s_.partition, o);
      out.forest = std::move(sol.forest);
      out.rate = std::move(sol.rate);
    } catch (const InfeasibleError& e) {
      abort(ell, phase, t, std::string("topology: ") + e.what());
    }
    return out;
  }

  void row(int ell, const std::string& phase, double t, double latency, double energy, double transfer,
           const ModelVector& w) {
    TraceRow r;
    r.k = cur_k_;
    r.ell = ell;
    r.phase = phase;
    r.t_start = t;
    r.latency_s = latency;
    r.energy_j = energy;
    r.transfer_s = transfer;
    r.loss = orc_.global_loss(w, t);
    r.grad_norm = orc_.global_grad(w, t).norm();
    r.battery_min = bat_.level_j.minCoeff();
    tr_.rows.push_back(r);
  }

  void notify(int ell, const std::string& phase, double t, const Eigen::MatrixXd* grads = nullptr) {
    if (!s_.observer) return;
    PhaseEvent ev;
    ev.k = cur_k_;
    ev.ell = ell;
    ev.phase = phase;
    ev.t = t;
    ev.held = &held_;
    ev.grads = grads;
    s_.observer(ev);
  }

  // Transmission phase; returns the topology used.
  Topology communicate(bool global, Direction dir, double t, double cap, int ell, const std::string& phase,
                       const ModelVector& w_report) {
    accrue(t);
    Topology top = topology(global, dir, t, ell, phase);
    LatencyReport lr;
    try {
      lr = dir == Direction::Downward ? dispatch_latency(top.forest, top.rate, s_.model_bits)
                                      : aggregation_latency(top.forest, top.rate, s_.model_bits);
    } catch (const InfeasibleError& e) {
      abort(ell, phase, t, e.what());
    }
    if (lr.total > cap)
      abort(ell, phase, t, "deadline: latency " + csv::num(lr.total) + " s exceeds cap " + csv::num(cap) + " s");
    Eigen::VectorXd tx = sender_energy(top.forest, top.rate, s_.model_bits, tx_power_);
    std::vector<int> bad = consume(tx, Eigen::VectorXd::Zero(N_));
    if (!bad.empty()) abort(ell, phase, t, "battery: satellite " + std::to_string(bad.front()) + " cannot transmit");
    double transfer = 0.0;
    for (const auto& e : lr.edges) transfer += e.seconds;
    row(ell, phase, t, lr.total, tx.sum(), transfer, w_report);
    return top;
  }

  struct Training {
    Eigen::MatrixXd grads;
    double max_latency = 0.0;
    int skipped = 0;
  };

  Training train(int ell, double t, const std::vector<ModelVector>& start, const ModelVector& w_report) {
    accrue(t);
    const int M = orc_.dim();
    Training out;
    out.grads = Eigen::MatrixXd::Zero(M, N_);
    Eigen::VectorXd energy = Eigen::VectorXd::Zero(N_);
    std::vector<int> e_n(N_);
    for (int n = 0; n < N_; ++n) {
      e_n[n] = s_.e_c(s_.partition.assignment[n]);
      const double batch = std::ceil(s_.frac(n) * orc_.dataset_size(n) - 1e-12);
      TrainCost tc = train_cost(s_.compute, e_n[n], batch, s_.cpu_freq(n));
      if (tc.latency_s > s_.caps.lt_max)
        abort(ell, "LT", t, "deadline: satellite " + std::to_string(n) + " trains for " + csv::num(tc.latency_s) + " s");
      energy(n) = tc.energy_j;
    }
    // battery gate per satellite
    BatteryStep st = battery_step(bat_, Eigen::VectorXd::Zero(N_), Eigen::VectorXd::Zero(N_), energy);
    std::vector<bool> trains(N_, true);
    for (int n = 0; n < N_; ++n) {
      if (energy(n) > 0 && !st.feasible[n]) {
        if (s_.battery_policy == BatteryPolicy::Abort)
          abort(ell, "LT", t, "battery: satellite " + std::to_string(n) + " cannot afford training");
        trains[n] = false;
        energy(n) = 0.0;
        ++out.skipped;
      }
    }
    consume(Eigen::VectorXd::Zero(N_), energy);
    held_.resize(N_);
    for (int n = 0; n < N_; ++n) {
      if (!trains[n]) {
        held_[n] = start[n];
        continue;
      }
      const double batch = std::ceil(s_.frac(n) * orc_.dataset_size(n) - 1e-12);
      out.max_latency =
          std::max(out.max_latency, train_cost(s_.compute, e_n[n], batch, s_.cpu_freq(n)).latency_s);
      Rng rng = substream(s_.seed, "sgd", static_cast<std::uint64_t>(cur_k_) * 4096u + static_cast<unsigned>(ell),
                          static_cast<std::uint64_t>(n));
      SgdResult r = local_sgd(orc_, n, start[n], e_n[n], s_.frac(n), s_.eta, rng, t);
      held_[n] = std::move(r.w);
      out.grads.col(n) = r.cumulative_grad;
    }
    row(ell, "LT", t, out.max_latency, energy.sum(), 0.0, w_report);
    notify(ell, "LT", t, &out.grads);
    return out;
  }

  static std::vector<int> roots_of(const DirectedForest& f) {
    std::vector<int> r;
    for (int i = 0; i < f.n(); ++i)
      if (f.roots(i)) r.push_back(i);
    return r;
  }

  ModelVector round(int k, const RoundPlan& plan, const ModelVector& w) {
    cur_k_ = k;
    const int C = s_.partition.n_clusters;
    RoundSummary sum;
    sum.k = k;
    sum.t_init = plan.t_init;
    sum.loss = orc_.global_loss(w, plan.t_init);
    sum.grad_norm_sq = orc_.global_grad(w, plan.t_init).squaredNorm();

    // Phase 1: global dispatch
    communicate(true, Direction::Downward, plan.t_gd, s_.caps.gd_max, 0, "GD", w);
    held_.assign(N_, w);
    notify(0, "GD", plan.t_gd);

    std::vector<ModelVector> wbar(C, w);
    auto cluster_start = [&] {
      std::vector<ModelVector> st(N_);
      for (int n = 0; n < N_; ++n) st[n] = wbar[s_.partition.assignment[n]];
      return st;
    };

    for (int ell = 1; ell < s_.L; ++ell) {
      Training tr = train(ell, plan.t_lt[ell - 1], cluster_start(), w);
      sum.idle_s += s_.caps.lt_max - tr.max_latency;
      sum.skipped += tr.skipped;

      Topology up = communicate(false, Direction::Upward, plan.t_la[ell - 1], s_.caps.la_max, ell, "LA", w);
      Eigen::MatrixXd agg = tree_aggregate(up.forest, tr.grads, D_n_);
      for (int r : roots_of(up.forest)) {
        const int c = s_.partition.assignment[r];
        wbar[c] = apply_vc_update<double>(wbar[c], agg.col(r), s_.eta, D_c_(c));
      }
      notify(ell, "LA", plan.t_la[ell - 1]);

      communicate(false, Direction::Downward, plan.t_ld[ell - 1], s_.caps.ld_max, ell, "LD", w);
      held_ = cluster_start();
      notify(ell, "LD", plan.t_ld[ell - 1]);
    }

    // final local training
    Training fin = train(s_.L, plan.t_lt.back(), cluster_start(), w);
    sum.idle_s += s_.caps.lt_max - fin.max_latency;
    sum.skipped += fin.skipped;
    const int M = orc_.dim();
    Eigen::MatrixXd ghat(M, N_);
    Eigen::VectorXd weight(N_);
    Eigen::VectorXi e_n(N_);
    for (int n = 0; n < N_; ++n) {
      ghat.col(n) = (w - held_[n]) / s_.eta;
      e_n(n) = s_.e_c(s_.partition.assignment[n]);
      weight(n) = e_n(n) > 0 ? D_n_(n) / (e_n(n) * s_.L) : 0.0;
    }

    // Phase 5: global aggregation
    accrue(plan.t_ga);
    Topology up = topology(true, Direction::Upward, plan.t_ga, 0, "GA");
    Eigen::MatrixXd agg = tree_aggregate(up.forest, ghat, weight);
    const int root = roots_of(up.forest).front();
    const double xi = boosting_coefficient(D_n_, e_n, s_.L);
    ModelVector w_next = apply_global_update<double>(w, agg.col(root), s_.eta, xi, D_n_.sum());
    // latency, energy and the row come from the same topology
    LatencyReport lr;
    try {
      lr = aggregation_latency(up.forest, up.rate, s_.model_bits);
    } catch (const InfeasibleError& e) {
      abort(0, "GA", plan.t_ga, e.what());
    }
    if (lr.total > s_.caps.ga_max)
      abort(0, "GA", plan.t_ga,
            "deadline: latency " + csv::num(lr.total) + " s exceeds cap " + csv::num(s_.caps.ga_max) + " s");
    Eigen::VectorXd tx = sender_energy(up.forest, up.rate, s_.model_bits, tx_power_);
    std::vector<int> bad = consume(tx, Eigen::VectorXd::Zero(N_));
    if (!bad.empty())
      abort(0, "GA", plan.t_ga, "battery: satellite " + std::to_string(bad.front()) + " cannot transmit");
    double transfer = 0.0;
    for (const auto& e : lr.edges) transfer += e.seconds;
    row(0, "GA", plan.t_ga, lr.total, tx.sum(), transfer, w_next);
    held_[root] = w_next;
    notify(0, "GA", plan.t_ga);
    tr_.rounds.push_back(sum);
    return w_next;
  }
};

}  // namespace

RunTrace run_fed_span(const Scenario& s) {
  validate_scenario(s);
  return FedSpanRun(s).run();
}

void write_trace_csv(std::ostream& out, const RunTrace& t) {
  out << "k,ell,phase,t_start,latency_s,energy_j,loss,grad_norm,battery_min\n";
  for (const auto& r : t.rows)
    out << r.k << ',' << r.ell << ',' << r.phase << ',' << csv::num(r.t_start) << ',' << csv::num(r.latency_s) << ','
        << csv::num(r.energy_j) << ',' << csv::num(r.loss) << ',' << csv::num(r.grad_norm) << ','
        << csv::num(r.battery_min) << '\n';
}

void write_trace_csv(const std::string& path, const RunTrace& t) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  write_trace_csv(f, t);
}

}  // namespace fedspan
