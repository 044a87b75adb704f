#include <algorithm>
#include <cmath>
#include <limits>

#include "fedspan/csv.hpp"
#include "fedspan/errors.hpp"
#include "fedspan/simulate.hpp"

namespace fedspan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class BaselineRun {
 public:
  BaselineRun(const Scenario& s, const BaselineOptions& o)
      : s_(s), o_(o), tl_(*s.timeline), orc_(*s.oracle), N_(tl_.n_sats()), D_n_(orc_.data_sizes()) {
    horizon_ = o.horizon_s > 0 ? std::min<double>(o.horizon_s, tl_.horizon()) : tl_.horizon();
    level_ = Eigen::VectorXd::Constant(N_, s.battery_init_j);
    last_ = std::vector<int>(N_, static_cast<int>(std::floor(s.t0)));
    out_.trace.battery_min = out_.trace.battery_max = s.battery_init_j;
  }

  BaselineTrace run() {
    w_ = s_.w0;
    if (!any_contact()) {
      out_.trace.diagnostics.push_back(o_.kind == BaselineKind::SinkSync
                                           ? "starvation: sink " + std::to_string(o_.sink) +
                                                 " is never within range of a gateway"
                                           : std::string("starvation: no satellite is ever within range of a gateway"));
      out_.trace.final_model = w_;
      return std::move(out_);
    }
    if (o_.kind == BaselineKind::SinkSync)
      sink_sync();
    else
      ground_async();
    out_.trace.final_model = w_;
    return std::move(out_);
  }

 private:
  const Scenario& s_;
  const BaselineOptions& o_;
  const ConstellationTimeline& tl_;
  const LossOracle& orc_;
  int N_;
  Eigen::VectorXd D_n_;
  double horizon_ = 0.0;
  ModelVector w_;
  int version_ = 0;
  int aggregations_ = 0;
  double pending_transfer_ = 0.0;
  double pending_energy_ = 0.0;
  Eigen::VectorXd level_;
  std::vector<int> last_;
  BaselineTrace out_;

  int tsec(double t) const { return std::clamp(static_cast<int>(std::floor(t + 1e-9)), 0, tl_.horizon()); }

  double ground_rate(int n, double t) const {
    double best = 0.0;
    for (const auto& g : tl_.gateways) best = std::max(best, gateway_rate(tl_, s_.rf, g, n, tsec(t)));
    return best;
  }

  bool any_contact() const {
    if (tl_.gateways.empty()) return false;
    const int n_lo = o_.kind == BaselineKind::SinkSync ? o_.sink : 0;
    const int n_hi = o_.kind == BaselineKind::SinkSync ? o_.sink + 1 : N_;
    for (int t = tsec(s_.t0); t <= static_cast<int>(horizon_); ++t)
      for (int n = n_lo; n < n_hi; ++n)
        if (ground_rate(n, t) > 0) return true;
    return false;
  }

  void event(double t, int sat, const char* kind) { out_.events.push_back({t, sat, kind}); }

  void spend(int n, double t, double joules) {
    const int now = tsec(t);
    if (now > last_[n]) {
      level_(n) = std::min(s_.battery_cap_j, level_(n) + harvested_energy(tl_, n, last_[n], now));
      last_[n] = now;
    }
    level_(n) = std::max(0.0, level_(n) - joules);
    out_.trace.battery_min = std::min(out_.trace.battery_min, level_(n));
    out_.trace.battery_max = std::max(out_.trace.battery_max, level_(n));
  }

  double transfer(int n, double t, double rate, double power) {
    const double d = s_.model_bits / rate;
    pending_transfer_ += d;
    pending_energy_ += d * power;
    spend(n, t, d * power);
    return d;
  }

  double train_latency(int n) const {
    const double batch = std::ceil(s_.frac(n) * orc_.dataset_size(n) - 1e-12);
    return train_cost(s_.compute, s_.e_c(s_.partition.assignment[n]), batch, s_.cpu_freq(n)).latency_s;
  }

  ModelVector train(int n, const ModelVector& from, double t, int count) {
    const double batch = std::ceil(s_.frac(n) * orc_.dataset_size(n) - 1e-12);
    const int e = s_.e_c(s_.partition.assignment[n]);
    spend(n, t, train_cost(s_.compute, e, batch, s_.cpu_freq(n)).energy_j);
    Rng rng = substream(s_.seed, to_string(o_.kind), static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(count));
    return local_sgd(orc_, n, from, e, s_.frac(n), s_.eta, rng, t).w;
  }

  void record(double t, double latency) {
    TraceRow r;
    r.k = aggregations_;
    r.ell = 0;
    r.phase = to_string(o_.kind);
    r.t_start = t;
    r.latency_s = latency;
    r.energy_j = pending_energy_;
    r.transfer_s = pending_transfer_;
    r.loss = orc_.global_loss(w_, t);
    r.grad_norm = orc_.global_grad(w_, t).norm();
    r.battery_min = level_.minCoeff();
    out_.trace.rows.push_back(r);
    pending_transfer_ = pending_energy_ = 0.0;
    ++aggregations_;
  }

  bool done() const { return o_.max_aggregations > 0 && aggregations_ >= o_.max_aggregations; }

  // ---- ground-aggregated kinds ----

  enum class St { Training, Ready, Uploading, NeedModel, Downloading };

  struct Sat {
    St st = St::Training;
    double until = 0.0;
    ModelVector base, model;
    int base_version = 0;
    double hold_until = -kInf;
    int trained = 0;
    double upload_s = 0.0;
  };

  struct Arrival {
    double t;
    int n;
  };

  void aggregate_deltas(std::vector<int>& from, std::vector<Sat>& sats, double t, double latency) {
    if (from.empty()) return;
    ModelVector delta = ModelVector::Zero(w_.size());
    double total = 0.0;
    for (int n : from) {
      delta += D_n_(n) * (sats[n].model - sats[n].base);
      total += D_n_(n);
    }
    w_ += delta / total;
    ++version_;
    from.clear();
    event(t, -1, "aggregate");
    record(t, latency);
  }

  void ground_async() {
    std::vector<Sat> sats(N_);
    const double t0 = s_.t0;
    for (int n = 0; n < N_; ++n) {
      sats[n].base = w_;
      sats[n].until = t0 + train_latency(n);
    }
    std::vector<int> buffer;
    double buffer_latency = 0.0;
    for (int t = tsec(t0); t <= static_cast<int>(horizon_) && !done(); ++t) {
      // training completions
      for (int n = 0; n < N_; ++n) {
        Sat& S = sats[n];
        if (S.st == St::Training && S.until <= t) {
          S.model = train(n, S.base, S.until, S.trained++);
          S.st = St::Ready;
          event(S.until, n, "train_done");
        }
      }
      // uploads that finish within this second
      std::vector<Arrival> arrivals;
      for (int n = 0; n < N_; ++n) {
        Sat& S = sats[n];
        if (S.st == St::Ready && t >= S.hold_until) {
          double r = ground_rate(n, t);
          if (r > 0) {
            S.upload_s = transfer(n, t, r, s_.rf.power_w);
            S.until = t + S.upload_s;
            S.st = St::Uploading;
            event(t, n, "upload_start");
          }
        }
        if (S.st == St::Uploading && S.until < t + 1) arrivals.push_back({S.until, n});
      }
      std::sort(arrivals.begin(), arrivals.end(),
                [](const Arrival& a, const Arrival& b) { return a.t != b.t ? a.t < b.t : a.n < b.n; });
      for (const Arrival& a : arrivals) {
        Sat& S = sats[a.n];
        event(a.t, a.n, "arrival");
        S.hold_until = a.t + o_.hold_back_s;
        switch (o_.kind) {
          case BaselineKind::Async: {
            const double mix = 0.5 / (1.0 + (version_ - S.base_version));
            w_ = (1.0 - mix) * w_ + mix * S.model;
            ++version_;
            event(a.t, -1, "aggregate");
            record(a.t, S.upload_s);
            break;
          }
          case BaselineKind::Buffered:
            buffer.push_back(a.n);
            buffer_latency += S.upload_s;
            if (static_cast<int>(buffer.size()) >= o_.buffer) {
              aggregate_deltas(buffer, sats, a.t, buffer_latency);
              buffer_latency = 0.0;
            }
            break;
          default:
            buffer.push_back(a.n);
            buffer_latency += S.upload_s;
            break;
        }
        S.st = St::NeedModel;
        S.until = a.t;
        if (done()) break;
      }
      if (o_.kind == BaselineKind::Opportunistic && std::fmod(t - t0, o_.poll_s) == 0.0 && !buffer.empty()) {
        aggregate_deltas(buffer, sats, t, buffer_latency);
        buffer_latency = 0.0;
      }
      // model downloads and restarts
      for (int n = 0; n < N_; ++n) {
        Sat& S = sats[n];
        if (S.st == St::NeedModel) {
          double r = ground_rate(n, std::max<double>(t, S.until));
          if (r > 0) {
            double start = std::max<double>(t, S.until);
            S.until = start + transfer(n, start, r, s_.rf.power_w);
            S.base = w_;
            S.base_version = version_;
            S.st = St::Downloading;
            event(start, n, "download");
          }
        }
        if (S.st == St::Downloading && S.until < t + 1) {
          S.until += train_latency(n);
          S.st = St::Training;
        }
      }
    }
  }

  // ---- sink relay ----

  // Single-source shortest transmission times over the ISL candidates.
  std::vector<double> isl_paths(double t, std::vector<int>& prev) const {
    CandidateSet c = feasible_cbm_candidates(tl_, s_.link, tsec(t), s_.max_links_per_sat, s_.terminals_per_sat);
    std::vector<double> dist(N_, kInf);
    std::vector<bool> done(N_, false);
    prev.assign(N_, -1);
    dist[o_.sink] = 0.0;
    for (int it = 0; it < N_; ++it) {
      int u = -1;
      for (int v = 0; v < N_; ++v)
        if (!done[v] && dist[v] < kInf && (u < 0 || dist[v] < dist[u])) u = v;
      if (u < 0) break;
      done[u] = true;
      for (int v = 0; v < N_; ++v) {
        if (c.rate(u, v) <= 0) continue;
        double d = dist[u] + s_.model_bits / c.rate(u, v);
        if (d < dist[v]) {
          dist[v] = d;
          prev[v] = u;
        }
      }
    }
    return dist;
  }

  // Waits for a connected ISL graph; returns the time it was found.
  double connected(double t, std::vector<double>& dist, std::vector<int>& prev) const {
    for (; t <= horizon_; t = std::floor(t) + 1.0) {
      dist = isl_paths(t, prev);
      if (std::all_of(dist.begin(), dist.end(), [](double d) { return d < kInf; })) return t;
    }
    return kInf;
  }

  double wait_contact(int n, double t) const {
    for (; t <= horizon_; t = std::floor(t) + 1.0)
      if (ground_rate(n, t) > 0) return t;
    return kInf;
  }

  // One model over the RF link once a contact is up; false past the horizon.
  bool ground_hop(int n, double& t) {
    t = wait_contact(n, t);
    if (t == kInf) return false;
    t += transfer(n, t, ground_rate(n, t), s_.rf.power_w);
    return true;
  }

  void sink_sync() {
    double t = s_.t0;
    const int sink = o_.sink;
    std::vector<double> dist;
    std::vector<int> prev;
    int round = 0;
    while (!done()) {
      const double t_round = t;
      if (!ground_hop(sink, t)) break;
      event(t, sink, "download");
      // relay the model down the shortest-path tree
      t = connected(t, dist, prev);
      if (t == kInf) break;
      double spread = 0.0;
      for (int n = 0; n < N_; ++n) {
        if (prev[n] < 0) continue;
        transfer(prev[n], t, s_.model_bits / (dist[n] - dist[prev[n]]), s_.link.tx_power_w);
        spread = std::max(spread, dist[n]);
      }
      t += spread;
      std::vector<ModelVector> models(N_);
      double slowest = 0.0;
      for (int n = 0; n < N_; ++n) {
        models[n] = train(n, w_, t, round);
        slowest = std::max(slowest, train_latency(n));
      }
      t += slowest;
      event(t, -1, "train_done");
      // every model travels its own path back to the sink
      t = connected(t, dist, prev);
      if (t == kInf) break;
      double gather = 0.0;
      for (int n = 0; n < N_; ++n) {
        for (int v = n; prev[v] >= 0; v = prev[v])
          transfer(v, t, s_.model_bits / (dist[v] - dist[prev[v]]), s_.link.tx_power_w);
        gather = std::max(gather, dist[n]);
      }
      t += gather;
      event(t, sink, "collected");
      bool uploaded = true;
      for (int n = 0; n < N_ && uploaded; ++n) uploaded = ground_hop(sink, t);
      if (!uploaded) break;
      event(t, sink, "arrival");
      ModelVector avg = ModelVector::Zero(w_.size());
      for (int n = 0; n < N_; ++n) avg += D_n_(n) * models[n];
      w_ = avg / D_n_.sum();
      ++version_;
      event(t, -1, "aggregate");
      record(t, t - t_round);
      ++round;
      if (t > horizon_) break;
    }
  }
};

}  // namespace

BaselineTrace run_baseline(const Scenario& s, const BaselineOptions& o) {
  validate_scenario(s);
  if (o.kind == BaselineKind::SinkSync && (o.sink < 0 || o.sink >= s.timeline->n_sats()))
    throw ArgumentError("baseline.sink: not a satellite index");
  if (o.kind == BaselineKind::Buffered && o.buffer < 1) throw ArgumentError("baseline.buffer: must be >= 1");
  if (o.kind == BaselineKind::Opportunistic && !(o.poll_s >= 1.0))
    throw ArgumentError("baseline.poll_s: must be >= 1");
  return BaselineRun(s, o).run();
}

}  // namespace fedspan
