#include "fedspan/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <numeric>

#include "json.hpp"

#include "fedspan/csv.hpp"
#include "fedspan/errors.hpp"

namespace fedspan {

namespace {

using json = nlohmann::ordered_json;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  return out;
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

double reference_min_loss(const Config& cfg, double t) {
  const LossOracle& orc = *cfg.scenario.oracle;
  if (cfg.quadratic) return orc.global_loss(cfg.quadratic->optimum(t), t);
  ModelVector w = cfg.scenario.w0;
  double f = orc.global_loss(w, t);
  double step = 1.0;
  for (int it = 0; it < 2000; ++it) {
    ModelVector g = orc.global_grad(w, t);
    const double gg = g.squaredNorm();
    if (gg < 1e-20) break;
    step *= 2.0;
    ModelVector cand;
    double fc = 0.0;
    for (;;) {
      cand = w - step * g;
      fc = orc.global_loss(cand, t);
      if (fc <= f - 0.5 * step * gg || step < 1e-12) break;
      step *= 0.5;
    }
    if (f - fc < 1e-15 * std::max(1.0, std::abs(f))) {
      w = cand;
      f = std::min(f, fc);
      break;
    }
    w = cand;
    f = fc;
  }
  return f;
}

MethodSummary summarize(const std::string& method, const RunTrace& t, double t0, double f0, double fstar,
                        const std::vector<double>& fractions) {
  MethodSummary s;
  s.method = method;
  s.aborted = t.aborted;
  s.diagnostics = t.diagnostics;
  if (t.aborted) s.diagnostics.push_back("aborted at round " + std::to_string(t.abort_k) + " in " + t.abort_phase +
                                         ": " + t.abort_reason);
  for (double fr : fractions) {
    ThresholdHit h;
    h.fraction = fr;
    h.target_loss = fstar + fr * (f0 - fstar);
    s.hits.push_back(h);
  }
  double transfer = 0.0, energy = 0.0;
  s.final_loss = f0;
  for (const auto& r : t.rows) {
    transfer += r.transfer_s;
    energy += r.energy_j;
    const double wall = r.t_start + r.latency_s - t0;
    s.wall_s = std::max(s.wall_s, wall);
    if (r.phase == "GA" || r.phase == method) ++s.aggregations;
    if (!std::isfinite(r.loss)) continue;  // abort rows
    s.final_loss = r.loss;
    for (auto& h : s.hits) {
      if (h.reached || r.loss > h.target_loss) continue;
      h.reached = true;
      h.transfer_s = transfer;
      h.wall_s = wall;
      h.energy_j = energy;
    }
  }
  s.total_energy_j = energy;
  s.total_transfer_s = transfer;
  return s;
}

RunTrace run_with_probes(const Scenario& s, std::vector<ModelVector>& probes) {
  Scenario sc = s;
  auto prev = s.observer;
  sc.observer = [&probes, prev](const PhaseEvent& ev) {
    if (ev.phase == "GD" && ev.held && !ev.held->empty()) probes.push_back(ev.held->front());
    if (prev) prev(ev);
  };
  return run_fed_span(sc);
}

std::vector<MethodRun> run_methods(const Config& cfg, int jobs) {
  std::vector<std::string> names{"fed_span"};
  for (auto k : cfg.baselines) names.emplace_back(to_string(k));
  std::vector<MethodRun> out(names.size());
  auto one = [&cfg, &names](std::size_t i) {
    MethodRun r;
    r.method = names[i];
    if (i == 0) {
      r.trace = run_fed_span(cfg.scenario);
    } else {
      BaselineOptions o = cfg.baseline;
      o.kind = cfg.baselines[i - 1];
      r.trace = run_baseline(cfg.scenario, o).trace;
    }
    return r;
  };
  jobs = std::max(1, jobs);
  for (std::size_t i = 0; i < names.size(); i += jobs) {
    std::vector<std::future<MethodRun>> fut;
    for (std::size_t j = i; j < std::min(names.size(), i + jobs); ++j)
      fut.push_back(std::async(jobs == 1 ? std::launch::deferred : std::launch::async, one, j));
    for (std::size_t j = 0; j < fut.size(); ++j) out[i + j] = fut[j].get();
  }
  return out;
}

std::vector<MethodSummary> compare_methods(const Config& cfg, const std::vector<MethodRun>& runs) {
  const Scenario& s = cfg.scenario;
  const double f0 = s.oracle->global_loss(s.w0, s.t0);
  const double fstar = reference_min_loss(cfg, s.t0);
  std::vector<MethodSummary> out;
  for (const auto& r : runs) out.push_back(summarize(r.method, r.trace, s.t0, f0, fstar, cfg.thresholds));
  return out;
}

std::vector<LedgerRow> ledger_rows(const RunTrace& t) {
  std::vector<LedgerRow> out;
  for (const auto& r : t.rows) out.push_back({r.k, r.phase, r.latency_s, r.energy_j, r.battery_min});
  return out;
}

void write_rounds_csv(const std::string& path, const RunTrace& t) {
  auto out = open_out(path);
  out << "k,t_init,idle_s,loss,grad_norm_sq,skipped\n";
  for (const auto& r : t.rounds)
    out << r.k << ',' << csv::num(r.t_init) << ',' << csv::num(r.idle_s) << ',' << csv::num(r.loss) << ','
        << csv::num(r.grad_norm_sq) << ',' << r.skipped << '\n';
}

void write_loss_curve_csv(const std::string& path, const std::vector<MethodRun>& runs, double t0) {
  auto out = open_out(path);
  out << "method,t,cum_latency_s,cum_transfer_s,cum_energy_j,loss\n";
  for (const auto& m : runs) {
    double lat = 0.0, tr = 0.0, en = 0.0;
    for (const auto& r : m.trace.rows) {
      lat += r.latency_s;
      tr += r.transfer_s;
      en += r.energy_j;
      out << m.method << ',' << csv::num(r.t_start + r.latency_s - t0) << ',' << csv::num(lat) << ','
          << csv::num(tr) << ',' << csv::num(en) << ',' << csv::num(r.loss) << '\n';
    }
  }
}

void write_threshold_csv(const std::string& path, const std::vector<MethodSummary>& rows) {
  auto out = open_out(path);
  out << "method,fraction,target_loss,reached,energy_j,transfer_s,wall_s\n";
  for (const auto& s : rows)
    for (const auto& h : s.hits)
      out << s.method << ',' << csv::num(h.fraction) << ',' << csv::num(h.target_loss) << ',' << (h.reached ? 1 : 0)
          << ',' << csv::num(h.energy_j) << ',' << csv::num(h.transfer_s) << ',' << csv::num(h.wall_s) << '\n';
}

std::string summary_json(const std::vector<MethodSummary>& rows) {
  json j = json::array();
  for (const auto& s : rows) {
    json m;
    m["method"] = s.method;
    m["aggregations"] = s.aggregations;
    m["total_energy_j"] = s.total_energy_j;
    m["total_transfer_s"] = s.total_transfer_s;
    m["wall_s"] = s.wall_s;
    m["final_loss"] = s.final_loss;
    m["aborted"] = s.aborted;
    json hits = json::array();
    for (const auto& h : s.hits) {
      json x;
      x["fraction"] = h.fraction;
      x["target_loss"] = h.target_loss;
      x["reached"] = h.reached;
      if (h.reached) {
        x["transfer_s"] = h.transfer_s;
        x["wall_s"] = h.wall_s;
        x["energy_j"] = h.energy_j;
      }
      hits.push_back(x);
    }
    m["thresholds"] = hits;
    m["diagnostics"] = s.diagnostics;
    j.push_back(m);
  }
  return j.dump(2);
}

BoundReport evaluate_bound(const Config& cfg, const RunTrace& t, const std::vector<ModelVector>& probes) {
  const Scenario& s = cfg.scenario;
  const LossOracle& orc = *s.oracle;
  const int N = orc.n_sats();
  const Eigen::VectorXd D = orc.data_sizes();
  BoundReport rep;
  BoundParams& p = rep.params;
  p = cfg.bound.params;

  std::vector<std::pair<double, double>> windows;
  for (std::size_t k = 0; k < t.rounds.size(); ++k) {
    const double b = t.rounds[k].t_init;
    const double e = k + 1 < t.rounds.size() ? t.rounds[k + 1].t_init : b + t.rounds[k].idle_s + 1.0;
    windows.emplace_back(b, e);
  }
  EstimateOptions eo;
  eo.seed = s.seed;
  rep.estimate = estimate_params(orc, probes, windows, eo);
  for (const auto& w : rep.estimate.warnings) rep.notes.push_back(w);
  if (cfg.bound.estimate) {
    p.beta = rep.estimate.beta;
    p.theta = std::max(1.0, rep.estimate.theta);
    p.sigma_n = rep.estimate.sigma_n;
  } else {
    p.sigma_n.resize(N);
    for (int n = 0; n < N; ++n) p.sigma_n(n) = orc.feature_sigma(n, s.t0);
  }

  if (!probes.empty()) {
    std::vector<ProbeGradients> grads(N, ProbeGradients(orc.dim(), static_cast<Eigen::Index>(probes.size())));
    for (int n = 0; n < N; ++n)
      for (std::size_t i = 0; i < probes.size(); ++i) grads[n].col(i) = orc.local_grad(probes[i], n, s.t0);
    HeterogeneityStats h = zeta_glob2_bound(s.partition, grads, {}, {}, D);
    if (cfg.bound.estimate) {
      p.zeta_loc_hat = std::max(1.0, h.zeta_loc_hat);
      p.zeta_glob1 = 1.0;
      p.zeta_glob2 = zeta_glob2_sample(s.partition, grads, h.a, h.b);
    }
  }

  std::vector<RoundInputs> rounds;
  for (std::size_t k = 0; k < t.rounds.size(); ++k) {
    RoundInputs r;
    r.eta = s.eta;
    r.L = s.L;
    r.partition = s.partition;
    r.e_c = s.e_c;
    r.frac = s.frac;
    r.D_n = D;
    r.omega = t.rounds[k].idle_s;
    r.delta = k < static_cast<std::size_t>(rep.estimate.delta.size()) ? rep.estimate.delta(k) : 0.0;
    r.lambda = p.lambda_max;
    rounds.push_back(r);
    rep.measured_avg_grad_sq += t.rounds[k].grad_norm_sq;
  }
  if (!rounds.empty()) rep.measured_avg_grad_sq /= static_cast<double>(rounds.size());
  rep.f0_minus_fstar = orc.global_loss(s.w0, s.t0) - reference_min_loss(cfg, s.t0);
  rep.cap = step_size_cap(p, s.L, s.e_c.maxCoeff(), p.lambda_max, s.partition, D, s.e_c);
  if (rounds.empty()) {
    rep.notes.push_back("no completed rounds");
    return rep;
  }
  try {
    rep.breakdown = general_bound(p, rounds, rep.f0_minus_fstar);
  } catch (const PreconditionError& e) {
    rep.cap_ok = false;
    rep.notes.push_back(e.what());
    rep.breakdown = general_bound(p, rounds, rep.f0_minus_fstar, false);
  }
  return rep;
}

int calibrate_step(Config& cfg, int max_passes) {
  if (!(cfg.bound.eta_cap_scale > 0.0)) return 0;
  for (int pass = 1; pass <= max_passes; ++pass) {
    std::vector<ModelVector> probes;
    RunTrace t = run_with_probes(cfg.scenario, probes);
    BoundReport b = evaluate_bound(cfg, t, probes);
    if (b.cap_ok || !(b.cap > 0.0)) return pass;
    cfg.scenario.eta = cfg.bound.eta_cap_scale * b.cap;
  }
  return max_passes;
}

std::string bound_report_json(const BoundReport& r) {
  json j;
  json p;
  p["beta"] = r.params.beta;
  p["theta"] = r.params.theta;
  p["sigma_n"] = vec_json(r.params.sigma_n);
  p["lambda_max"] = r.params.lambda_max;
  p["zeta_loc_hat"] = r.params.zeta_loc_hat;
  p["zeta_glob1"] = r.params.zeta_glob1;
  p["zeta_glob2"] = r.params.zeta_glob2;
  j["params"] = p;
  j["estimate_samples"] = {{"beta", r.estimate.beta_samples},
                           {"theta", r.estimate.theta_samples},
                           {"delta", r.estimate.delta_samples}};
  j["f0_minus_fstar"] = r.f0_minus_fstar;
  j["step_cap"] = r.cap;
  j["cap_ok"] = r.cap_ok;
  j["terms"] = json::parse(bound_to_json(r.breakdown));
  j["bound"] = r.breakdown.total();
  j["measured_avg_grad_sq"] = r.measured_avg_grad_sq;
  j["notes"] = r.notes;
  return j.dump(2);
}

std::vector<OptimizeEntry> optimize_resources(const Config& cfg, const RunTrace& t, const BoundReport& b) {
  const Scenario& s = cfg.scenario;
  const OptimizerConfig& oc = cfg.optimizer;
  const int N = s.oracle->n_sats();
  const int rounds = std::max<int>(1, static_cast<int>(t.rounds.size()));

  // communication cost per round, spread evenly over the satellites
  double comm_e = 0.0, comm_l = 0.0;
  for (const auto& r : t.rows) {
    if (r.phase == "LT" || r.phase.rfind("abort:", 0) == 0) continue;
    comm_e += r.energy_j;
    comm_l += r.latency_s;
  }
  const double tau_loc = s.tau_loc > 0 ? s.tau_loc : default_tau_loc(s.L, s.tau_tti);
  const int round_s = static_cast<int>(std::ceil(s.caps.gd_max + tau_loc + s.caps.ga_max));
  const int t0 = static_cast<int>(std::floor(s.t0));
  double drift = 0.0;
  if (b.estimate.delta.size() > 0) drift = b.estimate.delta.mean();

  std::vector<int> Ls = oc.L_values.empty() ? std::vector<int>{s.L} : oc.L_values;
  std::vector<OptimizeEntry> out;
  for (int L : Ls) {
    ResourceInputs in;
    in.partition = s.partition;
    in.D_n = s.oracle->data_sizes();
    in.sigma_n = b.params.sigma_n;
    in.compute = s.compute;
    in.bound = b.params;
    in.L = L;
    in.eta = s.eta;
    in.drift = drift;
    in.tau_lt_max = s.caps.lt_max;
    in.f_min = oc.f_min;
    in.battery_level = Eigen::VectorXd::Constant(N, s.battery_init_j);
    in.harvest.resize(N);
    for (int n = 0; n < N; ++n) in.harvest(n) = harvested_energy(*s.timeline, n, t0, t0 + round_s);
    in.tx_energy = Eigen::VectorXd::Constant(N, comm_e / rounds / N);
    in.tx_latency = comm_l / rounds;
    in.alpha1 = oc.alpha1;
    in.alpha2 = oc.alpha2;
    in.alpha3 = oc.alpha3;
    in.e_hi = oc.e_hi;
    in.frac_min = oc.frac_min;
    in.p = oc.p;
    in.eps = oc.eps;
    OptimizeEntry e;
    e.L = L;
    e.solution = solve_resource(in);
    ResourcePoint pt{e.solution.f, e.solution.frac, e.solution.e_relaxed, e.solution.T, e.solution.idle};
    e.check = check_original(in, pt);
    e.exact_objective = resource_objective(in, pt);
    out.push_back(std::move(e));
  }
  return out;
}

std::string optimize_report_json(const std::vector<OptimizeEntry>& rows) {
  json j = json::array();
  for (const auto& r : rows) {
    const ResourceSolution& s = r.solution;
    json m;
    m["L"] = r.L;
    m["objective"] = r.exact_objective;
    m["gp_objective"] = s.objective;
    m["cpu_freq"] = vec_json(s.f);
    m["frac"] = vec_json(s.frac);
    m["e"] = std::vector<int>(s.e.data(), s.e.data() + s.e.size());
    m["train_window_s"] = s.T;
    m["idle_s"] = s.idle;
    m["sca_iterations"] = s.sca.iterations;
    m["converged"] = s.sca.converged;
    m["history"] = s.sca.history;
    m["worst_violation"] = r.check.worst;
    m["worst_constraint"] = r.check.name;
    if (!s.sca.diagnostics.empty()) m["diagnostics"] = s.sca.diagnostics;
    j.push_back(m);
  }
  return j.dump(2);
}

}  // namespace fedspan
