#include "fedspan/resource.hpp"

#include <algorithm>
#include <cmath>

#include "fedspan/errors.hpp"

namespace fedspan {

namespace {

void check_inputs(const ResourceInputs& in) {
  const Eigen::Index N = in.D_n.size();
  if (N == 0) throw ConfigError("resource subproblem: no satellites");
  if (static_cast<Eigen::Index>(in.partition.assignment.size()) != N)
    throw SizeError("resource subproblem: partition size differs from D_n");
  if (in.sigma_n.size() != N || in.battery_level.size() != N || in.harvest.size() != N || in.tx_energy.size() != N)
    throw SizeError("resource subproblem: per-satellite inputs have inconsistent sizes");
  if (!in.optimize_frac && in.frac_fixed.size() != N) throw SizeError("resource subproblem: frac_fixed size");
  if (!in.optimize_e && in.e_fixed.size() != in.partition.n_clusters)
    throw SizeError("resource subproblem: e_fixed size");
  if (!(in.f_min > 0 && in.f_min < in.compute.f_max)) throw ArgumentError("resource subproblem: bad f range");
  if (!(in.tau_lt_max > 0)) throw ArgumentError("resource subproblem: tau_lt_max must be positive");
  if (in.L < 1) throw ArgumentError("resource subproblem: L must be >= 1");
}

double geo_mid(double lo, double hi) { return std::sqrt(lo * hi); }

// (alpha/2) f^3 * (work / f)
double half_energy(const ComputeParams& cp, double work, double f) { return 0.5 * cp.chipset_cap * work * f * f; }

}  // namespace

ResourcePoint unpack(const ResourceInputs& in, const ResourceLayout& lay, const Eigen::VectorXd& x) {
  const Eigen::Index N = in.D_n.size();
  const int C = in.partition.n_clusters;
  ResourcePoint p;
  p.f.resize(N);
  p.frac.resize(N);
  p.e.resize(C);
  for (Eigen::Index n = 0; n < N; ++n) {
    p.f(n) = x(lay.f[n]);
    p.frac(n) = in.optimize_frac ? x(lay.frac[n]) : in.frac_fixed(n);
  }
  for (int c = 0; c < C; ++c) p.e(c) = in.optimize_e ? x(lay.e[c]) : in.e_fixed(c);
  p.T = x(lay.T);
  p.idle = in.tau_lt_max - p.T;
  return p;
}

ResourceProblem build_resource_subproblem(const ResourceInputs& in) {
  check_inputs(in);
  const int N = static_cast<int>(in.D_n.size());
  const int C = in.partition.n_clusters;
  const double D = in.D_n.sum();
  const double L = in.L;
  const double tau = in.tau_lt_max;
  const double a = in.compute.cycles_per_point;
  const double half_alpha = 0.5 * in.compute.chipset_cap;

  ResourceLayout lay;
  VarSpace vs;
  for (int n = 0; n < N; ++n) lay.f.push_back(vs.add("f" + std::to_string(n), in.f_min, in.compute.f_max));
  if (in.optimize_frac)
    for (int n = 0; n < N; ++n) lay.frac.push_back(vs.add("frac" + std::to_string(n), in.frac_min, 1.0));
  if (in.optimize_e)
    for (int c = 0; c < C; ++c) lay.e.push_back(vs.add("e" + std::to_string(c), in.e_lo, in.e_hi));
  lay.T = vs.add("T", tau * 1e-9, tau);
  lay.idle = vs.add("idle", tau * 1e-6, tau);
  const bool bound_terms = in.alpha1 > 0.0;
  if (in.optimize_e && bound_terms) lay.emax = vs.add("emax", in.e_lo, in.e_hi * std::pow(C, 1.0 / in.p) * 1.001);
  if (bound_terms) lay.epi = vs.add("t", 1e-12, 1e12);
  lay.size = vs.size();

  const int nv = vs.size();
  ResourceProblem rp;
  rp.layout = lay;

  rp.x0.resize(lay.size);
  for (int j = 0; j < nv; ++j) rp.x0(j) = geo_mid(vs.lo(j), vs.hi(j));
  // start on idle + T = tau
  rp.x0(lay.T) = rp.x0(lay.idle) = 0.5 * tau;

  rp.builder = [in, lay, vs, nv, N, C, D, L, tau, a, half_alpha, bound_terms](const Eigen::VectorXd& x, double) {
    GPProgram gp;
    gp.vars = vs;
    auto var = [&](int j, double pw = 1.0, double c = 1.0) { return Monomial::variable(j, nv, pw, c); };
    auto cst = [&](double c) { return Monomial::constant(c, nv); };
    auto frac = [&](int n) { return in.optimize_frac ? var(lay.frac[n]) : cst(in.frac_fixed(n)); };
    auto e_of = [&](int c) { return in.optimize_e ? var(lay.e[c]) : cst(in.e_fixed(c)); };
    const Eigen::VectorXd xv = x.head(nv);
    gp.exact = true;

    // compute energy and latency per satellite
    Posynomial energy;
    for (int n = 0; n < N; ++n) {
      const int c = in.partition.assignment[n];
      Monomial work = a * in.D_n(n) * (e_of(c) * frac(n));  // cycles per local round
      Monomial en = (L * half_alpha) * (work * var(lay.f[n], 2.0));
      energy = energy + Posynomial(en);
      gp.add_ineq(Posynomial(work / (var(lay.f[n]) * var(lay.T))), "latency" + std::to_string(n));
      const double budget = in.battery_level(n) + in.harvest(n);
      if (!(budget > 0)) throw InfeasibleError("satellite " + std::to_string(n) + " has no energy budget");
      gp.add_ineq((1.0 / budget) * (Posynomial(en) + Posynomial(cst(in.tx_energy(n) + in.eps))),
                  "battery" + std::to_string(n));
    }

    Posynomial obj = (in.alpha2 * L) * Posynomial(var(lay.T)) + in.alpha3 * energy;
    const double fixed = in.alpha2 * in.tx_latency + in.alpha3 * in.tx_energy.sum();
    if (fixed > 0) obj = obj + Posynomial(cst(fixed));

    if (bound_terms) {
      const BoundParams& bp = in.bound;
      const double scale = in.alpha1 / (1.0 - bp.lambda_max);
      Posynomial phi;
      Eigen::VectorXd D_c = Eigen::VectorXd::Zero(C);
      for (int n = 0; n < N; ++n) D_c(in.partition.assignment[n]) += in.D_n(n);
      for (int c = 0; c < C; ++c) phi = phi + Posynomial((0.5 * in.eta * D_c(c) * L / D) * e_of(c));
      phi = simplify(phi);
      if (phi.terms.size() > 1) gp.exact = false;

      Signomial S;
      // (b) idle drift over the round
      if (in.drift > 0)
        S = S + Signomial{Posynomial(in.drift * L * var(lay.idle) / agm_condense(phi, xv)), {}};
      // (c) and (e) sampling noise
      const double th2 = bp.theta * bp.theta, b2 = bp.beta * bp.beta, DL = D * L;
      for (int c = 0; c < C; ++c) {
        Signomial noise;
        Signomial wnoise;
        for (int n = 0; n < N; ++n) {
          if (in.partition.assignment[n] != c) continue;
          const double s2 = L * in.sigma_n(n) * in.sigma_n(n);
          Signomial one_minus = Posynomial(pow(frac(n), -1.0)) - Posynomial(cst(1.0));
          noise = noise + s2 * one_minus;
          wnoise = wnoise + (in.D_n(n) * s2) * one_minus;
        }
        if (noise.pos.empty()) continue;
        Signomial c_term = (8.0 * bp.beta * th2 / (DL * DL)) * (Signomial{phi / e_of(c), {}} * wnoise);
        Signomial lin = Posynomial(L * e_of(c)) - Posynomial(cst(1.0));
        Signomial e_term = (16.0 * in.eta * in.eta * b2 * th2 / DL) * (lin * noise);
        S = S + c_term + e_term;
      }
      // (d) local-round drift through e_max
      Monomial E = in.optimize_e ? var(lay.emax) : cst(static_cast<double>(in.e_fixed.maxCoeff()));
      const double dcoef = 16.0 * in.eta * in.eta * b2 * bp.zeta_glob2 * bp.zeta_loc_hat;
      if (dcoef > 0)
        S = S + dcoef * (Posynomial((L * (L - 1.0) + 1.0) * pow(E, 2.0)) - Posynomial(E));
      if (in.optimize_e) {
        Posynomial smax;
        for (int c = 0; c < C; ++c) smax = smax + Posynomial(pow(var(lay.e[c]) / E, in.p));
        gp.add_ineq(smax, "emax");
      }
      S = scale * S;
      S.pos = simplify(S.pos);
      S.neg = simplify(S.neg);
      // epigraph: P <= t + Q
      Monomial t = var(lay.epi);
      if (S.pos.empty()) S.pos = Posynomial(cst(1e-300));
      Posynomial den = Posynomial(t) + S.neg;
      gp.add_ineq(condensed_ratio(S.pos, den, xv), "bound-epigraph");
      if (!S.neg.empty()) gp.exact = false;
      obj = obj + Posynomial(t);
    }
    gp.objective = obj;

    // idle + T = tau_lt_max. The objective never decreases in idle, so only
    // idle >= tau - T can bind; idle is reported as tau - T.
    gp.add_ineq(condensed_ratio(cst(tau), Posynomial(var(lay.idle)) + Posynomial(var(lay.T)), xv), "idle");
    gp.exact = false;
    return gp;
  };
  return rp;
}

ResourceSolution solve_resource(const ResourceInputs& in, const SCAOptions& opt) {
  ResourceProblem rp = build_resource_subproblem(in);
  ResourceSolution sol;
  sol.sca = sca_loop(rp.builder, rp.x0, opt);
  ResourcePoint pt = unpack(in, rp.layout, sol.sca.x);
  sol.f = pt.f;
  sol.frac = pt.frac;
  sol.e_relaxed = pt.e;
  sol.e.resize(pt.e.size());
  for (Eigen::Index c = 0; c < pt.e.size(); ++c)
    sol.e(c) = std::max(static_cast<int>(std::ceil(in.e_lo - 1e-9)), static_cast<int>(std::floor(pt.e(c) + 1e-9)));
  sol.T = pt.T;
  sol.idle = pt.idle;
  sol.objective = sol.sca.history.empty() ? 0.0 : sol.sca.history.back();
  return sol;
}

ConstraintCheck check_original(const ResourceInputs& in, const ResourcePoint& pt) {
  ConstraintCheck out;
  auto note = [&](double rel, const std::string& name) {
    if (rel > out.worst) {
      out.worst = rel;
      out.name = name;
    }
  };
  const Eigen::Index N = in.D_n.size();
  const double tau = in.tau_lt_max;
  for (Eigen::Index n = 0; n < N; ++n) {
    const std::string s = std::to_string(n);
    const int c = in.partition.assignment[n];
    note((in.f_min - pt.f(n)) / in.f_min, "f_min" + s);
    note((pt.f(n) - in.compute.f_max) / in.compute.f_max, "f_max" + s);
    note((in.frac_min - pt.frac(n)) / in.frac_min, "frac_min" + s);
    note(pt.frac(n) - 1.0, "frac_max" + s);
    const double work = pt.e(c) * in.compute.cycles_per_point * pt.frac(n) * in.D_n(n);
    note((work / pt.f(n) - pt.T) / pt.T, "latency" + s);
    const double budget = in.battery_level(n) + in.harvest(n);
    const double energy = in.L * half_energy(in.compute, work, pt.f(n));
    note((energy + in.tx_energy(n) - budget) / budget, "battery" + s);
  }
  for (Eigen::Index c = 0; c < pt.e.size(); ++c) {
    note((in.e_lo - pt.e(c)) / in.e_lo, "e_lo" + std::to_string(c));
    note((pt.e(c) - in.e_hi) / in.e_hi, "e_hi" + std::to_string(c));
  }
  note((pt.T - tau) / tau, "T_max");
  note(std::abs(pt.idle - (tau - pt.T)) / tau, "idle");
  note(-pt.idle / tau, "idle_nonneg");
  return out;
}

double resource_objective(const ResourceInputs& in, const ResourcePoint& pt) {
  const Eigen::Index N = in.D_n.size();
  const int C = in.partition.n_clusters;
  const double L = in.L;
  double energy = 0.0;
  for (Eigen::Index n = 0; n < N; ++n) {
    const double work =
        pt.e(in.partition.assignment[n]) * in.compute.cycles_per_point * pt.frac(n) * in.D_n(n);
    energy += L * half_energy(in.compute, work, pt.f(n));
  }
  double obj = in.alpha2 * (L * pt.T + in.tx_latency) + in.alpha3 * (energy + in.tx_energy.sum());
  if (in.alpha1 > 0) {
    // evaluated at the relaxed iteration counts
    const BoundParams& bp = in.bound;
    const double emax = pt.e.maxCoeff();
    const double D = in.D_n.sum(), DL = D * L, th2 = bp.theta * bp.theta, b2 = bp.beta * bp.beta;
    Eigen::VectorXd D_c = Eigen::VectorXd::Zero(C);
    for (Eigen::Index n = 0; n < N; ++n) D_c(in.partition.assignment[n]) += in.D_n(n);
    double phi = 0.0;
    for (int c = 0; c < C; ++c) phi += 0.5 * in.eta * D_c(c) * L * pt.e(c) / D;
    double s = in.drift * L * pt.idle / phi;
    for (int c = 0; c < C; ++c) {
      double plain = 0.0, weighted = 0.0;
      for (Eigen::Index n = 0; n < N; ++n) {
        if (in.partition.assignment[n] != c) continue;
        double v = L * (1.0 - pt.frac(n)) * in.sigma_n(n) * in.sigma_n(n) / pt.frac(n);
        plain += v;
        weighted += in.D_n(n) * v;
      }
      s += 8.0 * bp.beta * th2 * phi * weighted / (DL * DL * pt.e(c));
      s += 16.0 * in.eta * in.eta * b2 * th2 * (L * pt.e(c) - 1.0) * plain / DL;
    }
    s += 16.0 * in.eta * in.eta * b2 * (L * (L - 1.0) * emax * emax + emax * (emax - 1.0)) * bp.zeta_glob2 *
         bp.zeta_loc_hat;
    obj += in.alpha1 * s / (1.0 - bp.lambda_max);
  }
  return obj;
}

}  // namespace fedspan
