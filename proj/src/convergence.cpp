#include "fedspan/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

#include "fedspan/errors.hpp"

namespace fedspan {

void check_params(const BoundParams& p) {
  if (!(p.beta > 0)) throw ArgumentError("beta must be positive");
  if (p.theta < 0) throw ArgumentError("theta must be non-negative");
  if (!(p.lambda_max > 0 && p.lambda_max < 1)) throw ArgumentError("lambda_max must lie in (0, 1)");
  if (p.zeta_loc_hat < 1) throw ArgumentError("zeta_loc_hat must be >= 1");
  if (p.zeta_glob1 < 1) throw ArgumentError("zeta_glob1 must be >= 1");
  if (p.zeta_glob2 < 0) throw ArgumentError("zeta_glob2 must be >= 0");
  if (p.phi_min > 0 && p.phi_max > 0 && p.phi_min > p.phi_max) throw ArgumentError("phi_min exceeds phi_max");
}

namespace {

Eigen::VectorXd cluster_sizes(const VCPartition& part, const Eigen::VectorXd& D_n) {
  Eigen::VectorXd D_c = Eigen::VectorXd::Zero(part.n_clusters);
  for (Eigen::Index n = 0; n < D_n.size(); ++n) D_c(part.assignment[n]) += D_n(n);
  return D_c;
}

double weighted_iterations(const VCPartition& part, const Eigen::VectorXd& D_n, const Eigen::VectorXi& e_c, int L) {
  if (e_c.size() != part.n_clusters) throw SizeError("one e per cluster expected");
  Eigen::VectorXd D_c = cluster_sizes(part, D_n);
  return (D_c.array() * (L * e_c.cast<double>()).array()).sum() / D_n.sum();
}

// sum over l of (1 - frac) sigma^2 / frac for one satellite
double noise_sum(const RoundInputs& r, const Eigen::VectorXd& sigma, Eigen::Index n) {
  double s = 0.0;
  for (int l = 0; l < r.L; ++l) {
    double f = r.frac(n, r.frac.cols() == 1 ? 0 : l);
    if (!(f > 0 && f <= 1)) throw ArgumentError("minibatch fraction must be in (0, 1]");
    s += (1.0 - f) * sigma(n) * sigma(n) / f;
  }
  return s;
}

}  // namespace

double round_phi(const RoundInputs& r) { return 0.5 * r.eta * weighted_iterations(r.partition, r.D_n, r.e_c, r.L); }

double step_size_cap(const BoundParams& p, int L, int e_max, double lambda_k, const VCPartition& part,
                     const Eigen::VectorXd& D_n, const Eigen::VectorXi& e_c) {
  if (!(lambda_k > 0 && lambda_k < 1)) throw ArgumentError("lambda must lie in (0, 1)");
  if (!(p.beta > 0)) throw ArgumentError("beta must be positive");
  const double em = e_max;
  const double bracket = L * (L - 1.0) * em * em + em * (em - 1.0);
  double first = std::numeric_limits<double>::infinity();
  if (bracket > 0)
    first = std::sqrt(lambda_k / (8.0 * (p.zeta_glob1 * p.zeta_loc_hat + lambda_k) * bracket)) / p.beta;
  const double second = 1.0 / (2.0 * p.beta * weighted_iterations(part, D_n, e_c, L));
  return std::min(first, second);
}

BoundBreakdown general_bound(const BoundParams& p, const std::vector<RoundInputs>& rounds, double f0_minus_fstar,
                             bool cap_check) {
  check_params(p);
  if (rounds.empty()) throw ArgumentError("general_bound: no rounds");
  const double K = static_cast<double>(rounds.size());
  double phi_min = p.phi_min, phi_max = p.phi_max;
  if (phi_min <= 0 || phi_max <= 0) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& r : rounds) {
      double phi = round_phi(r);
      lo = std::min(lo, phi);
      hi = std::max(hi, phi);
    }
    if (phi_min <= 0) phi_min = lo;
    if (phi_max <= 0) phi_max = hi;
  }
  const double scale = 1.0 / (K * (1.0 - p.lambda_max));
  const double b2 = p.beta * p.beta, th2 = p.theta * p.theta;

  BoundBreakdown out;
  out.a = f0_minus_fstar / (K * phi_min * (1.0 - p.lambda_max));
  for (std::size_t k = 0; k < rounds.size(); ++k) {
    const RoundInputs& r = rounds[k];
    const Eigen::Index N = r.D_n.size();
    if (p.sigma_n.size() != N) throw SizeError("sigma_n must hold one value per satellite");
    if (r.frac.rows() != N) throw SizeError("frac must hold one row per satellite");
    if (r.lambda > p.lambda_max) throw ArgumentError("round lambda exceeds lambda_max");
    const int e_max = r.e_c.maxCoeff();
    if (cap_check) {
      double cap = step_size_cap(p, r.L, e_max, r.lambda, r.partition, r.D_n, r.e_c);
      if (r.eta > cap * (1.0 + 1e-12))
        throw PreconditionError("round " + std::to_string(k) + ": step size " + std::to_string(r.eta) +
                                " exceeds cap " + std::to_string(cap));
    }
    const double D = r.D_n.sum();
    const double DL = D * r.L;
    double c_term = 0.0, e_term = 0.0;
    for (int c = 0; c < r.partition.n_clusters; ++c) {
      double weighted = 0.0, plain = 0.0;
      for (Eigen::Index n = 0; n < N; ++n) {
        if (r.partition.assignment[n] != c) continue;
        double s = noise_sum(r, p.sigma_n, n);
        weighted += r.D_n(n) * s;
        plain += s;
      }
      const double ec = r.e_c(c);
      c_term += weighted / (DL * DL * ec);
      e_term += ((r.L - 1.0) * ec + ec - 1.0) * plain / DL;
    }
    const double em = e_max;
    out.b += scale * r.omega * r.delta / phi_min;
    out.c += scale * 8.0 * p.beta * th2 * phi_max * c_term;
    out.d += scale * 16.0 * r.eta * r.eta * b2 * (r.L * (r.L - 1.0) * em * em + em * (em - 1.0)) * p.zeta_glob2 *
             p.zeta_loc_hat;
    out.e += scale * 16.0 * r.eta * r.eta * b2 * th2 * e_term;
  }
  return out;
}

namespace {
void require_caps(const BoundParams& p) {
  if (!(p.l_min > 0 && p.l_max > 0 && p.ebar_min > 0 && p.ebar_max > 0 && p.ehat_min > 0 && p.ehat_max > 0 &&
        p.e_max > 0 && p.alpha > 0))
    throw ConfigError("corollary caps l_min, l_max, ebar_*, ehat_*, e_max and alpha must all be set");
}
}  // namespace

double corollary_step(const BoundParams& p, int K, int N) {
  require_caps(p);
  return p.alpha / std::sqrt(p.l_max * p.ehat_max * K / N);
}

double corollary_bound(const BoundParams& p, int K, int N, double f0_minus_fstar) {
  require_caps(p);
  check_params(p);
  const double sK = std::sqrt(static_cast<double>(K)), sN = std::sqrt(static_cast<double>(N));
  const double a = p.alpha, b = p.beta, th2 = p.theta * p.theta;
  const double lead = 2.0 * std::sqrt(p.l_max * p.ehat_max) / (p.l_min * p.ebar_min * a * sN);
  double s = lead * f0_minus_fstar + lead * p.chi;
  s += 4.0 * p.l_max * p.ebar_max * th2 * a * b * sN / std::sqrt(K * p.l_min * p.ehat_min) * p.sigma_max;
  const double tail = 16.0 * a * a * b * b * N / (sK * p.l_min * p.ehat_min);
  s += tail * (p.l_max * (p.l_max - 1.0) * p.e_max * p.e_max + p.e_max * (p.e_max - 1.0)) * p.zeta_glob2 *
       p.zeta_loc_hat;
  s += tail * th2 * ((p.l_max - 1.0) * p.e_max + p.e_max - 1.0) * p.sigma_max;
  return s / (sK * (1.0 - p.lambda_max));
}

double minibatch_noise(double frac, double sigma, double D_n, double theta) {
  if (!(frac > 0 && frac <= 1)) throw ArgumentError("minibatch fraction must be in (0, 1]");
  if (D_n < 1) throw ArgumentError("dataset size must be >= 1");
  return (1.0 - frac) * sigma * sigma / (frac * D_n) * 2.0 * theta * theta;
}

double measured_drift(const LossOracle& oracle, int sat, const std::vector<ModelVector>& probes, double t) {
  const double D = oracle.data_sizes().sum();
  const double w = oracle.dataset_size(sat) / D;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& p : probes)
    best = std::max(best, w * (oracle.local_loss(p, sat, t) - oracle.local_loss(p, sat, t - 1.0)));
  return best;
}

EstimateReport estimate_params(const LossOracle& oracle, const std::vector<ModelVector>& probes,
                               const std::vector<std::pair<double, double>>& windows, const EstimateOptions& opt) {
  EstimateReport rep;
  const int N = oracle.n_sats();
  Rng rng = substream(opt.seed, "estimate");
  std::normal_distribution<double> g(0.0, 1.0);

  // beta from gradient-difference ratios of local losses
  if (probes.empty()) rep.warnings.push_back("no probe models; beta estimated around the origin");
  ModelVector centre = probes.empty() ? ModelVector::Zero(oracle.dim()) : probes.back();
  std::uniform_int_distribution<int> sat_pick(0, N - 1);
  for (int s = 0; s < opt.pairs; ++s) {
    ModelVector w1 = probes.empty() ? centre : probes[s % probes.size()];
    ModelVector w2 = w1;
    for (Eigen::Index m = 0; m < w2.size(); ++m) w2(m) += g(rng);
    const int n = sat_pick(rng);
    double num = (oracle.local_grad(w1, n, 0.0) - oracle.local_grad(w2, n, 0.0)).norm();
    double den = (w1 - w2).norm();
    if (den > 0) {
      rep.beta = std::max(rep.beta, num / den);
      ++rep.beta_samples;
    }
  }

  // theta from per-datum gradient differences at a common model
  for (int n = 0; n < N; ++n) {
    const int Dn = oracle.dataset_size(n);
    if (Dn < 2) continue;
    std::uniform_int_distribution<int> pick(0, Dn - 1);
    for (int s = 0; s < opt.datum_pairs; ++s) {
      int i = pick(rng), j = pick(rng);
      if (i == j) continue;
      double den = (oracle.datum(n, i, 0.0) - oracle.datum(n, j, 0.0)).norm();
      if (den <= 0) continue;
      ModelVector gi = ModelVector::Zero(oracle.dim()), gj = ModelVector::Zero(oracle.dim());
      oracle.add_sample_grad(centre, n, i, 0.0, gi);
      oracle.add_sample_grad(centre, n, j, 0.0, gj);
      rep.theta = std::max(rep.theta, (gi - gj).norm() / den);
      ++rep.theta_samples;
    }
  }

  rep.sigma_n.resize(N);
  for (int n = 0; n < N; ++n) rep.sigma_n(n) = oracle.feature_sigma(n, 0.0);

  // drift: integer seconds inside each window
  rep.delta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(windows.size()));
  std::vector<ModelVector> dprobes = probes.empty() ? std::vector<ModelVector>{centre} : probes;
  for (std::size_t k = 0; k < windows.size(); ++k) {
    double t0 = std::floor(windows[k].first) + 1.0, t1 = std::floor(windows[k].second);
    for (int n = 0; n < N; ++n) {
      double best = 0.0;
      bool any = false;
      for (double t = t0; t <= t1; t += 1.0) {
        double d = measured_drift(oracle, n, dprobes, t);
        best = any ? std::max(best, d) : d;
        any = true;
        ++rep.delta_samples;
      }
      rep.delta(static_cast<Eigen::Index>(k)) += best;
    }
  }

  if (rep.beta_samples < opt.min_samples) rep.warnings.push_back("too few samples for beta");
  if (rep.theta_samples < opt.min_samples) rep.warnings.push_back("too few samples for theta");
  if (!windows.empty() && rep.delta_samples < opt.min_samples) rep.warnings.push_back("too few samples for drift");
  return rep;
}

std::string bound_to_json(const BoundBreakdown& b) {
  nlohmann::ordered_json j;
  j["a"] = b.a;
  j["b"] = b.b;
  j["c"] = b.c;
  j["d"] = b.d;
  j["e"] = b.e;
  j["total"] = b.total();
  return j.dump(2);
}

}  // namespace fedspan
