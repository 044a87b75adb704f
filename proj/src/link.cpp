#include "fedspan/link.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "fedspan/csv.hpp"
#include "fedspan/errors.hpp"

namespace fedspan {

LinkBudgetParams LinkBudgetParams::reference() {
  LinkBudgetParams p;
  const double fal = 15e-6;
  const double ad = 80e-3;
  p.tx_gain = 16.0 / (fal * fal);
  p.rx_gain = std::pow(kPi * ad / p.wavelength_m, 2);
  p.tx_point_loss = std::exp(-p.tx_gain * 1e-12);
  p.rx_point_loss = std::exp(-p.rx_gain * 1e-12);
  return p;
}

double received_power(const LinkBudgetParams& p, double distance_km, double radial_v_kms) {
  if (!(distance_km > 0.0)) throw ArgumentError("received_power: distance must be positive");
  double lambda = p.wavelength_m * (1.0 + radial_v_kms / kSpeedOfLightKmS);
  double path = lambda / (4.0 * kPi * distance_km * 1e3);
  return p.tx_power_w * p.rx_opt_eff * p.tx_opt_eff * p.rx_gain * p.tx_gain * p.rx_point_loss *
         p.tx_point_loss * path * path;
}

double terminal_rate(const LinkBudgetParams& p, double distance_km, double radial_v_kms) {
  double snr = received_power(p, distance_km, radial_v_kms) / p.noise_power_w;
  return p.bandwidth_hz * std::log1p(snr) / std::log(2.0);
}

double threshold_distance_km(const LinkBudgetParams& p, double tol_km) {
  double lo = 1e-3, hi = 1.0;
  while (terminal_rate(p, hi, 0.0) >= p.min_rate_bps) {
    hi *= 2.0;
    if (hi > 1e9) throw ArgumentError("minimum rate reachable at any distance");
  }
  if (terminal_rate(p, lo, 0.0) < p.min_rate_bps) return 0.0;
  while (hi - lo > tol_km) {
    double mid = 0.5 * (lo + hi);
    (terminal_rate(p, mid, 0.0) >= p.min_rate_bps ? lo : hi) = mid;
  }
  return lo;
}

double link_rate_at(const ConstellationTimeline& tl, const LinkBudgetParams& p, int a, int b, int t) {
  double d = distance_at(tl, a, b, t);
  if (d <= 0.0) return 0.0;
  return terminal_rate(p, d, pair_velocity(tl, a, b, t));
}

Eigen::MatrixXd satellite_rate(const CBM& cbm, const RateTable& rates) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(cbm.n_sats, cbm.n_sats);
  for (const auto& l : cbm.links) {
    auto it = rates.find(l);
    if (it == rates.end())
      throw ConsistencyError("no rate for link " + std::to_string(l.from_sat) + ":" + std::to_string(l.from_term) +
                             " -> " + std::to_string(l.to_sat) + ":" + std::to_string(l.to_term));
    r(l.from_sat, l.to_sat) += it->second;
  }
  return r;
}

Diagnostics validate_cbm(const CBM& cbm, const RateTable& rates, double min_rate_bps) {
  Diagnostics out;
  auto name = [](const TerminalLink& l) {
    return std::to_string(l.from_sat) + ":" + std::to_string(l.from_term) + "->" + std::to_string(l.to_sat) + ":" +
           std::to_string(l.to_term);
  };
  std::map<std::pair<int, int>, int> terminal_use;
  std::map<std::pair<int, int>, int> pair_use;
  for (const auto& l : cbm.links) {
    bool in_range = l.from_sat >= 0 && l.from_sat < cbm.n_sats && l.to_sat >= 0 && l.to_sat < cbm.n_sats &&
                    l.from_term >= 0 && l.from_term < cbm.terminals_per_sat && l.to_term >= 0 &&
                    l.to_term < cbm.terminals_per_sat;
    if (!in_range) {
      out.push_back({"index", name(l)});
      continue;
    }
    if (l.from_sat == l.to_sat) out.push_back({"hollow", name(l)});
    terminal_use[{l.from_sat, l.from_term}]++;
    terminal_use[{l.to_sat, l.to_term}]++;
    pair_use[{std::min(l.from_sat, l.to_sat), std::max(l.from_sat, l.to_sat)}]++;
    auto it = rates.find(l);
    if (it == rates.end())
      out.push_back({"rate-missing", name(l)});
    else if (it->second < min_rate_bps)
      out.push_back({"min-rate", name(l) + " rate " + csv::num(it->second)});
  }
  for (const auto& [k, c] : terminal_use)
    if (c > 1)
      out.push_back({"terminal", "terminal " + std::to_string(k.first) + ":" + std::to_string(k.second) + " used " +
                                     std::to_string(c) + " times"});
  for (const auto& [k, c] : pair_use)
    if (c > 1 && k.first != k.second)
      out.push_back({"pair", "pair " + std::to_string(k.first) + "," + std::to_string(k.second) + " has " +
                                 std::to_string(c) + " links"});
  return out;
}

CandidateSet feasible_cbm_candidates(const ConstellationTimeline& tl, const LinkBudgetParams& p, int t,
                                     int max_links_per_sat, int terminals_per_sat) {
  if (t < 0 || t > tl.horizon()) throw RangeError("candidate time outside horizon");
  int n = tl.n_sats();
  int cap = std::min(max_links_per_sat, terminals_per_sat);
  struct Pair {
    int a, b;
    double rate;
  };
  std::vector<Pair> pairs;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      double r = link_rate_at(tl, p, a, b, t);
      if (r >= p.min_rate_bps) pairs.push_back({a, b, r});
    }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.rate > y.rate; });
  CandidateSet cs;
  cs.t = t;
  cs.terminals_per_sat = terminals_per_sat;
  cs.rate = Eigen::MatrixXd::Zero(n, n);
  std::vector<int> used(static_cast<size_t>(n), 0);
  for (const auto& pr : pairs) {
    if (used[pr.a] >= cap || used[pr.b] >= cap) continue;
    used[pr.a]++;
    used[pr.b]++;
    cs.rate(pr.a, pr.b) = pr.rate;
    cs.rate(pr.b, pr.a) = pr.rate;
  }
  return cs;
}

int sector_terminal(const ConstellationTimeline& tl, int a, int b, int t, int terminals_per_sat) {
  GeoPoint pa = tl.sample(a, t), pb = tl.sample(b, t);
  double dlon = pb.lon - pa.lon;
  double y = std::sin(dlon) * std::cos(pb.lat);
  double x = std::cos(pa.lat) * std::sin(pb.lat) - std::sin(pa.lat) * std::cos(pb.lat) * std::cos(dlon);
  double bearing = std::atan2(y, x);
  if (bearing < 0) bearing += 2.0 * kPi;
  int k = static_cast<int>(bearing / (2.0 * kPi / terminals_per_sat));
  return std::min(k, terminals_per_sat - 1);
}

double rf_rate(const RFParams& p, double slant_km) {
  if (!(slant_km > 0.0)) throw ArgumentError("rf_rate: distance must be positive");
  double lambda = 299792458.0 / p.freq_hz;
  double fspl = std::pow(lambda / (4.0 * kPi * slant_km * 1e3), 2);
  double snr = p.power_w * p.antenna_gain * fspl / p.noise_w;
  return p.bandwidth_hz * std::log1p(snr) / std::log(2.0);
}

double gateway_rate(const ConstellationTimeline& tl, const RFParams& p, const GroundGateway& g, int sat, int t) {
  double d = slant_range_km({g.lat, g.lon}, tl.sample(sat, t), tl.earth_radius_km, tl.altitude_km);
  if (d > g.rf_range_km) return 0.0;
  return rf_rate(p, d);
}

void write_rate_matrix_csv(const std::string& path, const Eigen::MatrixXd& rate) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "sat";
  for (int j = 0; j < rate.cols(); ++j) out << ',' << j;
  out << '\n';
  for (int i = 0; i < rate.rows(); ++i) {
    out << i;
    for (int j = 0; j < rate.cols(); ++j) out << ',' << csv::num(rate(i, j));
    out << '\n';
  }
}

}  // namespace fedspan
