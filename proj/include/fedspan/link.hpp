#pragma once

#include <compare>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fedspan/constellation.hpp"

namespace fedspan {

inline constexpr double kSpeedOfLightKmS = 299792.458;

struct LinkBudgetParams {
  double tx_power_w = 1.0;
  double rx_opt_eff = 0.8;
  double tx_opt_eff = 0.8;
  double rx_gain = 0.0;
  double tx_gain = 0.0;
  double rx_point_loss = 1.0;
  double tx_point_loss = 1.0;
  double wavelength_m = 1550e-9;
  double bandwidth_hz = 2.2e9;
  double noise_power_w = 8e-8;
  double min_rate_bps = 7e9;
  double model_bits = 6.5e6 * 8.0;

  // Optical terminal parameters of the reference setup: FAL = 15 um,
  // AD = 80 mm, pointing losses exp(-G * 1e-12).
  static LinkBudgetParams reference();
};

double received_power(const LinkBudgetParams& p, double distance_km, double radial_v_kms);
double terminal_rate(const LinkBudgetParams& p, double distance_km, double radial_v_kms);

// Distance at which terminal_rate (v_r = 0) equals min_rate_bps, by bisection.
double threshold_distance_km(const LinkBudgetParams& p, double tol_km = 1e-6);

double link_rate_at(const ConstellationTimeline& tl, const LinkBudgetParams& p, int a, int b, int t);

struct TerminalLink {
  int from_sat = 0;
  int from_term = 0;
  int to_sat = 0;
  int to_term = 0;
  auto operator<=>(const TerminalLink&) const = default;
};

struct CBM {
  int n_sats = 0;
  int terminals_per_sat = 4;
  double t = 0.0;
  std::vector<TerminalLink> links;
};

using RateTable = std::map<TerminalLink, double>;

struct Violation {
  std::string rule;
  std::string detail;
};
using Diagnostics = std::vector<Violation>;

Eigen::MatrixXd satellite_rate(const CBM& cbm, const RateTable& rates);

// Reports hollow, terminal, pair and min-rate violations; empty means valid.
Diagnostics validate_cbm(const CBM& cbm, const RateTable& rates, double min_rate_bps);

// Satellite-level candidate edges: rate(n, n') > 0 iff the pair is a candidate.
// Rates are symmetric because distance and its rate of change are.
struct CandidateSet {
  double t = 0.0;
  int terminals_per_sat = 4;
  Eigen::MatrixXd rate;
  int n_sats() const { return static_cast<int>(rate.rows()); }
};

CandidateSet feasible_cbm_candidates(const ConstellationTimeline& tl, const LinkBudgetParams& p, int t,
                                     int max_links_per_sat, int terminals_per_sat = 4);

// Terminal index serving the bearing from a to b when terminals cover equal
// azimuth sectors.
int sector_terminal(const ConstellationTimeline& tl, int a, int b, int t, int terminals_per_sat);

struct RFParams {
  double freq_hz = 2e9;
  double power_w = 10.0;
  double bandwidth_hz = 20e6;
  double antenna_gain = 1e5;  // combined satellite and ground gain
  double noise_w = 1.380649e-23 * 290.0 * 20e6;
};

double rf_rate(const RFParams& p, double slant_km);

// Rate between a gateway and a satellite, zero beyond the gateway's reach.
double gateway_rate(const ConstellationTimeline& tl, const RFParams& p, const GroundGateway& g, int sat, int t);

void write_rate_matrix_csv(const std::string& path, const Eigen::MatrixXd& rate);

}  // namespace fedspan
