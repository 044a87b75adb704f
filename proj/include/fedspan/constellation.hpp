#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace fedspan {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kAltitudeKm = 500.0;
inline constexpr double kEarthRotation = 7.2921159e-5;  // rad/s
inline constexpr double kSatSpeedKmS = 7.8;

struct GeoPoint {
  double lat = 0.0;  // rad
  double lon = 0.0;  // rad
};

struct GroundGateway {
  int id = 0;
  double lat = 0.0;
  double lon = 0.0;
  double rf_range_km = 2300.0;
};

// Wraps an angle into (-pi, pi].
inline double wrap_pi(double a) {
  a = std::remainder(a, 2.0 * kPi);
  return a <= -kPi ? a + 2.0 * kPi : a;
}

// Binary day/night harvest: p_solar while the sub-solar longitude is within
// +-pi/2 of the satellite longitude.
struct HarvestModel {
  double p_solar_w = 15.0;
  double sun_lon0 = 0.0;
  double sun_rate = -kEarthRotation;
  bool always_on = false;

  double at(double sat_lon, double t) const {
    if (always_on) return p_solar_w;
    double d = wrap_pi(sat_lon - (sun_lon0 + sun_rate * t));
    return std::abs(d) <= kPi / 2.0 ? p_solar_w : 0.0;
  }
};

// Positions sampled every second on [0, horizon]. Longitudes are stored
// unwrapped so interpolation never crosses the antimeridian the long way.
class ConstellationTimeline {
 public:
  ConstellationTimeline() = default;
  ConstellationTimeline(int n_sats, int horizon, double altitude_km = kAltitudeKm,
                        double earth_radius_km = kEarthRadiusKm);

  int n_sats() const { return static_cast<int>(lat_.cols()); }
  int horizon() const { return static_cast<int>(lat_.rows()) - 1; }
  double r_eff() const { return earth_radius_km + altitude_km; }

  GeoPoint sample(int sat, int t) const;
  void set_sample(int sat, int t, double lat, double lon_unwrapped);
  double lon_unwrapped(int sat, int t) const { return lon_(t, sat); }

  double altitude_km = kAltitudeKm;
  double earth_radius_km = kEarthRadiusKm;
  HarvestModel harvest;
  std::vector<GroundGateway> gateways;
  std::vector<int> plane;  // orbital plane per satellite, used by sink relays

 private:
  Eigen::MatrixXd lat_;  // (horizon+1) x N
  Eigen::MatrixXd lon_;
};

ConstellationTimeline load_timeline(const std::string& path, int horizon);
std::vector<GroundGateway> load_gateways(const std::string& path);

struct OrbitElement {
  double inclination = 0.0;
  double raan = 0.0;
  double phase = 0.0;  // argument of latitude at t = 0
  int plane = 0;
};

ConstellationTimeline circular_orbits(const std::vector<OrbitElement>& orbits, int horizon,
                                      double speed_km_s = kSatSpeedKmS,
                                      double altitude_km = kAltitudeKm,
                                      double earth_radius_km = kEarthRadiusKm);

// Walker-delta pattern: planes evenly spread over raan_span, phasing offset f.
ConstellationTimeline walker(int planes, int per_plane, double inclination, double raan_span,
                             int phasing, int horizon, double speed_km_s = kSatSpeedKmS,
                             double altitude_km = kAltitudeKm);

ConstellationTimeline static_constellation(const std::vector<GeoPoint>& points, int horizon,
                                           double altitude_km = kAltitudeKm);

// Quasi-uniform gateway placement (Fibonacci lattice).
std::vector<GroundGateway> uniform_gateways(int count, double rf_range_km);

GeoPoint position_at(const ConstellationTimeline& tl, int sat, double t);

template <class Scalar>
Scalar haversine_distance(const GeoPoint& a, const GeoPoint& b, Scalar r_eff) {
  using std::atan2, std::cos, std::sin, std::sqrt;
  Scalar sdlat = sin(Scalar(b.lat - a.lat) / 2);
  Scalar sdlon = sin(Scalar(b.lon - a.lon) / 2);
  Scalar h = sdlat * sdlat + cos(Scalar(a.lat)) * cos(Scalar(b.lat)) * sdlon * sdlon;
  h = std::min(std::max(h, Scalar(0)), Scalar(1));
  return 2 * r_eff * atan2(sqrt(h), sqrt(1 - h));
}

double distance_at(const ConstellationTimeline& tl, int a, int b, int t);

// Forward difference of the pair distance, km/s; positive when receding.
double radial_velocity(const ConstellationTimeline& tl, int a, int b, int t);

// Forward difference where possible, backward at the end of the horizon.
double pair_velocity(const ConstellationTimeline& tl, int a, int b, int t);

// Sum of harvest over integer seconds in [t0, t1).
double harvested_energy(const ConstellationTimeline& tl, int sat, int t0, int t1);

// Straight-line distance between a ground point and a satellite at altitude.
double slant_range_km(const GeoPoint& ground, const GeoPoint& sat, double earth_radius_km,
                      double altitude_km);

}  // namespace fedspan
