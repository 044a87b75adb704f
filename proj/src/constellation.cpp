#include "fedspan/constellation.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "fedspan/csv.hpp"
#include "fedspan/errors.hpp"

namespace fedspan {

namespace {

constexpr int kMaxGapS = 60;
constexpr double kDeg = kPi / 180.0;

double parse_number(const std::string& s, int line, const char* field) {
  try {
    size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line) + ": bad " + field + " '" + s + "'");
  }
}

void check_header(const csv::Table& t, const std::vector<std::string>& want) {
  if (t.header != want) {
    std::string w;
    for (const auto& h : want) w += (w.empty() ? "" : ",") + h;
    throw ParseError("line 1: expected header '" + w + "'");
  }
}

struct Row {
  double t, lat, lon;
  int line;
};

}  // namespace

ConstellationTimeline::ConstellationTimeline(int n_sats, int horizon, double altitude,
                                             double earth_radius)
    : altitude_km(altitude), earth_radius_km(earth_radius),
      plane(static_cast<size_t>(n_sats), 0),
      lat_(Eigen::MatrixXd::Zero(horizon + 1, n_sats)),
      lon_(Eigen::MatrixXd::Zero(horizon + 1, n_sats)) {
  if (n_sats < 0 || horizon < 0) throw ArgumentError("negative timeline size");
  if (altitude <= 0.0) throw ArgumentError("altitude_km must be positive");
}

GeoPoint ConstellationTimeline::sample(int sat, int t) const {
  if (sat < 0 || sat >= n_sats()) throw RangeError("satellite " + std::to_string(sat) + " out of range");
  if (t < 0 || t > horizon()) throw RangeError("t=" + std::to_string(t) + " outside horizon");
  return {lat_(t, sat), wrap_pi(lon_(t, sat))};
}

void ConstellationTimeline::set_sample(int sat, int t, double lat, double lon_unwrapped) {
  lat_(t, sat) = lat;
  lon_(t, sat) = lon_unwrapped;
}

ConstellationTimeline load_timeline(const std::string& path, int horizon) {
  if (horizon < 0) throw ArgumentError("horizon must be non-negative");
  csv::Table table = csv::read(path);
  check_header(table, {"t", "sat_id", "lat_deg", "lon_deg"});

  std::map<int, std::vector<Row>> per_sat;
  for (size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    int line = table.line[i];
    if (r.size() != 4) throw ParseError("line " + std::to_string(line) + ": expected 4 fields");
    double t = parse_number(r[0], line, "t");
    double id = parse_number(r[1], line, "sat_id");
    double lat = parse_number(r[2], line, "lat_deg");
    double lon = parse_number(r[3], line, "lon_deg");
    if (id < 0 || id != std::floor(id))
      throw ParseError("line " + std::to_string(line) + ": sat_id must be a non-negative integer");
    if (lat < -90.0 || lat > 90.0)
      throw ParseError("line " + std::to_string(line) + ": latitude out of range");
    if (lon < -180.0 || lon > 180.0)
      throw ParseError("line " + std::to_string(line) + ": longitude out of range");
    per_sat[static_cast<int>(id)].push_back({t, lat * kDeg, lon * kDeg, line});
  }
  if (per_sat.empty()) throw CoverageError("trajectory file has no samples");

  int n = per_sat.rbegin()->first + 1;
  ConstellationTimeline tl(n, horizon);
  for (int s = 0; s < n; ++s) {
    auto it = per_sat.find(s);
    if (it == per_sat.end()) throw CoverageError("satellite " + std::to_string(s) + " has no samples");
    auto& rows = it->second;
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
    for (size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].t == rows[i - 1].t)
        throw ParseError("line " + std::to_string(rows[i].line) + ": duplicate time for satellite " +
                         std::to_string(s));
    }
    if (rows.front().t > 0.0 || rows.back().t < horizon)
      throw CoverageError("satellite " + std::to_string(s) + " does not cover [0, " +
                          std::to_string(horizon) + "]");
    // Unwrap longitude along the row sequence.
    std::vector<double> lon(rows.size());
    lon[0] = rows[0].lon;
    for (size_t i = 1; i < rows.size(); ++i) lon[i] = lon[i - 1] + wrap_pi(rows[i].lon - rows[i - 1].lon);

    size_t j = 0;
    for (int t = 0; t <= horizon; ++t) {
      while (j + 1 < rows.size() && rows[j + 1].t < t) ++j;
      if (j + 1 < rows.size() && rows[j + 1].t == t) ++j;
      if (rows[j].t == t) {
        tl.set_sample(s, t, rows[j].lat, lon[j]);
        continue;
      }
      const Row& a = rows[j];
      const Row& b = rows[j + 1];
      if (b.t - a.t > kMaxGapS)
        throw CoverageError("satellite " + std::to_string(s) + ": gap of " + std::to_string(b.t - a.t) +
                            " s after t=" + std::to_string(a.t));
      double w = (t - a.t) / (b.t - a.t);
      tl.set_sample(s, t, a.lat + w * (b.lat - a.lat), lon[j] + w * (lon[j + 1] - lon[j]));
    }
  }
  return tl;
}

std::vector<GroundGateway> load_gateways(const std::string& path) {
  csv::Table table = csv::read(path);
  check_header(table, {"id", "lat_deg", "lon_deg", "rf_range_km"});
  std::vector<GroundGateway> out;
  for (size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    int line = table.line[i];
    if (r.size() != 4) throw ParseError("line " + std::to_string(line) + ": expected 4 fields");
    GroundGateway g;
    g.id = static_cast<int>(parse_number(r[0], line, "id"));
    g.lat = parse_number(r[1], line, "lat_deg") * kDeg;
    g.lon = parse_number(r[2], line, "lon_deg") * kDeg;
    g.rf_range_km = parse_number(r[3], line, "rf_range_km");
    if (g.rf_range_km <= 0.0) throw ParseError("line " + std::to_string(line) + ": rf_range_km must be positive");
    out.push_back(g);
  }
  return out;
}

ConstellationTimeline circular_orbits(const std::vector<OrbitElement>& orbits, int horizon,
                                      double speed_km_s, double altitude_km, double earth_radius_km) {
  ConstellationTimeline tl(static_cast<int>(orbits.size()), horizon, altitude_km, earth_radius_km);
  double rate = speed_km_s / (earth_radius_km + altitude_km);
  for (size_t s = 0; s < orbits.size(); ++s) {
    const auto& o = orbits[s];
    tl.plane[s] = o.plane;
    double prev = 0.0;
    for (int t = 0; t <= horizon; ++t) {
      double u = o.phase + rate * t;
      double x = std::cos(u) * std::cos(o.raan) - std::sin(u) * std::cos(o.inclination) * std::sin(o.raan);
      double y = std::cos(u) * std::sin(o.raan) + std::sin(u) * std::cos(o.inclination) * std::cos(o.raan);
      double z = std::sin(u) * std::sin(o.inclination);
      double lat = std::asin(std::clamp(z, -1.0, 1.0));
      double lon = wrap_pi(std::atan2(y, x) - kEarthRotation * t);
      if (t > 0) lon = prev + wrap_pi(lon - wrap_pi(prev));
      tl.set_sample(static_cast<int>(s), t, lat, lon);
      prev = lon;
    }
  }
  return tl;
}

ConstellationTimeline walker(int planes, int per_plane, double inclination, double raan_span,
                             int phasing, int horizon, double speed_km_s, double altitude_km) {
  if (planes <= 0 || per_plane <= 0) throw ArgumentError("walker needs positive plane counts");
  std::vector<OrbitElement> orbits;
  int total = planes * per_plane;
  for (int p = 0; p < planes; ++p) {
    for (int k = 0; k < per_plane; ++k) {
      OrbitElement o;
      o.inclination = inclination;
      o.raan = raan_span * p / planes;
      o.phase = 2.0 * kPi * k / per_plane + 2.0 * kPi * phasing * p / total;
      o.plane = p;
      orbits.push_back(o);
    }
  }
  return circular_orbits(orbits, horizon, speed_km_s, altitude_km);
}

ConstellationTimeline static_constellation(const std::vector<GeoPoint>& points, int horizon,
                                           double altitude_km) {
  ConstellationTimeline tl(static_cast<int>(points.size()), horizon, altitude_km);
  for (size_t s = 0; s < points.size(); ++s)
    for (int t = 0; t <= horizon; ++t) tl.set_sample(static_cast<int>(s), t, points[s].lat, points[s].lon);
  return tl;
}

std::vector<GroundGateway> uniform_gateways(int count, double rf_range_km) {
  std::vector<GroundGateway> out;
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    double z = 1.0 - (2.0 * i + 1.0) / count;
    GroundGateway g;
    g.id = i;
    g.lat = std::asin(z);
    g.lon = wrap_pi(golden * i);
    g.rf_range_km = rf_range_km;
    out.push_back(g);
  }
  return out;
}

GeoPoint position_at(const ConstellationTimeline& tl, int sat, double t) {
  if (sat < 0 || sat >= tl.n_sats()) throw RangeError("satellite " + std::to_string(sat) + " out of range");
  if (!(t >= 0.0 && t <= tl.horizon())) throw RangeError("t=" + std::to_string(t) + " outside horizon");
  int t0 = static_cast<int>(std::floor(t));
  if (t0 == t) return tl.sample(sat, t0);
  double w = t - t0;
  GeoPoint a = tl.sample(sat, t0);
  GeoPoint b = tl.sample(sat, t0 + 1);
  double la = tl.lon_unwrapped(sat, t0);
  double lb = tl.lon_unwrapped(sat, t0 + 1);
  return {a.lat + w * (b.lat - a.lat), wrap_pi(la + w * (lb - la))};
}

double distance_at(const ConstellationTimeline& tl, int a, int b, int t) {
  return haversine_distance(tl.sample(a, t), tl.sample(b, t), tl.r_eff());
}

double radial_velocity(const ConstellationTimeline& tl, int a, int b, int t) {
  if (t < 0 || t + 1 > tl.horizon()) throw RangeError("radial velocity needs t and t+1 within horizon");
  return distance_at(tl, a, b, t + 1) - distance_at(tl, a, b, t);
}

double pair_velocity(const ConstellationTimeline& tl, int a, int b, int t) {
  if (tl.horizon() == 0) return 0.0;
  if (t + 1 <= tl.horizon()) return radial_velocity(tl, a, b, t);
  return radial_velocity(tl, a, b, t - 1);
}

double harvested_energy(const ConstellationTimeline& tl, int sat, int t0, int t1) {
  if (t0 > t1) throw ArgumentError("harvested_energy: t0 > t1");
  if (t0 < 0 || t1 > tl.horizon() + 1) throw RangeError("harvest window outside horizon");
  double e = 0.0;
  for (int t = t0; t < t1; ++t) e += tl.harvest.at(tl.sample(sat, t).lon, t);
  return e;
}

double slant_range_km(const GeoPoint& ground, const GeoPoint& sat, double earth_radius_km,
                      double altitude_km) {
  double theta = haversine_distance(ground, sat, 1.0);
  double r = earth_radius_km + altitude_km;
  double d2 = earth_radius_km * earth_radius_km + r * r - 2.0 * earth_radius_km * r * std::cos(theta);
  return std::sqrt(std::max(d2, 0.0));
}

}  // namespace fedspan
