#include "fedspan/config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "fedspan/csv.hpp"
#include "fedspan/errors.hpp"

namespace fedspan {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>> kKeys = {
    {"scenario", {"name", "seed"}},
    {"constellation",
     {"kind", "planes", "per_plane", "inclination_deg", "raan_span_deg", "phasing", "points", "path", "horizon",
      "speed_km_s", "p_solar_w", "harvest_always_on"}},
    {"gateways", {"kind", "count", "rf_range_km", "path"}},
    {"link", {"noise_power_w", "min_rate_bps", "tx_power_w", "terminals", "max_links", "model_mb"}},
    {"partition", {"kind", "clusters", "assignment", "geo_weight", "data_weight"}},
    {"learning",
     {"family", "dim", "data_mean", "data_spread", "heterogeneity", "sample_spread", "drift", "separation", "skew",
      "path", "K", "L", "e", "frac", "cpu_freq", "eta", "eta_policy", "eta_scale"}},
    {"schedule", {"tau_tti", "tau_loc", "gd_max", "lt_max", "la_max", "ld_max", "ga_max", "policy", "t0"}},
    {"battery", {"init_j", "cap_j", "policy"}},
    {"spanning", {"alpha2", "alpha3"}},
    {"bound", {"estimate", "beta", "theta", "lambda_max", "zeta_loc_hat", "zeta_glob1", "zeta_glob2", "chi"}},
    {"optimizer", {"alpha1", "alpha2", "alpha3", "p", "eps", "e_hi", "frac_min", "f_min", "L_values"}},
    {"baselines", {"kinds", "buffer", "poll_s", "hold_back_s", "sink", "max_aggregations", "thresholds"}},
};

class Reader {
 public:
  explicit Reader(const pt::ptree& t) : t_(t) {}

  template <class T>
  T get(const std::string& key, T def) const {
    auto v = t_.get_optional<std::string>(key);
    if (!v) return def;
    return parse<T>(key, *v);
  }

  template <class T>
  T need(const std::string& key) const {
    auto v = t_.get_optional<std::string>(key);
    if (!v) throw ConfigError(key + ": required field is missing");
    return parse<T>(key, *v);
  }

  bool has(const std::string& key) const { return static_cast<bool>(t_.get_optional<std::string>(key)); }

  template <class T>
  std::vector<T> list(const std::string& key) const {
    std::vector<T> out;
    auto v = t_.get_optional<std::string>(key);
    if (!v) return out;
    std::string s = *v;
    std::replace(s.begin(), s.end(), ';', ',');
    for (const auto& item : csv::split(s))
      if (!csv::trim(item).empty()) out.push_back(parse<T>(key, csv::trim(item)));
    return out;
  }

  template <class T>
  static T parse(const std::string& key, const std::string& raw) {
    std::string s = csv::trim(raw);
    if constexpr (std::is_same_v<T, std::string>) {
      return s;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (s == "true" || s == "1" || s == "yes") return true;
      if (s == "false" || s == "0" || s == "no") return false;
      throw ConfigError(key + ": expected a boolean, got '" + s + "'");
    } else {
      std::istringstream in(s);
      T v{};
      in >> v;
      if (in.fail() || !in.eof()) throw ConfigError(key + ": cannot parse '" + s + "'");
      return v;
    }
  }

 private:
  const pt::ptree& t_;
};

void check_keys(const pt::ptree& t) {
  for (const auto& [sec, body] : t) {
    auto it = kKeys.find(sec);
    if (it == kKeys.end()) throw ConfigError(sec + ": unknown section");
    for (const auto& [key, _] : body)
      if (!it->second.count(key)) throw ConfigError(sec + "." + key + ": unknown key");
  }
}

void positive(double v, const std::string& key) {
  if (!(v > 0) || !std::isfinite(v)) throw ConfigError(key + ": must be positive");
}

std::vector<GeoPoint> parse_points(const Reader& r) {
  std::vector<GeoPoint> pts;
  for (const auto& item : r.list<std::string>("constellation.points")) {
    auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("constellation.points: expected lat:lon pairs");
    double lat = Reader::parse<double>("constellation.points", item.substr(0, colon));
    double lon = Reader::parse<double>("constellation.points", item.substr(colon + 1));
    pts.push_back({lat * kPi / 180.0, lon * kPi / 180.0});
  }
  if (pts.empty()) throw ConfigError("constellation.points: no satellites listed");
  return pts;
}

std::string resolve(const std::string& base_dir, const std::string& p) {
  std::filesystem::path q(p);
  return q.is_absolute() ? p : (std::filesystem::path(base_dir) / q).string();
}

template <class Vec, class T>
Vec per_item(const std::vector<T>& vals, int n, const std::string& key) {
  Vec out(n);
  if (vals.size() == 1)
    out.setConstant(vals.front());
  else if (static_cast<int>(vals.size()) == n)
    for (int i = 0; i < n; ++i) out(i) = vals[i];
  else
    throw ConfigError(key + ": expected 1 or " + std::to_string(n) + " values, got " + std::to_string(vals.size()));
  return out;
}

}  // namespace

Config load_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  check_keys(tree);
  Reader r(tree);
  const std::string dir = std::filesystem::path(path).parent_path().string();

  Config cfg;
  cfg.path = path;
  cfg.name = r.get<std::string>("scenario.name", std::filesystem::path(path).stem().string());
  Scenario& s = cfg.scenario;
  s.seed = seed_override ? *seed_override : r.get<std::uint64_t>("scenario.seed", 1);

  // schedule first: the horizon default depends on it
  s.caps.gd_max = r.get("schedule.gd_max", 1.0);
  s.caps.lt_max = r.get("schedule.lt_max", 1.0);
  s.caps.la_max = r.get("schedule.la_max", 1.0);
  s.caps.ld_max = r.get("schedule.ld_max", 1.0);
  s.caps.ga_max = r.get("schedule.ga_max", 1.0);
  for (auto [k, v] : {std::pair{"schedule.gd_max", s.caps.gd_max}, {"schedule.lt_max", s.caps.lt_max},
                      {"schedule.la_max", s.caps.la_max}, {"schedule.ld_max", s.caps.ld_max},
                      {"schedule.ga_max", s.caps.ga_max}})
    positive(v, k);
  s.tau_tti = r.get("schedule.tau_tti", s.caps.lt_max + s.caps.la_max + s.caps.ld_max);
  positive(s.tau_tti, "schedule.tau_tti");
  s.tau_loc = r.get("schedule.tau_loc", 0.0);
  s.t0 = r.get("schedule.t0", 0.0);
  const std::string pol = r.get<std::string>("schedule.policy", "even");
  if (pol == "even")
    s.policy = SchedulePolicy::EvenSpread;
  else if (pol == "earliest")
    s.policy = SchedulePolicy::Earliest;
  else
    throw ConfigError("schedule.policy: expected even or earliest");

  s.K = r.get("learning.K", 10);
  s.L = r.get("learning.L", 1);
  if (s.K < 0) throw ConfigError("learning.K: must be non-negative");
  if (s.L < 1) throw ConfigError("learning.L: must be >= 1");
  if (s.L > 1 && s.tau_tti < s.caps.lt_max + s.caps.la_max + s.caps.ld_max)
    throw ConfigError("schedule.tau_tti: TTI capacity rule violated, tau_tti must be >= lt_max + la_max + ld_max");
  const double tau_loc = s.tau_loc > 0 ? s.tau_loc : default_tau_loc(s.L, s.tau_tti);
  const int X = static_cast<int>(std::floor(tau_loc / s.tau_tti + 1e-12));
  if (s.L - 1 > X)
    throw ConfigError("schedule.tau_loc: L-1 = " + std::to_string(s.L - 1) + " local rounds exceed the " +
                      std::to_string(X) + " TTIs of the local window");
  const double round_s = s.caps.gd_max + tau_loc + s.caps.ga_max;

  // constellation
  const int horizon = r.get("constellation.horizon", static_cast<int>(std::ceil(s.t0 + s.K * round_s)) + 1);
  const std::string kind = r.get<std::string>("constellation.kind", "static");
  std::shared_ptr<ConstellationTimeline> tl;
  try {
    if (kind == "walker") {
      tl = std::make_shared<ConstellationTimeline>(
          walker(r.need<int>("constellation.planes"), r.need<int>("constellation.per_plane"),
                 r.get("constellation.inclination_deg", 53.0) * kPi / 180.0,
                 r.get("constellation.raan_span_deg", 30.0) * kPi / 180.0, r.get("constellation.phasing", 0), horizon,
                 r.get("constellation.speed_km_s", kSatSpeedKmS)));
    } else if (kind == "static") {
      tl = std::make_shared<ConstellationTimeline>(static_constellation(parse_points(r), horizon));
    } else if (kind == "csv") {
      tl = std::make_shared<ConstellationTimeline>(
          load_timeline(resolve(dir, r.need<std::string>("constellation.path")), horizon));
    } else {
      throw ConfigError("constellation.kind: expected walker, static or csv");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("constellation: ") + e.what());
  }
  tl->harvest.p_solar_w = r.get("constellation.p_solar_w", 15.0);
  tl->harvest.always_on = r.get("constellation.harvest_always_on", false);
  const int N = tl->n_sats();

  const std::string gk = r.get<std::string>("gateways.kind", "none");
  const double rf_range = r.get("gateways.rf_range_km", 2300.0);
  if (gk == "uniform")
    tl->gateways = uniform_gateways(r.need<int>("gateways.count"), rf_range);
  else if (gk == "csv")
    tl->gateways = load_gateways(resolve(dir, r.need<std::string>("gateways.path")));
  else if (gk != "none")
    throw ConfigError("gateways.kind: expected none, uniform or csv");
  s.timeline = tl;

  // link
  s.link = LinkBudgetParams::reference();
  s.link.noise_power_w = r.get("link.noise_power_w", s.link.noise_power_w);
  s.link.min_rate_bps = r.get("link.min_rate_bps", s.link.min_rate_bps);
  s.link.tx_power_w = r.get("link.tx_power_w", s.link.tx_power_w);
  s.model_bits = r.get("link.model_mb", 6.5) * 8e6;
  s.link.model_bits = s.model_bits;
  s.terminals_per_sat = r.get("link.terminals", 4);
  s.max_links_per_sat = r.get("link.max_links", s.terminals_per_sat);
  positive(s.model_bits, "link.model_mb");
  if (s.terminals_per_sat < 1) throw ConfigError("link.terminals: must be >= 1");

  // learning data
  const std::string fam = r.get<std::string>("learning.family", "quadratic");
  const int dim = r.get("learning.dim", 10);
  const int d_mean = r.get("learning.data_mean", 1000);
  const int d_spread = r.get("learning.data_spread", 125);
  if (d_mean - d_spread < 1) throw ConfigError("learning.data_spread: dataset sizes must stay >= 1");
  std::vector<int> sizes(N);
  {
    Rng rng = substream(s.seed, "sizes");
    std::uniform_int_distribution<int> u(d_mean - d_spread, d_mean + d_spread);
    for (int n = 0; n < N; ++n) sizes[n] = u(rng);
  }
  if (fam == "quadratic") {
    if (dim < 1) throw ConfigError("learning.dim: must be >= 1");
    const double het = r.get("learning.heterogeneity", 1.0);
    Rng rng = substream(s.seed, "centers");
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd centers(dim, N);
    for (int n = 0; n < N; ++n)
      for (int m = 0; m < dim; ++m) centers(m, n) = het * g(rng);
    auto q = std::make_shared<QuadraticFamily>(centers, sizes, r.get("learning.sample_spread", 1.0),
                                               r.get("learning.drift", 0.0), s.seed);
    cfg.quadratic = q;
    s.oracle = q;
  } else if (fam == "logistic") {
    s.oracle = std::shared_ptr<const LossOracle>(LogisticFamily::gaussian(
        N, dim, sizes, r.get("learning.separation", 2.0), r.get("learning.skew", 0.6), s.seed));
  } else if (fam == "tabular") {
    try {
      s.oracle = std::shared_ptr<const LossOracle>(
          LogisticFamily::from_csv(resolve(dir, r.need<std::string>("learning.path")), N));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(std::string("learning.path: ") + e.what());
    }
  } else {
    throw ConfigError("learning.family: expected quadratic, logistic or tabular");
  }
  s.w0 = ModelVector::Zero(s.oracle->dim());

  // partition
  const std::string pk = r.get<std::string>("partition.kind", "single");
  if (pk == "single") {
    s.partition = VCPartition::single(N);
  } else if (pk == "explicit") {
    auto a = r.list<int>("partition.assignment");
    if (static_cast<int>(a.size()) != N)
      throw ConfigError("partition.assignment: expected " + std::to_string(N) + " entries");
    s.partition.assignment = a;
    s.partition.n_clusters = *std::max_element(a.begin(), a.end()) + 1;
    Diagnostics d = validate_partition(s.partition, N);
    if (!d.empty()) throw ConfigError("partition.assignment: " + d.front().rule + ": " + d.front().detail);
  } else if (pk == "heuristic") {
    ClusterData cd;
    cd.data_sizes = s.oracle->data_sizes();
    cd.geo_weight = r.get("partition.geo_weight", 1.0);
    cd.data_weight = r.get("partition.data_weight", 0.0);
    try {
      s.partition = cluster_heuristic(*tl, static_cast<int>(std::floor(s.t0)), cd, r.need<int>("partition.clusters"));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(std::string("partition.clusters: ") + e.what());
    }
  } else {
    throw ConfigError("partition.kind: expected single, explicit or heuristic");
  }
  const int C = s.partition.n_clusters;

  s.e_c = per_item<Eigen::VectorXi>(r.list<int>("learning.e").empty() ? std::vector<int>{1} : r.list<int>("learning.e"),
                                    C, "learning.e");
  if ((s.e_c.array() < 0).any()) throw ConfigError("learning.e: must be non-negative");
  s.frac = per_item<Eigen::VectorXd>(
      r.list<double>("learning.frac").empty() ? std::vector<double>{1.0} : r.list<double>("learning.frac"), N,
      "learning.frac");
  if ((s.frac.array() <= 0).any() || (s.frac.array() > 1).any()) throw ConfigError("learning.frac: must lie in (0, 1]");
  s.cpu_freq = per_item<Eigen::VectorXd>(r.list<double>("learning.cpu_freq").empty()
                                             ? std::vector<double>{s.compute.f_max}
                                             : r.list<double>("learning.cpu_freq"),
                                         N, "learning.cpu_freq");
  if ((s.cpu_freq.array() <= 0).any() || (s.cpu_freq.array() > s.compute.f_max).any())
    throw ConfigError("learning.cpu_freq: must lie in (0, f_max]");

  // bound parameters (also used by the cap step-size policy)
  BoundParams& bp = cfg.bound.params;
  cfg.bound.estimate = r.get("bound.estimate", true);
  bp.beta = r.get("bound.beta", 10.0);
  bp.theta = r.get("bound.theta", 3.0);
  bp.lambda_max = r.get("bound.lambda_max", 0.9);
  bp.zeta_loc_hat = r.get("bound.zeta_loc_hat", 1.0);
  bp.zeta_glob1 = r.get("bound.zeta_glob1", 1.0);
  bp.zeta_glob2 = r.get("bound.zeta_glob2", 0.0);
  bp.chi = r.get("bound.chi", 0.0);
  try {
    check_params(bp);
  } catch (const Error& e) {
    throw ConfigError(std::string("bound: ") + e.what());
  }

  const std::string ep = r.get<std::string>("learning.eta_policy", "fixed");
  if (ep == "fixed") {
    s.eta = r.get("learning.eta", 0.05);
  } else if (ep == "cap") {
    double b = bp.beta;
    if (cfg.quadratic) b = 1.0;  // unit Hessian
    BoundParams q = bp;
    q.beta = b;
    cfg.bound.eta_cap_scale = r.get("learning.eta_scale", 0.9);
    if (!(cfg.bound.eta_cap_scale > 0.0 && cfg.bound.eta_cap_scale <= 1.0))
      throw ConfigError("learning.eta_scale: expected a value in (0, 1]");
    s.eta = cfg.bound.eta_cap_scale *
            step_size_cap(q, s.L, s.e_c.maxCoeff(), bp.lambda_max, s.partition, s.oracle->data_sizes(), s.e_c);
  } else {
    throw ConfigError("learning.eta_policy: expected fixed or cap");
  }
  positive(s.eta, "learning.eta");

  // battery and spanning weights
  s.battery_cap_j = r.get("battery.cap_j", 500.0);
  s.battery_init_j = r.get("battery.init_j", s.battery_cap_j);
  if (s.battery_init_j < 0 || s.battery_init_j > s.battery_cap_j)
    throw ConfigError("battery.init_j: must lie in [0, cap_j]");
  const std::string bpol = r.get<std::string>("battery.policy", "skip");
  if (bpol == "skip")
    s.battery_policy = BatteryPolicy::Skip;
  else if (bpol == "abort")
    s.battery_policy = BatteryPolicy::Abort;
  else
    throw ConfigError("battery.policy: expected skip or abort");
  s.alpha2 = r.get("spanning.alpha2", 1.0);
  s.alpha3 = r.get("spanning.alpha3", 1.0);

  // optimizer
  OptimizerConfig& oc = cfg.optimizer;
  oc.alpha1 = r.get("optimizer.alpha1", 1.0);
  oc.alpha2 = r.get("optimizer.alpha2", 1.0);
  oc.alpha3 = r.get("optimizer.alpha3", 1.0);
  oc.p = r.get("optimizer.p", 20.0);
  oc.eps = r.get("optimizer.eps", 1e-3);
  oc.e_hi = r.get("optimizer.e_hi", 10.0);
  oc.frac_min = r.get("optimizer.frac_min", 1e-3);
  oc.f_min = r.get("optimizer.f_min", 1e6);
  oc.L_values = r.list<int>("optimizer.L_values");
  if (oc.p < 1) throw ConfigError("optimizer.p: must be >= 1");

  // baselines
  for (const auto& k : r.list<std::string>("baselines.kinds")) {
    try {
      cfg.baselines.push_back(baseline_from_string(k));
    } catch (const Error&) {
      throw ConfigError("baselines.kinds: unknown kind '" + k + "'");
    }
  }
  cfg.baseline.buffer = r.get("baselines.buffer", 4);
  cfg.baseline.poll_s = r.get("baselines.poll_s", 10.0);
  cfg.baseline.hold_back_s = r.get("baselines.hold_back_s", 10.0);
  cfg.baseline.sink = r.get("baselines.sink", 0);
  cfg.baseline.max_aggregations = r.get("baselines.max_aggregations", 0);
  cfg.thresholds = r.list<double>("baselines.thresholds");
  if (cfg.thresholds.empty()) cfg.thresholds = {0.5, 0.25, 0.1};
  for (double f : cfg.thresholds)
    if (!(f > 0 && f < 1)) throw ConfigError("baselines.thresholds: fractions must lie in (0, 1)");
  if (!cfg.baselines.empty() && tl->gateways.empty())
    throw ConfigError("gateways.kind: baselines need ground gateways");
  if (cfg.baseline.sink < 0 || cfg.baseline.sink >= N) throw ConfigError("baselines.sink: not a satellite index");

  try {
    validate_scenario(s);
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

}  // namespace fedspan
