#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fedspan/convergence.hpp"
#include "fedspan/resource.hpp"
#include "fedspan/simulate.hpp"

namespace fedspan {

struct OptimizerConfig {
  double alpha1 = 1.0, alpha2 = 1.0, alpha3 = 1.0;
  double p = 20.0;
  double eps = 1e-3;
  double e_hi = 10.0;
  double frac_min = 1e-3;
  double f_min = 1e6;
  std::vector<int> L_values;  // enumerated externally; empty selects {L}
};

struct BoundConfig {
  bool estimate = true;  // measure beta, theta, sigma and drift from the loss
  BoundParams params;
  double eta_cap_scale = 0.0;  // > 0: eta is this fraction of the step-size cap
};

struct Config {
  std::string name;
  std::string path;
  Scenario scenario;
  std::shared_ptr<const QuadraticFamily> quadratic;  // set for the quadratic family
  std::vector<BaselineKind> baselines;
  BaselineOptions baseline;
  std::vector<double> thresholds;  // fractions of the initial optimality gap
  OptimizerConfig optimizer;
  BoundConfig bound;
};

// INI-style file: `[section]` headers and `key = value` lines. Errors are
// ConfigError with the offending `section.key` in the message.
Config load_config(const std::string& path, std::optional<std::uint64_t> seed_override = std::nullopt);

}  // namespace fedspan
