#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fedspan/config.hpp"
#include "fedspan/errors.hpp"
#include "fedspan/report.hpp"
#include "helpers.hpp"

using namespace fedspan;

namespace {

const std::string kDir = FEDSPAN_SCENARIO_DIR;

const char* kBase = R"([scenario]
seed = 3
[constellation]
kind = static
points = 0:0, 0:20, 0:40, 0:60
[learning]
family = quadratic
dim = 4
K = 2
L = 2
e = 2
frac = 1
eta = 0.05
)";

Config from_text(const std::string& name, const std::string& text) {
  return load_config(testing::write_temp(name, text));
}

void expect_error(const std::string& name, const std::string& text, const std::string& key) {
  std::string path = testing::write_temp(name, text);
  CHECK_THROWS_WITH_AS(load_config(path), doctest::Contains(key.c_str()), ConfigError);
}

}  // namespace

TEST_CASE("shipped scenarios load") {
  for (const char* f : {"minimal.ini", "dynamic.ini", "battery_stress.ini"}) {
    INFO(f);
    Config c = load_config(kDir + "/" + f);
    CHECK(c.scenario.timeline->n_sats() >= 4);
    CHECK(c.scenario.K > 0);
    CHECK_NOTHROW(validate_scenario(c.scenario));
  }
  Config dyn = load_config(kDir + "/dynamic.ini");
  CHECK(dyn.scenario.timeline->gateways.size() == 15);
  CHECK(dyn.scenario.timeline->gateways.front().rf_range_km == 2300.0);
  CHECK(dyn.baselines.size() == 4);
  CHECK(dyn.thresholds.size() == 3);
  CHECK(dyn.scenario.partition.n_clusters == 2);
  Config stress = load_config(kDir + "/battery_stress.ini");
  CHECK(stress.scenario.battery_policy == BatteryPolicy::Abort);
}

TEST_CASE("defaults") {
  Config c = from_text("base.ini", kBase);
  const Scenario& s = c.scenario;
  CHECK(s.model_bits == doctest::Approx(6.5e6 * 8));
  CHECK(s.terminals_per_sat == 4);
  CHECK(s.battery_cap_j == 500.0);
  CHECK(s.oracle->dataset_size(0) >= 875);
  CHECK(s.oracle->dataset_size(0) <= 1125);
  CHECK(s.tau_tti == doctest::Approx(s.caps.lt_max + s.caps.la_max + s.caps.ld_max));
  CHECK(c.scenario.seed == 3);
  CHECK(load_config(testing::write_temp("seed.ini", kBase), 99).scenario.seed == 99);
}

TEST_CASE("the same file and seed give the same scenario") {
  Config a = from_text("same.ini", kBase), b = from_text("same.ini", kBase);
  CHECK(a.scenario.oracle->data_sizes() == b.scenario.oracle->data_sizes());
  ModelVector w = ModelVector::Ones(4);
  CHECK(a.scenario.oracle->global_loss(w, 0) == b.scenario.oracle->global_loss(w, 0));
}

TEST_CASE("errors name the offending key") {
  const std::string base = kBase;
  expect_error("unknown_key.ini", base + "colour = blue\n", "learning.colour");
  expect_error("unknown_section.ini", base + "[extras]\nx = 1\n", "extras");
  expect_error("bad_number.ini", base + "[link]\nmodel_mb = lots\n", "link.model_mb");
  expect_error("tti.ini", base + "[schedule]\ntau_tti = 2\n", "schedule.tau_tti");
  expect_error("tau_loc.ini", base + "[schedule]\ntau_loc = 2\n", "schedule.tau_loc");
  expect_error("frac.ini", std::string(kBase).replace(std::string(kBase).find("frac = 1"), 8, "frac = 2"),
               "learning.frac");
  expect_error("assignment.ini", base + "[partition]\nkind = explicit\nassignment = 0, 0, 1\n",
               "partition.assignment");
  expect_error("eta_scale.ini", base + "eta_policy = cap\neta_scale = 1.5\n", "learning.eta_scale");
  expect_error("policy.ini", base + "[battery]\npolicy = pray\n", "battery.policy");
  expect_error("sink.ini", base + "[baselines]\nkinds = sink_sync\n", "gateways.kind");
  expect_error("kinds.ini", base + "[gateways]\nkind = uniform\ncount = 3\n[baselines]\nkinds = gossip\n",
               "baselines.kinds");
}

TEST_CASE("a missing file is a config error") {
  CHECK_THROWS_AS(load_config(kDir + "/does_not_exist.ini"), ConfigError);
}

TEST_CASE("the cap step size is calibrated against its own run") {
  Config fixed = from_text("fixed.ini", kBase);
  CHECK(calibrate_step(fixed) == 0);

  std::string text = kBase;
  text.replace(text.find("eta = 0.05"), 10, "eta_policy = cap\neta_scale = 0.9");
  text += "[partition]\nkind = explicit\nassignment = 0, 0, 1, 1\n";
  Config cfg = from_text("cap.ini", text);
  CHECK(calibrate_step(cfg) >= 1);
  std::vector<ModelVector> probes;
  RunTrace t = run_with_probes(cfg.scenario, probes);
  BoundReport b = evaluate_bound(cfg, t, probes);
  CHECK(b.cap_ok);
  CHECK(cfg.scenario.eta <= b.cap);
}
