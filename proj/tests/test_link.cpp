#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "fedspan/errors.hpp"
#include "fedspan/link.hpp"

using namespace fedspan;

TEST_CASE("received power") {
  LinkBudgetParams p = LinkBudgetParams::reference();
  LinkBudgetParams off = p;
  off.tx_power_w = 0.0;
  CHECK(received_power(off, 1000.0, 0.0) == 0.0);
  CHECK(received_power(p, 2000.0, 0.0) == doctest::Approx(received_power(p, 1000.0, 0.0) / 4.0).epsilon(1e-14));
  CHECK_THROWS_AS(received_power(p, 0.0, 0.0), ArgumentError);

  // independent evaluation of the optical budget at 1000 km
  const double lambda = 1550e-9, fal = 15e-6, ad = 80e-3;
  const double gt = 16.0 / (fal * fal);
  const double gr = std::pow(M_PI * ad / lambda, 2);
  const double expected = 1.0 * 0.8 * 0.8 * gr * gt * std::exp(-gr * 1e-12) * std::exp(-gt * 1e-12) *
                          std::pow(lambda / (4.0 * M_PI * 1.0e6), 2);
  CHECK(received_power(p, 1000.0, 0.0) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("doppler factor on received power") {
  LinkBudgetParams p = LinkBudgetParams::reference();
  const double v = 7.0, c = 299792.458;
  CHECK(received_power(p, 800.0, v) / received_power(p, 800.0, 0.0) ==
        doctest::Approx((1 + v / c) * (1 + v / c)).epsilon(1e-13));
}

TEST_CASE("terminal rate") {
  LinkBudgetParams p = LinkBudgetParams::reference();
  LinkBudgetParams off = p;
  off.tx_power_w = 0.0;
  CHECK(terminal_rate(off, 1000.0, 0.0) == 0.0);

  // choose noise so that SNR is exactly one at 1000 km
  LinkBudgetParams unit = p;
  unit.noise_power_w = received_power(p, 1000.0, 0.0);
  CHECK(terminal_rate(unit, 1000.0, 0.0) == doctest::Approx(2.2e9).epsilon(1e-12));

  CHECK(terminal_rate(p, 500.0, 0.0) > terminal_rate(p, 1000.0, 0.0));
  CHECK(terminal_rate(p, 1000.0, 0.0) > terminal_rate(p, 2000.0, 0.0));
}

TEST_CASE("minimum-rate threshold near the laser range") {
  LinkBudgetParams p = LinkBudgetParams::reference();
  double d = threshold_distance_km(p);
  CHECK(terminal_rate(p, d * (1 - 1e-9), 0.0) >= p.min_rate_bps);
  CHECK(terminal_rate(p, d * (1 + 1e-9), 0.0) < p.min_rate_bps);
  CHECK(d > 4000.0);
  CHECK(d < 6000.0);
}

TEST_CASE("satellite rate matrix") {
  CBM empty{3, 4, 0.0, {}};
  CHECK(satellite_rate(empty, {}).isZero());

  CBM one{3, 4, 0.0, {{0, 1, 2, 3}}};
  RateTable rt{{{0, 1, 2, 3}, 10e9}};
  Eigen::MatrixXd r = satellite_rate(one, rt);
  CHECK(r(0, 2) == 10e9);
  CHECK(r(2, 0) == 0.0);
  CHECK(r.sum() == 10e9);
}

TEST_CASE("satellite rate entries hold at most one terminal rate") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 4), m = 2;
    CBM cbm{n, m, 0.0, {}};
    RateTable rt;
    std::vector<int> used(n * m, 0);
    std::vector<std::vector<int>> pair(n, std::vector<int>(n, 0));
    for (int tries = 0; tries < 10; ++tries) {
      int a = rng() % n, b = rng() % n, ta = rng() % m, tb = rng() % m;
      if (a == b || used[a * m + ta] || used[b * m + tb] || pair[a][b] || pair[b][a]) continue;
      used[a * m + ta] = used[b * m + tb] = 1;
      pair[a][b] = 1;
      TerminalLink l{a, ta, b, tb};
      cbm.links.push_back(l);
      rt[l] = 7e9 + static_cast<double>(rng() % 1000) * 1e6;
    }
    REQUIRE(validate_cbm(cbm, rt, 7e9).empty());
    Eigen::MatrixXd r = satellite_rate(cbm, rt);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        double expect = 0.0;
        int hits = 0;
        for (const auto& [l, v] : rt)
          if (l.from_sat == a && l.to_sat == b) {
            expect = v;
            ++hits;
          }
        CHECK(hits <= 1);
        CHECK(r(a, b) == expect);
      }
  }
}

TEST_CASE("validate_cbm reports each rule") {
  auto has = [](const Diagnostics& d, const std::string& rule) {
    for (const auto& v : d)
      if (v.rule == rule) return true;
    return false;
  };
  CBM self{3, 4, 0.0, {{1, 0, 1, 1}}};
  CHECK(has(validate_cbm(self, {{{1, 0, 1, 1}, 8e9}}, 7e9), "hollow"));

  CBM shared{3, 4, 0.0, {{2, 0, 0, 1}, {1, 1, 2, 0}}};
  CHECK(has(validate_cbm(shared, {{{2, 0, 0, 1}, 8e9}, {{1, 1, 2, 0}, 8e9}}, 7e9), "terminal"));

  CBM slow{3, 4, 0.0, {{0, 0, 1, 0}}};
  CHECK(has(validate_cbm(slow, {{{0, 0, 1, 0}, 5e9}}, 7e9), "min-rate"));

  CBM twice{3, 4, 0.0, {{0, 0, 1, 0}, {1, 1, 0, 1}}};
  CHECK(has(validate_cbm(twice, {{{0, 0, 1, 0}, 8e9}, {{1, 1, 0, 1}, 8e9}}, 7e9), "pair"));
}

TEST_CASE("feasible link candidates") {
  LinkBudgetParams p = LinkBudgetParams::reference();
  ConstellationTimeline far = static_constellation({{0, 0}, {0, 1.5}, {0, -1.5}}, 2);
  CHECK(feasible_cbm_candidates(far, p, 0, 4).rate.isZero());

  // 100 km apart along the altitude shell
  const double r_eff = 6371.0 + 500.0;
  ConstellationTimeline close = static_constellation({{0, 0}, {0, 100.0 / r_eff}}, 2);
  CandidateSet cs = feasible_cbm_candidates(close, p, 0, 4);
  CHECK(cs.rate(0, 1) > 7e9);
  CHECK(cs.rate(1, 0) > 7e9);

  // satellite 0 with three neighbors at increasing distance
  ConstellationTimeline star = static_constellation({{0, 0}, {0, 0.005}, {0, -0.010}, {0.015, 0}}, 2);
  CandidateSet top1 = feasible_cbm_candidates(star, p, 0, 1);
  CHECK(top1.rate(0, 1) > 0.0);
  CHECK(top1.rate(0, 2) == 0.0);
  CHECK(top1.rate(0, 3) == 0.0);
}

TEST_CASE("RF gateway rate is gated by range") {
  RFParams rf;
  CHECK(rf_rate(rf, 600.0) > rf_rate(rf, 1200.0));
  ConstellationTimeline tl = static_constellation({{0, 0}, {0, 1.0}}, 2);
  GroundGateway g{0, 0.0, 0.0, 2300.0};
  CHECK(gateway_rate(tl, rf, g, 0, 0) > 0.0);
  CHECK(gateway_rate(tl, rf, g, 1, 0) == 0.0);
}
