#include <random>

#include "cadenet/wem.hpp"
#include "doctest.h"

using namespace cadenet;
using cadenet::imaging::LabStats;

namespace {

LabStats stats(double mu_l, double sigma_l, double mu_s, double rho_e, double r_v) {
  LabStats s;
  s.mu_l = mu_l;
  s.sigma_l = sigma_l;
  s.mu_s = mu_s;
  s.rho_e = rho_e;
  s.r_v = r_v;
  return s;
}

}  // namespace

TEST_SUITE("wem") {
  TEST_CASE("fog rule fires with the paper's severity example") {
    // sigma_L=30, rho_e=0.05, others neutral
    auto est = wem::classify(stats(120, 30, 120, 0.05, 1.0));
    CHECK(est.condition == Condition::Fog);
    CHECK(est.severity == doctest::Approx(1.0 - 30.0 / 35.0));
    CHECK(est.source == wem::EstimateSource::Heuristic);
  }

  TEST_CASE("no rule firing yields clear with severity 0") {
    auto est = wem::classify(stats(120, 200, 120, 0.4, 1.0));
    CHECK(est.condition == Condition::Clear);
    CHECK(est.severity == 0.0);
  }

  TEST_CASE("rain rule by direct substitution") {
    auto est = wem::classify(stats(120, 80, 50, 0.3, 3.5));
    CHECK(est.condition == Condition::Rain);
    CHECK(est.severity == doctest::Approx(0.5 / 3.0));
  }

  TEST_CASE("haze rule routes to sand") {
    auto est = wem::classify(stats(120, 40, 20, 0.3, 1.0));
    CHECK(est.condition == Condition::Sand);
  }

  TEST_CASE("severity is clamped for arbitrary stats") {
    std::mt19937 g(55);
    std::uniform_real_distribution<double> u(-50.0, 400.0);
    std::uniform_real_distribution<double> frac(-1.0, 2.0);
    for (int it = 0; it < 2000; ++it) {
      auto est = wem::classify(stats(u(g), std::abs(u(g)), u(g), frac(g), std::abs(u(g)) / 20));
      CHECK(est.severity >= 0.0);
      CHECK(est.severity <= 1.0);
      CHECK(est.spread >= 0.0);
    }
  }

  TEST_CASE("resolve only substitutes the label below the spread threshold") {
    SlotRecord slot;
    slot.version = 1;
    slot.clip_label = Condition::Fog;

    wem::WeatherEstimate confident;
    confident.condition = Condition::Rain;
    confident.severity = 0.4;
    confident.spread = 0.5;
    auto kept = wem::resolve(confident, slot);
    CHECK(kept.condition == Condition::Rain);
    CHECK(kept.source == wem::EstimateSource::Heuristic);

    wem::WeatherEstimate unsure = confident;
    unsure.spread = 0.05;
    auto swapped = wem::resolve(unsure, slot);
    CHECK(swapped.condition == Condition::Fog);
    CHECK(swapped.source == wem::EstimateSource::Slot);
    CHECK(swapped.severity == doctest::Approx(0.4));  // severity untouched

    auto empty = wem::resolve(unsure, std::nullopt);
    CHECK(empty.condition == Condition::Rain);
    CHECK(empty.source == wem::EstimateSource::Heuristic);
  }
}
