#include <cmath>

#include "cadenet/pee.hpp"
#include "doctest.h"
#include "test_util.hpp"

using cadenet::Raster;
namespace pee = cadenet::pee;

TEST_SUITE("pee") {
  TEST_CASE("constant patch has R=1, uniform 16-bin patch has R=0") {
    Raster c(16, 16, 1, 100);
    auto m = pee::entropy_map(c);
    REQUIRE(m.grid.rows() == 1);
    REQUIRE(m.grid.cols() == 1);
    CHECK(m.grid(0, 0) == doctest::Approx(1.0).epsilon(1e-9));

    // 16 samples in each of the 16 bins.
    Raster u(16, 16, 1);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) u.at(x, y) = static_cast<std::uint8_t>(y * 16);
    auto mu = pee::entropy_map(u);
    CHECK(mu.grid(0, 0) == doctest::Approx(0.0).epsilon(1e-9));
  }

  TEST_CASE("two-bin half/half patch has R=0.75") {
    Raster r(16, 16, 1);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) r.at(x, y) = y < 8 ? 0 : 255;
    auto m = pee::entropy_map(r);
    CHECK(m.grid(0, 0) == doctest::Approx(0.75).epsilon(1e-9));
  }

  TEST_CASE("histogram invariance: permuting pixels within a patch") {
    auto g = testutil::rng(61);
    Raster r = testutil::random_raster(16, 16, 1, g);
    auto before = pee::entropy_map(r).grid(0, 0);
    std::shuffle(r.data.begin(), r.data.end(), g);
    auto after = pee::entropy_map(r).grid(0, 0);
    CHECK(before == doctest::Approx(after).epsilon(1e-12));
  }

  TEST_CASE("spreading mass over more bins never raises R") {
    Raster narrow(16, 16, 1, 64);
    Raster wide(16, 16, 1);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) wide.at(x, y) = static_cast<std::uint8_t>(64 + (x % 4) * 16);
    CHECK(pee::entropy_map(wide).grid(0, 0) <= pee::entropy_map(narrow).grid(0, 0));
  }

  TEST_CASE("R stays in [0,1] on arbitrary rasters") {
    auto g = testutil::rng(67);
    for (int it = 0; it < 200; ++it) {
      Raster r = testutil::random_raster(50, 37, 1, g);  // edge patches included
      auto m = pee::entropy_map(r);
      CHECK(m.grid.rows() == 3);
      CHECK(m.grid.cols() == 4);
      for (int j = 0; j < m.grid.rows(); ++j)
        for (int i = 0; i < m.grid.cols(); ++i) {
          CHECK(m.grid(j, i) >= 0.0f);
          CHECK(m.grid(j, i) <= 1.0f);
        }
    }
  }

  TEST_CASE("reliability_at interpolates between patch centers") {
    pee::ReliabilityMap m;
    m.patch_size = 16;
    m.source_width = 32;
    m.source_height = 16;
    m.grid.resize(1, 2);
    m.grid(0, 0) = 0.0f;
    m.grid(0, 1) = 1.0f;
    // centers at x=7.5 and x=23.5
    CHECK(pee::reliability_at(m, 7.5, 7.5) == doctest::Approx(0.0));
    CHECK(pee::reliability_at(m, 23.5, 7.5) == doctest::Approx(1.0));
    CHECK(pee::reliability_at(m, 15.5, 7.5) == doctest::Approx(0.5));
  }

  TEST_CASE("uniform grid is constant everywhere") {
    pee::ReliabilityMap m;
    m.patch_size = 16;
    m.source_width = 48;
    m.source_height = 48;
    m.grid = Eigen::MatrixXf::Constant(3, 3, 0.6f);
    for (double x : {0.0, 7.5, 13.2, 24.0, 47.0})
      for (double y : {0.0, 8.1, 31.9, 47.0})
        CHECK(pee::reliability_at(m, x, y) == doctest::Approx(0.6));
  }

  TEST_CASE("out-of-bounds queries are rejected") {
    Raster c(32, 32, 1, 10);
    auto m = pee::entropy_map(c);
    CHECK_THROWS_AS(pee::reliability_at(m, -1.0, 5.0), std::out_of_range);
    CHECK_THROWS_AS(pee::reliability_at(m, 5.0, 32.0), std::out_of_range);
  }
}
