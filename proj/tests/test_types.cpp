#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "rfmap/errors.hpp"
#include "rfmap/types.hpp"

using namespace rfmap;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  CHECK(wrap_angle(0.0) == doctest::Approx(0.0));
  CHECK(wrap_angle(3.0 * kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-3.5 * kPi) == doctest::Approx(0.5 * kPi));
  CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
  for (double t : {-9.7, -3.2, -0.1, 0.4, 2.9, 14.8}) {
    double w = wrap_angle(t);
    CHECK(w > -kPi);
    CHECK(w <= kPi);
    CHECK(std::abs(std::remainder(w - t, 2.0 * kPi)) < 1e-12);
  }
}

TEST_CASE("Pose2D normalizes heading at construction") {
  Pose2D p(1.0, 2.0, 5.0 * kPi);
  CHECK(p.theta == doctest::Approx(kPi));
  CHECK(p.x == 1.0);
  CHECK(p.y == 2.0);
}

TEST_CASE("euclidean_distance ignores heading") {
  CHECK(euclidean_distance(Pose2D(0, 0, 0.3), Pose2D(0, 0, -2.1)) == doctest::Approx(0.0));
  CHECK(euclidean_distance(Pose2D(0, 0, 0), Pose2D(3, 4, 0)) == doctest::Approx(5.0));
  CHECK(euclidean_distance(Pose2D(1, 1, 0), Pose2D(-2, 5, 1.2)) == doctest::Approx(5.0));
}

TEST_CASE("RfObservation sorts readings and rejects bad input") {
  RfObservation obs({{"b", -50.0}, {"a", -60.0}, {"c", -70.0}});
  REQUIRE(obs.size() == 3);
  CHECK(obs.readings()[0].first == "a");
  CHECK(obs.readings()[1].first == "b");
  CHECK(obs.readings()[2].first == "c");
  REQUIRE(obs.find("b") != nullptr);
  CHECK(*obs.find("b") == doctest::Approx(-50.0));
  CHECK(obs.find("zz") == nullptr);

  std::vector<RfObservation::Reading> dup = {{"a", -50.0}, {"a", -60.0}};
  CHECK_THROWS_AS(RfObservation(std::move(dup)), DataError);
  std::vector<RfObservation::Reading> bad = {{"a", std::nan("")}};
  CHECK_THROWS_AS(RfObservation(std::move(bad)), DataError);
  CHECK(RfObservation().empty());
}

TEST_CASE("validate_trajectory enforces structure") {
  Trajectory t;
  t.id = "t0";
  t.steps.push_back({Pose2D(), std::nullopt, 0.0});
  CHECK_THROWS_AS(validate_trajectory(t), DataError);

  t.steps.push_back({Pose2D(1, 0, 0), std::nullopt, 1.0});
  CHECK_NOTHROW(validate_trajectory(t));

  t.steps.push_back({Pose2D(2, 0, 0), std::nullopt, 1.0});  // timestamp not increasing
  CHECK_THROWS_AS(validate_trajectory(t), DataError);
}
