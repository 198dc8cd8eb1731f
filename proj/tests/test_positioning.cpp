#include <cmath>
#include <vector>

#include "doctest.h"
#include "rfmap/errors.hpp"
#include "rfmap/positioning.hpp"
#include "rfmap/types.hpp"

using namespace rfmap;

namespace {

RfObservation obs(std::vector<RfObservation::Reading> r) { return RfObservation(std::move(r)); }

RfmEntry entry(double x, double y, int floor, std::vector<RfObservation::Reading> r) {
  RfmEntry e;
  e.x = x;
  e.y = y;
  e.floor = floor;
  e.readings = RfObservation(std::move(r));
  return e;
}

}  // namespace

TEST_CASE("build_rfm keeps observation-bearing steps only") {
  Trajectory t;
  t.id = "t";
  t.floor = 2;
  t.steps.push_back({Pose2D(0, 0, 0), obs({{"a", -50}}), 0.0});
  t.steps.push_back({Pose2D(1, 0, 0), std::nullopt, 1.0});
  t.steps.push_back({Pose2D(2, 0, 0), RfObservation(), 2.0});  // empty -> skipped
  t.steps.push_back({Pose2D(3, 0, 0), obs({{"b", -60}}), 3.0});
  t.steps.push_back({Pose2D(3, 0, 0), obs({{"b", -60}}), 4.0});  // duplicate position kept

  std::vector<Trajectory> trajs = {t};
  Rfm rfm = build_rfm(trajs);
  REQUIRE(rfm.size() == 3);
  CHECK(rfm[0].x == doctest::Approx(0.0));
  CHECK(rfm[1].x == doctest::Approx(3.0));
  CHECK(rfm[2].x == doctest::Approx(3.0));
  for (const RfmEntry& e : rfm) CHECK(e.floor == 2);
}

TEST_CASE("knn_locate nearest-neighbor behavior") {
  SimilarityConfig sim;
  Rfm rfm = {
      entry(0, 0, 0, {{"a", -50}, {"b", -60}}),
      entry(2, 0, 0, {{"a", -70}, {"b", -80}}),
      entry(9, 9, 1, {{"c", -40}}),
  };

  SUBCASE("k=1 exact match returns that entry") {
    KnnConfig knn;
    knn.k = 1;
    LocateResult r = knn_locate(rfm, obs({{"a", -50}, {"b", -60}}), sim, knn);
    CHECK(r.x == doctest::Approx(0.0));
    CHECK(r.y == doctest::Approx(0.0));
    CHECK(r.floor == 0);
    CHECK(!r.truncated_k);
  }
  SUBCASE("k=2 equidistant entries average") {
    // Query sits exactly between the two same-floor entries in reading space.
    Rfm two = {
        entry(0, 0, 0, {{"a", -50}}),
        entry(2, 0, 0, {{"a", -70}}),
    };
    KnnConfig knn;
    knn.k = 2;
    LocateResult r = knn_locate(two, obs({{"a", -60}}), sim, knn);
    CHECK(r.x == doctest::Approx(1.0));
    CHECK(r.y == doctest::Approx(0.0));
  }
  SUBCASE("floor resolves by majority vote") {
    Rfm floors = {
        entry(0, 0, 3, {{"a", -50}}),
        entry(1, 0, 3, {{"a", -52}}),
        entry(2, 0, 1, {{"a", -54}}),
    };
    KnnConfig knn;
    knn.k = 3;
    LocateResult r = knn_locate(floors, obs({{"a", -51}}), sim, knn);
    CHECK(r.floor == 3);
  }
  SUBCASE("floor tie goes to the nearest neighbor") {
    Rfm floors = {
        entry(0, 0, 7, {{"a", -50}}),
        entry(1, 0, 2, {{"a", -58}}),
    };
    KnnConfig knn;
    knn.k = 2;
    LocateResult r = knn_locate(floors, obs({{"a", -50}}), sim, knn);
    CHECK(r.floor == 7);
  }
  SUBCASE("k larger than the map clamps and flags") {
    KnnConfig knn;
    knn.k = 50;
    LocateResult r = knn_locate(rfm, obs({{"a", -50}}), sim, knn);
    CHECK(r.truncated_k);
  }
  SUBCASE("weighted mean pulls toward the closer entry") {
    Rfm two = {
        entry(0, 0, 0, {{"a", -50}}),
        entry(2, 0, 0, {{"a", -90}}),
    };
    KnnConfig knn;
    knn.k = 2;
    knn.weighted = true;
    LocateResult r = knn_locate(two, obs({{"a", -52}}), sim, knn);
    CHECK(r.x < 1.0);
    CHECK(r.x >= 0.0);
  }
  SUBCASE("defaults: k is 5 and unweighted") {
    KnnConfig knn;
    CHECK(knn.k == 5);
    CHECK(!knn.weighted);
  }
  SUBCASE("empty map and bad k throw") {
    KnnConfig knn;
    Rfm empty;
    CHECK_THROWS_AS(knn_locate(empty, obs({{"a", -50}}), sim, knn), DataError);
    knn.k = 0;
    CHECK_THROWS_AS(knn_locate(rfm, obs({{"a", -50}}), sim, knn), ConfigError);
  }
}

TEST_CASE("knn_locate tie-break is stable under reordering queries") {
  // Two entries with identical readings: similarity ties resolve by entry
  // index, so the first one decides the floor.
  SimilarityConfig sim;
  Rfm rfm = {
      entry(0, 0, 4, {{"a", -50}}),
      entry(10, 0, 9, {{"a", -50}}),
  };
  KnnConfig knn;
  knn.k = 1;
  LocateResult r = knn_locate(rfm, obs({{"a", -50}}), sim, knn);
  CHECK(r.x == doctest::Approx(0.0));
  CHECK(r.floor == 4);
}
