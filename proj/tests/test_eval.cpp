#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "rfmap/errors.hpp"
#include "rfmap/eval.hpp"

using namespace rfmap;

TEST_CASE("positioning_errors pairs estimates with truth") {
  std::vector<FloorPosition> est = {{1, 2, 0}, {0, 0, 1}, {5, 5, 2}};
  std::vector<FloorPosition> truth = {{1, 2, 0}, {3, 4, 1}, {5, 5, 3}};
  PositionErrors errs = positioning_errors(est, truth);
  REQUIRE(errs.planar.size() == 3);
  CHECK(errs.planar[0] == doctest::Approx(0.0));
  CHECK(errs.floor_hit[0] == 1);
  CHECK(errs.planar[1] == doctest::Approx(5.0));
  CHECK(errs.floor_hit[1] == 1);
  CHECK(errs.planar[2] == doctest::Approx(0.0));  // planar error independent of floor
  CHECK(errs.floor_hit[2] == 0);

  std::vector<FloorPosition> short_truth = {{0, 0, 0}};
  CHECK_THROWS_AS(positioning_errors(est, short_truth), DataError);
}

TEST_CASE("summarize nearest-rank percentiles") {
  SUBCASE("integer ramp hits the textbook ranks") {
    PositionErrors errs;
    for (int i = 1; i <= 100; ++i) {
      errs.planar.push_back(double(i));
      errs.floor_hit.push_back(i % 2 == 0);
    }
    // Shuffle to prove order independence.
    std::mt19937_64 rng(3);
    std::shuffle(errs.planar.begin(), errs.planar.end(), rng);
    ErrorSummary s = summarize(errs);
    CHECK(s.n == 100);
    CHECK(s.min_m == doctest::Approx(1.0));
    CHECK(s.mean_m == doctest::Approx(50.5));
    CHECK(s.cep68_m == doctest::Approx(68.0));
    CHECK(s.cep95_m == doctest::Approx(95.0));
    CHECK(s.floor_accuracy == doctest::Approx(0.5));
  }
  SUBCASE("degenerate distribution collapses every statistic") {
    PositionErrors errs;
    for (int i = 0; i < 7; ++i) {
      errs.planar.push_back(3.25);
      errs.floor_hit.push_back(1);
    }
    ErrorSummary s = summarize(errs);
    CHECK(s.min_m == doctest::Approx(3.25));
    CHECK(s.mean_m == doctest::Approx(3.25));
    CHECK(s.cep68_m == doctest::Approx(3.25));
    CHECK(s.cep95_m == doctest::Approx(3.25));
    CHECK(s.floor_accuracy == doctest::Approx(1.0));
  }
  SUBCASE("matches a brute-force nearest-rank oracle on random data") {
    std::mt19937_64 rng(12);
    std::lognormal_distribution<double> ln(0.5, 0.8);
    for (int n : {1, 2, 17, 230}) {
      PositionErrors errs;
      for (int i = 0; i < n; ++i) {
        errs.planar.push_back(ln(rng));
        errs.floor_hit.push_back(1);
      }
      ErrorSummary s = summarize(errs);
      std::vector<double> sorted = errs.planar;
      std::sort(sorted.begin(), sorted.end());
      auto rank = [&](double q) {
        std::size_t r = static_cast<std::size_t>(std::ceil(q * n));
        return sorted[std::max<std::size_t>(r, 1) - 1];
      };
      CHECK(s.cep68_m == doctest::Approx(rank(0.68)));
      CHECK(s.cep95_m == doctest::Approx(rank(0.95)));
      CHECK(s.min_m == doctest::Approx(sorted.front()));
    }
  }
  SUBCASE("empty input throws") {
    PositionErrors errs;
    CHECK_THROWS_AS(summarize(errs), DataError);
  }
}

TEST_CASE("ecdf is the sorted empirical distribution") {
  std::vector<double> errors = {4.0, 1.0, 2.0, 2.0};
  auto points = ecdf(errors);
  REQUIRE(points.size() == 4);
  CHECK(points[0].first == doctest::Approx(1.0));
  CHECK(points[0].second == doctest::Approx(0.25));
  CHECK(points[1].first == doctest::Approx(2.0));
  CHECK(points[2].first == doctest::Approx(2.0));
  CHECK(points[2].second == doctest::Approx(0.75));
  CHECK(points[3].first == doctest::Approx(4.0));
  CHECK(points[3].second == doctest::Approx(1.0));
}

TEST_CASE("ate rigid alignment") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  std::vector<PlanarPoint> truth;
  for (int i = 0; i < 40; ++i) truth.push_back({u(rng), u(rng)});

  SUBCASE("identity gives zero error") {
    AteResult r = ate(truth, truth);
    CHECK(r.rmse == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("a rigidly moved copy aligns back to zero") {
    double alpha = std::numbers::pi / 2.0;
    std::vector<PlanarPoint> moved;
    for (const PlanarPoint& p : truth) {
      moved.push_back({std::cos(alpha) * p.x - std::sin(alpha) * p.y + 12.0,
                       std::sin(alpha) * p.x + std::cos(alpha) * p.y - 7.0});
    }
    AteResult r = ate(moved, truth);
    CHECK(r.rmse < 1e-9);
    for (std::size_t i = 0; i < truth.size(); ++i) {
      PlanarPoint back = apply_alignment(r, moved[i]);
      CHECK(std::abs(back.x - truth[i].x) < 1e-9);
      CHECK(std::abs(back.y - truth[i].y) < 1e-9);
    }
  }
  SUBCASE("iid noise leaves rmse near sigma root two") {
    const double sigma = 0.8;
    const int n = 10000;
    std::normal_distribution<double> gauss(0.0, sigma);
    std::vector<PlanarPoint> big_truth, noisy;
    for (int i = 0; i < n; ++i) {
      PlanarPoint p{u(rng), u(rng)};
      big_truth.push_back(p);
      noisy.push_back({p.x + gauss(rng), p.y + gauss(rng)});
    }
    AteResult r = ate(noisy, big_truth);
    CHECK(r.rmse == doctest::Approx(sigma * std::sqrt(2.0)).epsilon(0.10));
  }
  SUBCASE("scale mismatch is reported, not absorbed") {
    std::vector<PlanarPoint> scaled;
    for (const PlanarPoint& p : truth) scaled.push_back({2.0 * p.x, 2.0 * p.y});
    AteResult r = ate(scaled, truth);
    CHECK(r.rmse > 1.0);
  }
  SUBCASE("fewer than three correspondences throw") {
    std::vector<PlanarPoint> two = {{0, 0}, {1, 1}};
    CHECK_THROWS_AS(ate(two, two), DataError);
  }
  SUBCASE("reported transform parameters reproduce the rmse") {
    std::vector<PlanarPoint> jittered;
    std::normal_distribution<double> gauss(0.0, 0.5);
    for (const PlanarPoint& p : truth) {
      jittered.push_back({0.97 * p.x - 0.26 * p.y + 3.0 + gauss(rng),
                          0.26 * p.x + 0.97 * p.y - 1.0 + gauss(rng)});
    }
    AteResult r = ate(jittered, truth);
    double sum2 = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      PlanarPoint a = apply_alignment(r, jittered[i]);
      sum2 += (a.x - truth[i].x) * (a.x - truth[i].x) + (a.y - truth[i].y) * (a.y - truth[i].y);
    }
    CHECK(std::sqrt(sum2 / truth.size()) == doctest::Approx(r.rmse).epsilon(1e-9));
  }
}
