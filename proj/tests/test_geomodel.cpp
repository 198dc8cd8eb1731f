#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "rfmap/errors.hpp"
#include "rfmap/geomodel.hpp"
#include "rfmap/rng.hpp"
#include "rfmap/types.hpp"

using namespace rfmap;

namespace {

constexpr double kPi = std::numbers::pi;

// Inverse-CDF Rayleigh sampler, independent of the library's generators.
std::vector<double> rayleigh_draws(double zeta, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(1e-12, 1.0);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(zeta * std::sqrt(-2.0 * std::log(u(rng))));
  }
  return out;
}

Trajectory two_step_trajectory() {
  Trajectory t;
  t.id = "t0";
  t.floor = 0;
  t.steps.push_back({Pose2D(0, 0, 0), RfObservation({{"a", -50.0}, {"b", -60.0}}), 0.0});
  t.steps.push_back({Pose2D(3, 4, 0), RfObservation({{"a", -55.0}, {"b", -62.0}}), 1.0});
  return t;
}

}  // namespace

TEST_CASE("estimate_zeta MLE closed forms") {
  std::vector<double> two_ones = {1.0, 1.0};
  CHECK(estimate_zeta(two_ones, ZetaMethod::kMle) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));

  std::vector<double> zeros = {0.0, 0.0, 0.0};
  CHECK(estimate_zeta(zeros, ZetaMethod::kMle) == doctest::Approx(0.0));

  std::vector<double> empty;
  CHECK_THROWS_AS(estimate_zeta(empty, ZetaMethod::kMle), DataError);
  CHECK_THROWS_AS(estimate_zeta(empty, ZetaMethod::kKde), DataError);
}

TEST_CASE("estimate_zeta recovers the scale of Rayleigh draws") {
  auto draws = rayleigh_draws(3.0, 10000, 20240901ULL);
  double mle = estimate_zeta(draws, ZetaMethod::kMle);
  CHECK(mle == doctest::Approx(3.0).epsilon(0.02));
  CHECK(std::abs(mle - 3.0) < 0.06);

  // The density mode sits at zeta. Gaussian smoothing of a right-skewed
  // density drags the mode slightly left, so the KDE estimate is coarser
  // than the MLE; it still has to land on the same scale.
  double kde = estimate_zeta(draws, ZetaMethod::kKde);
  CHECK(kde == doctest::Approx(3.0).epsilon(0.10));
}

TEST_CASE("bin_samples centers and dropping") {
  SUBCASE("centers follow (i + 0.5) / C") {
    std::vector<PairSample> samples;
    for (int i = 0; i < 40; ++i) samples.push_back({0.3, 1.0});
    for (int i = 0; i < 40; ++i) samples.push_back({0.7, 2.0});
    auto bins = bin_samples(samples, 2, 30);
    REQUIRE(bins.size() == 2);
    CHECK(bins[0].center == doctest::Approx(0.25));
    CHECK(bins[1].center == doctest::Approx(0.75));
    CHECK(bins[0].half_width == doctest::Approx(0.25));
    CHECK(bins[0].distances.size() == 40);
  }
  SUBCASE("similarity 1.0 folds into the top bin") {
    std::vector<PairSample> samples(30, PairSample{1.0, 5.0});
    auto bins = bin_samples(samples, 10, 30);
    REQUIRE(bins.size() == 1);
    CHECK(bins[0].center == doctest::Approx(0.95));
  }
  SUBCASE("uniform similarities with generous counts keep every bin") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<PairSample> samples;
    for (int i = 0; i < 1000; ++i) samples.push_back({u(rng), 1.0});
    auto bins = bin_samples(samples, 20, 30);
    CHECK(bins.size() == 20);
  }
  SUBCASE("nothing surviving throws") {
    std::vector<PairSample> samples(5, PairSample{0.5, 1.0});
    CHECK_THROWS_AS(bin_samples(samples, 20, 30), DataError);
  }
}

TEST_CASE("fit_log_linear closed forms") {
  SUBCASE("two equal-count bins define the exact line") {
    // All distances in a bin equal d* makes the MLE zeta d*/sqrt(2), so these
    // bins estimate exactly e^1.0 and e^0.4.
    SimilarityBin b0{0.2, 0.025, std::vector<double>(50, std::sqrt(2.0) * std::exp(1.0))};
    SimilarityBin b1{0.8, 0.025, std::vector<double>(50, std::sqrt(2.0) * std::exp(0.4))};
    std::vector<SimilarityBin> bins = {b0, b1};
    GeoModel m = fit_log_linear(bins, ZetaMethod::kMle);
    CHECK(m.w0 == doctest::Approx(1.2).epsilon(1e-9));
    CHECK(m.w1 == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(m.bins_used == 2);
    CHECK(m.sample_count == 100);
  }
  SUBCASE("constant bins give a flat line") {
    std::vector<SimilarityBin> bins;
    for (double c : {0.1, 0.3, 0.5, 0.7}) {
      bins.push_back({c, 0.1, std::vector<double>(40, std::sqrt(2.0) * std::exp(2.0))});
    }
    GeoModel m = fit_log_linear(bins, ZetaMethod::kMle);
    CHECK(m.w0 == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(m.w1 == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("fewer than two usable bins throws") {
    std::vector<SimilarityBin> one = {{0.5, 0.025, std::vector<double>(40, 1.0)}};
    CHECK_THROWS_AS(fit_log_linear(one, ZetaMethod::kMle), DataError);
    std::vector<SimilarityBin> degenerate = {
        {0.3, 0.025, std::vector<double>(40, 0.0)},  // zero estimate, excluded
        {0.7, 0.025, std::vector<double>(40, 2.0)},
    };
    CHECK_THROWS_AS(fit_log_linear(degenerate, ZetaMethod::kMle), DataError);
  }
}

TEST_CASE("fit_log_linear recovers a known generating line") {
  // Synthesize per-bin Rayleigh data from ln zeta = 1.5 - 3 s and check both
  // estimators recover the coefficients.
  for (ZetaMethod method : {ZetaMethod::kMle, ZetaMethod::kKde}) {
    CAPTURE(to_string(method));
    std::vector<SimilarityBin> bins;
    for (int i = 0; i < 10; ++i) {
      double center = (i + 0.5) / 10.0;
      double zeta = std::exp(1.5 - 3.0 * center);
      bins.push_back({center, 0.05, rayleigh_draws(zeta, 2000, mix_seed(99, i))});
    }
    GeoModel m = fit_log_linear(bins, method);
    CHECK(std::abs(m.w0 - 1.5) / 1.5 < 0.05);
    CHECK(std::abs(m.w1 - (-3.0)) / 3.0 < 0.05);
  }
}

TEST_CASE("GeoModel::predict moments") {
  GeoModel m;
  m.w0 = std::log(2.0);
  m.w1 = 0.0;  // zeta = 2 everywhere
  DistanceEstimate est = m.predict(0.5);
  CHECK(est.mu_d == doctest::Approx(2.0 * std::sqrt(kPi / 2.0)).epsilon(1e-9));
  CHECK(est.mu_d == doctest::Approx(2.50663).epsilon(1e-5));
  CHECK(est.var_d == doctest::Approx((4.0 - kPi) / 2.0 * 4.0).epsilon(1e-9));
  CHECK(est.var_d == doctest::Approx(1.71681).epsilon(1e-5));

  GeoModel sloped;
  sloped.w0 = 1.0;
  sloped.w1 = -2.0;
  for (double s : {0.1, 0.5, 0.9}) {
    DistanceEstimate e = sloped.predict(s);
    CHECK(e.var_d / (e.mu_d * e.mu_d) == doctest::Approx((4.0 - kPi) / kPi).epsilon(1e-12));
  }
  CHECK(sloped.predict(0.9).mu_d < sloped.predict(0.4).mu_d);
}

TEST_CASE("sample_pairs basics") {
  SimilarityConfig sim;

  SUBCASE("two observation-bearing steps yield the only possible pair") {
    std::vector<Trajectory> trajs = {two_step_trajectory()};
    auto samples = sample_pairs(trajs, 1, sim, 42);
    REQUIRE(samples.size() == 1);
    CHECK(samples[0].distance == doctest::Approx(5.0));
    RfObservation a({{"a", -50.0}, {"b", -60.0}});
    RfObservation b({{"a", -55.0}, {"b", -62.0}});
    CHECK(samples[0].similarity == doctest::Approx(compound_similarity(a, b, sim)));
  }
  SUBCASE("deterministic for a fixed seed") {
    Trajectory t = two_step_trajectory();
    t.steps.push_back({Pose2D(6, 8, 0), RfObservation({{"a", -70.0}}), 2.0});
    t.steps.push_back({Pose2D(9, 12, 0), RfObservation({{"b", -72.0}}), 3.0});
    std::vector<Trajectory> trajs = {t};
    auto s1 = sample_pairs(trajs, 50, sim, 7);
    auto s2 = sample_pairs(trajs, 50, sim, 7);
    REQUIRE(s1.size() == s2.size());
    for (std::size_t i = 0; i < s1.size(); ++i) {
      CHECK(s1[i].similarity == s2[i].similarity);
      CHECK(s1[i].distance == s2[i].distance);
    }
    auto s3 = sample_pairs(trajs, 50, sim, 8);
    bool any_differ = false;
    for (std::size_t i = 0; i < s1.size() && i < s3.size(); ++i) {
      any_differ = any_differ || s1[i].distance != s3[i].distance;
    }
    CHECK(any_differ);
  }
  SUBCASE("trajectories without two observations are skipped") {
    Trajectory bare;
    bare.id = "bare";
    bare.steps.push_back({Pose2D(0, 0, 0), RfObservation({{"a", -50.0}}), 0.0});
    bare.steps.push_back({Pose2D(1, 0, 0), std::nullopt, 1.0});
    std::vector<Trajectory> trajs = {bare, two_step_trajectory()};
    auto samples = sample_pairs(trajs, 3, sim, 1);
    CHECK(samples.size() == 3);  // only the usable trajectory contributes
  }
}

TEST_CASE("zeta method names round-trip") {
  CHECK(zeta_method_from_string("mle") == ZetaMethod::kMle);
  CHECK(zeta_method_from_string("kde") == ZetaMethod::kKde);
  CHECK(to_string(ZetaMethod::kMle) == "mle");
  CHECK(to_string(ZetaMethod::kKde) == "kde");
  CHECK_THROWS_AS(zeta_method_from_string("median"), ConfigError);
}
