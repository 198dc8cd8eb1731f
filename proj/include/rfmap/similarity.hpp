#pragma once

#include "rfmap/types.hpp"

namespace rfmap {

// Knobs for observation similarity. missing_value substitutes for a source
// that one side heard and the other did not; it must sit at or below the
// weakest plausible reading so absence is penalized, never rewarded.
struct SimilarityConfig {
  double beta = 1.0;            // weight of the set-overlap term in the compound mean
  double sigma_kernel = 10.0;   // dBm scale of the value-gap kernel
  double missing_value = -100.0;

  // Throws ConfigError on non-positive beta or sigma_kernel.
  void validate() const;
};

// |A intersect B| / |A union B| over the source-id sets. Both empty -> 0.
double jaccard(const RfObservation& a, const RfObservation& b);

// exp(-m^2 / (2 sigma^2)) where m is the mean absolute reading gap over the
// union of the two id sets; a source absent on one side contributes
// |value - missing_value|. Requires at least one non-empty observation,
// otherwise throws DataError("no common support").
double kernelized_l1(const RfObservation& a, const RfObservation& b, const SimilarityConfig& cfg);

// Weighted harmonic-style combination of the two component scores:
// (1 + beta^2) * g_jac * g_l1 / (beta^2 * g_jac + g_l1). Exposed so the
// combination can be studied independently of observation parsing.
double compound_from_components(double g_jac, double g_l1, double beta);

// Full compound similarity. When the overlap term is zero (including the
// both-empty case) the result is 0 and the value kernel is never evaluated.
double compound_similarity(const RfObservation& a, const RfObservation& b,
                           const SimilarityConfig& cfg);

}  // namespace rfmap
