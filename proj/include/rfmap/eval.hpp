#pragma once

#include <span>
#include <utility>
#include <vector>

namespace rfmap {

struct PlanarPoint {
  double x = 0.0;
  double y = 0.0;
};

struct FloorPosition {
  double x = 0.0;
  double y = 0.0;
  int floor = 0;
};

// Per-query planar error and floor hit flag, paired by index.
struct PositionErrors {
  std::vector<double> planar;
  std::vector<char> floor_hit;
};

// Pairs estimates with ground truth; throws DataError on length mismatch.
PositionErrors positioning_errors(std::span<const FloorPosition> estimates,
                                  std::span<const FloorPosition> truth);

struct ErrorSummary {
  std::size_t n = 0;
  double min_m = 0.0;
  double mean_m = 0.0;
  double cep68_m = 0.0;  // nearest-rank percentile: value at rank ceil(q * N)
  double cep95_m = 0.0;
  double floor_accuracy = 0.0;
};

// Summary statistics over the error set; throws DataError when empty.
ErrorSummary summarize(const PositionErrors& errors);

// Sorted (error, fraction <= error) pairs with fraction (i + 1) / N.
std::vector<std::pair<double, double>> ecdf(std::span<const double> errors);

// Rigid alignment of estimates onto truth (rotation + translation, no scale)
// in closed form, plus the post-alignment RMSE.
struct AteResult {
  double rmse = 0.0;
  double rotation = 0.0;  // radians, applied to estimates
  double tx = 0.0;
  double ty = 0.0;
};

// Requires at least 3 correspondences (throws DataError otherwise).
AteResult ate(std::span<const PlanarPoint> estimates, std::span<const PlanarPoint> truth);

// Applies the alignment found by ate() to a point.
PlanarPoint apply_alignment(const AteResult& alignment, const PlanarPoint& p);

}  // namespace rfmap
