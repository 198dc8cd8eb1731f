#include "rfmap/types.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rfmap/errors.hpp"

namespace rfmap {

double wrap_angle(double theta) {
  // std::remainder lands in [-pi, pi]; fold the single excluded endpoint.
  double w = std::remainder(theta, 2.0 * std::numbers::pi);
  if (w <= -std::numbers::pi) {
    w += 2.0 * std::numbers::pi;
  }
  return w;
}

double euclidean_distance(const Pose2D& a, const Pose2D& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

RfObservation::RfObservation(std::vector<Reading> readings) : readings_(std::move(readings)) {
  std::sort(readings_.begin(), readings_.end(),
            [](const Reading& a, const Reading& b) { return a.first < b.first; });
  for (std::size_t i = 0; i < readings_.size(); ++i) {
    if (!std::isfinite(readings_[i].second)) {
      throw DataError("observation value for '" + readings_[i].first + "' is not finite");
    }
    if (i > 0 && readings_[i].first == readings_[i - 1].first) {
      throw DataError("duplicate observation id '" + readings_[i].first + "'");
    }
  }
}

const double* RfObservation::find(std::string_view id) const {
  auto it = std::lower_bound(readings_.begin(), readings_.end(), id,
                             [](const Reading& r, std::string_view key) { return r.first < key; });
  if (it != readings_.end() && it->first == id) {
    return &it->second;
  }
  return nullptr;
}

void validate_trajectory(const Trajectory& traj) {
  if (traj.steps.size() < 2) {
    throw DataError("trajectory '" + traj.id + "' has fewer than 2 steps");
  }
  for (std::size_t i = 1; i < traj.steps.size(); ++i) {
    if (!(traj.steps[i].timestamp > traj.steps[i - 1].timestamp)) {
      throw DataError("trajectory '" + traj.id + "' timestamps not strictly increasing at step " +
                      std::to_string(i));
    }
  }
}

}  // namespace rfmap
