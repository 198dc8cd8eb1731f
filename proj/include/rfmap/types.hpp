#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rfmap {

// Wraps an angle to (-pi, pi]. The upper bound is inclusive so that pi maps
// to itself and -pi maps to +pi; every pose stores its heading in this range.
double wrap_angle(double theta);

// Planar pose. Heading is normalized at construction, so downstream code can
// rely on theta in (-pi, pi] without re-wrapping.
struct Pose2D {
  Pose2D() = default;
  Pose2D(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}

  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

// Planar distance between poses; heading does not participate.
double euclidean_distance(const Pose2D& a, const Pose2D& b);

// One radio snapshot: source id -> received strength in dBm. Immutable after
// construction; readings are kept sorted by id with unique keys so that set
// operations over two observations are linear merges.
class RfObservation {
 public:
  using Reading = std::pair<std::string, double>;

  RfObservation() = default;
  // Sorts by id; throws DataError on duplicate ids or non-finite values.
  explicit RfObservation(std::vector<Reading> readings);

  bool empty() const { return readings_.empty(); }
  std::size_t size() const { return readings_.size(); }
  const std::vector<Reading>& readings() const { return readings_; }

  // Returns nullptr when the id is absent.
  const double* find(std::string_view id) const;

 private:
  std::vector<Reading> readings_;
};

// One crowdsourced step: dead-reckoned pose in the trace's local frame, an
// optional radio snapshot, and a monotonically increasing timestamp.
struct TrajectoryStep {
  Pose2D pose;
  std::optional<RfObservation> observation;
  double timestamp = 0.0;
};

struct Trajectory {
  std::string id;
  int floor = 0;
  std::vector<TrajectoryStep> steps;
};

// Enforces the structural invariants (>= 2 steps, strictly increasing
// timestamps); throws DataError naming the trajectory otherwise.
void validate_trajectory(const Trajectory& traj);

}  // namespace rfmap
