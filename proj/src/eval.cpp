#include "rfmap/eval.hpp"

#include <algorithm>
#include <cmath>

#include "rfmap/errors.hpp"

namespace rfmap {

PositionErrors positioning_errors(std::span<const FloorPosition> estimates,
                                  std::span<const FloorPosition> truth) {
  if (estimates.size() != truth.size()) {
    throw DataError("estimate and truth counts differ");
  }
  PositionErrors out;
  out.planar.reserve(estimates.size());
  out.floor_hit.reserve(estimates.size());
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    out.planar.push_back(std::hypot(estimates[i].x - truth[i].x, estimates[i].y - truth[i].y));
    out.floor_hit.push_back(estimates[i].floor == truth[i].floor ? 1 : 0);
  }
  return out;
}

namespace {

double nearest_rank(const std::vector<double>& sorted, double q) {
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

}  // namespace

ErrorSummary summarize(const PositionErrors& errors) {
  if (errors.planar.empty()) {
    throw DataError("cannot summarize an empty error set");
  }
  if (errors.floor_hit.size() != errors.planar.size()) {
    throw DataError("error set has mismatched floor flags");
  }
  std::vector<double> sorted = errors.planar;
  std::sort(sorted.begin(), sorted.end());
  ErrorSummary s;
  s.n = sorted.size();
  s.min_m = sorted.front();
  double sum = 0.0;
  for (double e : sorted) {
    sum += e;
  }
  s.mean_m = sum / static_cast<double>(s.n);
  s.cep68_m = nearest_rank(sorted, 0.68);
  s.cep95_m = nearest_rank(sorted, 0.95);
  std::size_t hits = 0;
  for (char h : errors.floor_hit) {
    hits += h != 0 ? 1 : 0;
  }
  s.floor_accuracy = static_cast<double>(hits) / static_cast<double>(s.n);
  return s;
}

std::vector<std::pair<double, double>> ecdf(std::span<const double> errors) {
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, double>> out;
  out.reserve(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    out.emplace_back(sorted[i], static_cast<double>(i + 1) / static_cast<double>(sorted.size()));
  }
  return out;
}

AteResult ate(std::span<const PlanarPoint> estimates, std::span<const PlanarPoint> truth) {
  if (estimates.size() != truth.size()) {
    throw DataError("estimate and truth counts differ");
  }
  if (estimates.size() < 3) {
    throw DataError("alignment needs at least 3 correspondences");
  }
  const auto n = static_cast<double>(estimates.size());
  double pmx = 0.0;
  double pmy = 0.0;
  double qmx = 0.0;
  double qmy = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    pmx += estimates[i].x;
    pmy += estimates[i].y;
    qmx += truth[i].x;
    qmy += truth[i].y;
  }
  pmx /= n;
  pmy /= n;
  qmx /= n;
  qmy /= n;

  // Closed-form planar Procrustes: the optimal rotation angle comes from the
  // cross-covariance of the centered point sets.
  double dot = 0.0;
  double cross = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double px = estimates[i].x - pmx;
    const double py = estimates[i].y - pmy;
    const double qx = truth[i].x - qmx;
    const double qy = truth[i].y - qmy;
    dot += px * qx + py * qy;
    cross += px * qy - py * qx;
  }
  AteResult r;
  r.rotation = std::atan2(cross, dot);
  const double c = std::cos(r.rotation);
  const double s = std::sin(r.rotation);
  r.tx = qmx - (c * pmx - s * pmy);
  r.ty = qmy - (s * pmx + c * pmy);

  double sq = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const PlanarPoint a = apply_alignment(r, estimates[i]);
    sq += (a.x - truth[i].x) * (a.x - truth[i].x) + (a.y - truth[i].y) * (a.y - truth[i].y);
  }
  r.rmse = std::sqrt(sq / n);
  return r;
}

PlanarPoint apply_alignment(const AteResult& alignment, const PlanarPoint& p) {
  const double c = std::cos(alignment.rotation);
  const double s = std::sin(alignment.rotation);
  return {c * p.x - s * p.y + alignment.tx, s * p.x + c * p.y + alignment.ty};
}

}  // namespace rfmap
