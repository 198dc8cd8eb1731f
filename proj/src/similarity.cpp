#include "rfmap/similarity.hpp"

#include <cmath>
#include <cstddef>

#include "rfmap/errors.hpp"

namespace rfmap {

void SimilarityConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw ConfigError("similarity beta must be positive");
  }
  if (!(sigma_kernel > 0.0) || !std::isfinite(sigma_kernel)) {
    throw ConfigError("similarity sigma_kernel must be positive");
  }
  if (!std::isfinite(missing_value)) {
    throw ConfigError("similarity missing_value must be finite");
  }
}

double jaccard(const RfObservation& a, const RfObservation& b) {
  if (a.empty() && b.empty()) {
    return 0.0;
  }
  const auto& ra = a.readings();
  const auto& rb = b.readings();
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t common = 0;
  while (i < ra.size() && j < rb.size()) {
    int cmp = ra[i].first.compare(rb[j].first);
    if (cmp == 0) {
      ++common;
      ++i;
      ++j;
    } else if (cmp < 0) {
      ++i;
    } else {
      ++j;
    }
  }
  const double unions = static_cast<double>(ra.size() + rb.size() - common);
  return static_cast<double>(common) / unions;
}

double kernelized_l1(const RfObservation& a, const RfObservation& b, const SimilarityConfig& cfg) {
  if (a.empty() && b.empty()) {
    throw DataError("no common support");
  }
  const auto& ra = a.readings();
  const auto& rb = b.readings();
  std::size_t i = 0;
  std::size_t j = 0;
  double gap_sum = 0.0;
  std::size_t unions = 0;
  // Linear merge over the union; a one-sided source compares against the
  // missing placeholder so partial overlap degrades smoothly.
  while (i < ra.size() || j < rb.size()) {
    int cmp;
    if (i == ra.size()) {
      cmp = 1;
    } else if (j == rb.size()) {
      cmp = -1;
    } else {
      cmp = ra[i].first.compare(rb[j].first);
    }
    if (cmp == 0) {
      gap_sum += std::abs(ra[i].second - rb[j].second);
      ++i;
      ++j;
    } else if (cmp < 0) {
      gap_sum += std::abs(ra[i].second - cfg.missing_value);
      ++i;
    } else {
      gap_sum += std::abs(rb[j].second - cfg.missing_value);
      ++j;
    }
    ++unions;
  }
  const double m = gap_sum / static_cast<double>(unions);
  return std::exp(-(m * m) / (2.0 * cfg.sigma_kernel * cfg.sigma_kernel));
}

double compound_from_components(double g_jac, double g_l1, double beta) {
  const double b2 = beta * beta;
  const double denom = b2 * g_jac + g_l1;
  if (denom == 0.0) {
    return 0.0;
  }
  return (1.0 + b2) * g_jac * g_l1 / denom;
}

double compound_similarity(const RfObservation& a, const RfObservation& b,
                           const SimilarityConfig& cfg) {
  const double g_jac = jaccard(a, b);
  if (g_jac == 0.0) {
    return 0.0;  // covers disjoint sets and the both-empty convention
  }
  const double g_l1 = kernelized_l1(a, b, cfg);
  return compound_from_components(g_jac, g_l1, cfg.beta);
}

}  // namespace rfmap
