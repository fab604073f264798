#include "atag/labels.hpp"

#include <algorithm>

#include "atag/heads.hpp"
#include "atag/metrics.hpp"

namespace atag {
namespace {

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

// Max over regions of the fraction of [i, i+1) they cover.
std::vector<double> label_by_ior(std::size_t length,
                                 const std::vector<std::pair<double, double>>& regions) {
  std::vector<double> g(length, 0.0);
  for (std::size_t i = 0; i < length; ++i) {
    const double s = static_cast<double>(i);
    double best = 0.0;
    for (const auto& [r0, r1] : regions) best = std::max(best, overlap(s, s + 1.0, r0, r1));
    g[i] = best > 0.5 ? 1.0 : 0.0;
  }
  return g;
}

}  // namespace

void assign_boundary_labels(const GroundTruth& gt, std::size_t length,
                            std::vector<double>& start, std::vector<double>& end) {
  std::vector<std::pair<double, double>> starts, ends;
  for (const auto& inst : gt.instances) {
    starts.emplace_back(inst.start - kBoundaryRegionHalfWidth, inst.start + kBoundaryRegionHalfWidth);
    ends.emplace_back(inst.end - kBoundaryRegionHalfWidth, inst.end + kBoundaryRegionHalfWidth);
  }
  start = label_by_ior(length, starts);
  end = label_by_ior(length, ends);
}

std::vector<double> assign_actionness_labels(const GroundTruth& gt, std::size_t length) {
  std::vector<std::pair<double, double>> spans;
  for (const auto& inst : gt.instances) spans.emplace_back(inst.start, inst.end);
  return label_by_ior(length, spans);
}

std::vector<double> assign_completeness_labels(const GroundTruth& gt, std::size_t length,
                                               std::size_t max_duration) {
  const auto valid = valid_mask(max_duration, length);
  std::vector<double> g(max_duration * length, 0.0);
  for (std::size_t d = 0; d < max_duration; ++d) {
    for (std::size_t j = 0; j < length; ++j) {
      if (!valid[d * length + j]) continue;
      const Interval cell{static_cast<double>(j), static_cast<double>(j + d + 1)};
      double best = 0.0;
      for (const auto& inst : gt.instances) best = std::max(best, tiou(cell, {inst.start, inst.end}));
      g[d * length + j] = best;
    }
  }
  return g;
}

LabelSet assign_labels(const GroundTruth& gt, std::size_t length, std::size_t max_duration) {
  LabelSet l;
  l.length = length;
  l.max_duration = max_duration;
  assign_boundary_labels(gt, length, l.start, l.end);
  l.action = assign_actionness_labels(gt, length);
  l.completeness = assign_completeness_labels(gt, length, max_duration);
  return l;
}

}  // namespace atag
