#pragma once

#include <cstddef>
#include <vector>

#include "atag/features.hpp"

namespace atag {

/// Training targets for one window. Snippet i covers [i, i+1).
struct LabelSet {
  std::size_t length = 0;
  std::size_t max_duration = 0;
  std::vector<double> start;         // [T], 0/1
  std::vector<double> end;           // [T], 0/1
  std::vector<double> action;        // [T], 0/1
  std::vector<double> completeness;  // D x T, max tIoU, 0 on invalid cells
};

// Half-width of the start/end regions around each boundary, in snippets.
inline constexpr double kBoundaryRegionHalfWidth = 1.5;

/// Positive where the snippet interval overlaps a start (end) region
/// [t - 1.5, t + 1.5] by more than half its length; max over instances.
void assign_boundary_labels(const GroundTruth& gt, std::size_t length,
                            std::vector<double>& start, std::vector<double>& end);

/// Positive where more than half the snippet interval lies inside an instance.
std::vector<double> assign_actionness_labels(const GroundTruth& gt, std::size_t length);

/// Cell (d, j): max tIoU of [j, j + d + 1] with the instances.
std::vector<double> assign_completeness_labels(const GroundTruth& gt, std::size_t length,
                                               std::size_t max_duration);

LabelSet assign_labels(const GroundTruth& gt, std::size_t length, std::size_t max_duration);

}  // namespace atag
