#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "atag/features.hpp"

namespace atag {

struct Interval {
  double start = 0.0;
  double end = 0.0;
};

/// Intersection over union; throws DataError if either interval has end <= start.
double tiou(const Interval& a, const Interval& b);

/// A scored interval, optionally with a class label (detection mode).
struct ScoredInterval {
  double start = 0.0;
  double end = 0.0;
  double score = 0.0;
  std::string label;
};

// Per video, already sorted best first.
using RankedProposals = std::map<std::string, std::vector<ScoredInterval>>;

std::vector<double> activitynet_thresholds();  // 0.50:0.05:0.95
std::vector<double> thumos_thresholds();       // 0.50:0.05:1.00

/// Fraction of ground-truth instances (over all videos) reached by one of
/// the top `an` proposals of their video, averaged over thresholds. Videos
/// without instances do not count.
double ar_at_an(const RankedProposals& proposals, const std::vector<GroundTruth>& gts,
                std::size_t an, const std::vector<double>& thresholds);

/// AR (fraction) at AN = 1..max_an.
std::vector<double> ar_curve(const RankedProposals& proposals, const std::vector<GroundTruth>& gts,
                             const std::vector<double>& thresholds, std::size_t max_an = 100);

/// Trapezoidal area under the AR curve over AN = 1..max_an, as percent of the
/// largest possible area.
double auc(const RankedProposals& proposals, const std::vector<GroundTruth>& gts,
           const std::vector<double>& thresholds, std::size_t max_an = 100);
double auc_from_curve(const std::vector<double>& curve);

struct Detection {
  std::string video_id;
  std::string label;
  double start = 0.0;
  double end = 0.0;
  double score = 0.0;
};

struct MapResult {
  std::vector<double> thresholds;
  std::vector<double> map;  // fraction, one per threshold
  double average = 0.0;
};

/// All-point interpolated AP per class, averaged over classes (every class
/// seen in either the detections or the ground truth), per threshold.
double average_precision(std::vector<Detection> dets, const std::vector<GroundTruth>& gts,
                         const std::string& label, double threshold);
MapResult map_detection(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                        const std::vector<double>& thresholds);

struct EvalReport {
  std::map<std::size_t, double> ar;  // AN -> percent
  double auc = 0.0;
  std::vector<double> curve;         // percent, AN = 1..100
  std::optional<MapResult> map;
};

EvalReport evaluate_proposals(const RankedProposals& proposals, const std::vector<GroundTruth>& gts,
                              const std::vector<double>& thresholds);
nlohmann::json report_to_json(const EvalReport& r);
void write_ar_curve_csv(const EvalReport& r, const std::filesystem::path& path);

}  // namespace atag
