#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "atag/heads.hpp"
#include "atag/metrics.hpp"

namespace atag {

struct Proposal {
  std::string video_id;
  double t_start = 0.0;  // snippet units
  double t_end = 0.0;
  double p_s = 0.0, p_e = 0.0, p_cc = 0.0, p_cr = 0.0;
  double score = 0.0;    // fused, then decayed by Soft-NMS
  std::string label;
};

using ProposalSet = std::vector<Proposal>;

double fuse_scores(const Proposal& p);

/// One proposal per valid (d, j) cell: [j, j + d + 1], scored by the fused product.
ProposalSet enumerate_proposals(const ScoreMaps& maps, const std::string& video_id);

/// Best first: score desc, then t_start asc, then t_end asc.
bool ranks_before(const Proposal& a, const Proposal& b);
void sort_proposals(ProposalSet& props);

enum class Suppression { none, nms, soft_nms };
Suppression parse_suppression(const std::string& s);
std::string to_string(Suppression s);

inline constexpr double kSoftNmsSigma = 0.4;
inline constexpr double kSoftNmsFloor = 1e-3;
inline constexpr std::size_t kMaxProposalsRecall = 100;
inline constexpr std::size_t kMaxProposalsDetection = 200;

/// Gaussian Soft-NMS: repeatedly keep the best remaining proposal and scale
/// every other remaining score by exp(-tIoU^2 / sigma).
ProposalSet soft_nms(ProposalSet props, double sigma = kSoftNmsSigma, double score_floor = kSoftNmsFloor,
                     std::size_t max_out = kMaxProposalsRecall);

/// Greedy hard NMS: drop proposals with tIoU > iou_threshold against a kept one.
ProposalSet nms(ProposalSet props, double iou_threshold, std::size_t max_out = kMaxProposalsRecall);

struct SuppressionOptions {
  Suppression method = Suppression::soft_nms;
  double sigma = kSoftNmsSigma;
  double score_floor = kSoftNmsFloor;
  double iou_threshold = 0.65;
  std::size_t max_out = kMaxProposalsRecall;
};

/// none: all proposals, sorted.
ProposalSet suppress(ProposalSet props, const SuppressionOptions& opt);

// JSON lines: {"video_id","t_start","t_end","score","p_s","p_e","p_cc","p_cr"}.
// time_factor multiplies the coordinates (1 keeps snippet units).
void write_proposals_jsonl(const ProposalSet& props, const std::filesystem::path& path,
                           double time_factor = 1.0);
ProposalSet read_proposals_jsonl(const std::filesystem::path& path);

/// Groups by video, keeping file order within each video.
RankedProposals rank_by_video(const ProposalSet& props);

}  // namespace atag
