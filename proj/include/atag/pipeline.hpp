#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "atag/config.hpp"
#include "atag/gradcheck.hpp"
#include "atag/metrics.hpp"
#include "atag/model.hpp"
#include "atag/proposals.hpp"
#include "atag/trainer.hpp"

namespace atag {

struct VideoRecord {
  FeatureSequence features;
  GroundTruth ground_truth;
};

/// <dir>/annotations.json plus <dir>/features/<video_id>.meta.json per entry.
std::vector<VideoRecord> load_dataset(const std::filesystem::path& dir);

/// Every *.meta.json (and bare *.csv) under a directory, or a single file;
/// sorted by video id.
std::vector<FeatureSequence> load_feature_dir(const std::filesystem::path& path);

/// Model-length inputs for a video: as-is (synthetic; length must equal T),
/// resized to T (anet), or overlapping T-snippet windows (thumos).
std::vector<Window> model_inputs(const FeatureSequence& f, const GroundTruth& gt, const RunConfig& config);

std::vector<TrainingExample> prepare_examples(const std::vector<VideoRecord>& videos, const RunConfig& config);

/// Scores, enumerates and suppresses every window of a video; coordinates are
/// mapped back to source snippets and clipped to the video, then windowed
/// videos get one more suppression pass over the merged list.
ProposalSet infer_video(const AtagModel& model, const RunConfig& config, const FeatureSequence& features);
ProposalSet infer_all(const AtagModel& model, const RunConfig& config, const std::vector<FeatureSequence>& videos);

/// Thresholds of the mode: THUMOS grid for thumos, ActivityNet grid otherwise.
std::vector<double> thresholds_for_mode(RunMode mode);

/// Videos in the annotations but absent from the proposals count as having
/// no proposals and are reported through the warning log.
EvalReport evaluate(const ProposalSet& proposals, const std::vector<GroundTruth>& gts, RunMode mode);

struct AblationCell {
  std::string name;
  RunConfig config;
  double first_loss = 0.0;
  double final_loss = 0.0;
  bool loss_decreased = false;
  EvalReport report;
};

/// Trains and evaluates (on the training set) every fusion mode with the
/// adaptive local branch and every local variant with concatenation. With an
/// output directory, each cell gets <dir>/<name>/report.json and the grid a
/// comparison.json and comparison.csv.
std::vector<AblationCell> run_ablation(const RunConfig& base, const std::vector<VideoRecord>& videos,
                                       const std::filesystem::path& out_dir = {});
nlohmann::json ablation_to_json(const std::vector<AblationCell>& cells);

/// Small model for finite-difference checks: T=8, C=8, D=6, two heads, no dropout.
RunConfig gradient_check_config();

/// Gradient check of the full training loss on one synthetic window, over
/// every parameter of a model built from `config`. Runs in f64.
GradCheckReport model_gradient_check(const RunConfig& config, const GradCheckOptions& options = {});

}  // namespace atag
