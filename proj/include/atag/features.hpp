#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "atag/tensor.hpp"

namespace atag {

/// T x C snippet features of one video (or one window of a video).
struct FeatureSequence {
  std::string video_id;
  std::size_t length = 0;    // T
  std::size_t channels = 0;  // C
  std::vector<double> values;  // row-major, snippet-time order
  int frame_interval = 1;
  // Mapping back to source-video snippets: source = origin_offset + t * time_scale.
  std::size_t origin_offset = 0;
  double time_scale = 1.0;

  double at(std::size_t t, std::size_t c) const { return values[t * channels + c]; }
  Tensor to_tensor() const;
  // Throws DataError on non-finite entries, FormatError on size mismatch.
  void validate() const;
};

struct ActionInstance {
  double start = 0.0;  // snippet units
  double end = 0.0;
  std::string label;   // optional class label, used by detection mAP
};

struct GroundTruth {
  std::string video_id;
  std::size_t length = 0;  // T the coordinates refer to
  std::vector<ActionInstance> instances;

  // 0 <= start < end <= length for every instance.
  void validate() const;
};

// --- file formats ------------------------------------------------------------
//
// Features: "<stem>.meta.json" sidecar {"video_id","T","C","frame_interval"}
// plus either "<stem>.bin" (little-endian float32, row-major) or "<stem>.csv"
// (T rows of C comma-separated decimals).
// Annotations: [{"video_id","T","instances":[{"start","end"[,"label"]}]}].

/// Accepts a sidecar path ("x.meta.json"), or a bare ".csv" payload whose
/// shape is inferred from the rows.
FeatureSequence load_features(const std::filesystem::path& path);

enum class PayloadFormat { binary, csv };
// Writes sidecar + payload; returns the sidecar path.
std::filesystem::path save_features(const FeatureSequence& f, const std::filesystem::path& dir,
                                    PayloadFormat format = PayloadFormat::binary);

std::vector<GroundTruth> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::vector<GroundTruth>& gts, const std::filesystem::path& path);

// --- transforms --------------------------------------------------------------

/// Per-channel linear interpolation onto `target_length` uniformly spaced
/// points spanning [0, T-1]. Returns the resized features together with the
/// ground truth rescaled by target_length / T.
std::pair<FeatureSequence, GroundTruth> resize_linear(const FeatureSequence& f,
                                                      const GroundTruth& gt,
                                                      std::size_t target_length);
FeatureSequence resize_linear(const FeatureSequence& f, std::size_t target_length);

struct Window {
  FeatureSequence features;
  GroundTruth ground_truth;
};

/// Fixed-length windows with stride window_length * (1 - overlap). The last
/// window is right-aligned to the end of the video; a video shorter than the
/// window is zero-padded to one full window. Instances are clipped to each
/// window and shifted by its origin; clipped pieces shorter than one snippet
/// are dropped.
std::vector<Window> window_video(const FeatureSequence& f, const GroundTruth& gt,
                                 std::size_t window_length = 128, double overlap = 0.5);

/// First half of the channels (global branch) and second half (local branch).
std::pair<Tensor, Tensor> split_channels(const FeatureSequence& f);
std::pair<Tensor, Tensor> split_channels(const Tensor& f);

}  // namespace atag
