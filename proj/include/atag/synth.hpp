#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "atag/features.hpp"

namespace atag {

/// Parameters of the synthetic corpus. Background snippets are drawn around
/// one cluster centre and action snippets around another; "noise segments"
/// are background-distributed runs embedded inside an action but labelled as
/// action.
struct DatasetSpec {
  std::size_t num_videos = 8;
  std::size_t length = 32;
  std::size_t channels = 32;
  std::size_t min_instances = 1;
  std::size_t max_instances = 2;
  std::size_t min_instance_length = 8;
  std::size_t max_instance_length = 14;
  double noise_probability = 0.5;
  std::size_t min_noise_length = 2;
  std::size_t max_noise_length = 4;
  double separation = 3.0;      // distance between action and background centres
  double feature_noise = 1.0;   // per-channel standard deviation around a centre
  std::uint64_t seed = 0;
  int frame_interval = 1;
};

struct SyntheticVideo {
  FeatureSequence features;
  GroundTruth ground_truth;
  // 1 for snippets drawn from the background cluster inside an action.
  std::vector<std::uint8_t> noise_mask;
};

struct SyntheticDataset {
  DatasetSpec spec;
  std::vector<SyntheticVideo> videos;
};

/// Pure function of the spec (including its seed). Throws ConfigError when
/// the requested instances cannot fit into the video length.
SyntheticDataset synth_generate(const DatasetSpec& spec);

DatasetSpec dataset_spec_from_json(const std::string& text);
std::string dataset_spec_to_json(const DatasetSpec& spec);

// Writes features/<id>.meta.json + .bin, annotations.json and noise_masks.json.
void save_dataset(const SyntheticDataset& ds, const std::filesystem::path& dir);

}  // namespace atag
