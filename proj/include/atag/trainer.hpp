#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "atag/checkpoint.hpp"
#include "atag/config.hpp"
#include "atag/model.hpp"

namespace atag {

struct TrainingExample {
  std::string video_id;
  Tensor features;  // T x C
  LabelSet labels;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double total = 0.0;
  double completeness = 0.0;
  double actionness = 0.0;
  double start = 0.0;
  double end = 0.0;
  double learning_rate = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  bool halted = false;
  std::string halt_reason;
};

struct TrainOptions {
  // When set: checkpoint.bin is rewritten after every epoch and
  // train_log.csv collects one row per epoch.
  std::filesystem::path out_dir;
  const Checkpoint* resume = nullptr;
  std::function<void(const EpochLog&)> on_epoch;
};

/// Seeded shuffle, forward, loss, backward and Adam step per batch. The loss
/// of a batch is the mean over its windows. A non-finite loss or gradient
/// stops training; the previous epoch's checkpoint is left untouched.
TrainResult train(AtagModel& model, const RunConfig& config, const std::vector<TrainingExample>& data,
                  const TrainOptions& options = {});

void write_train_log_csv(const std::vector<EpochLog>& log, const std::filesystem::path& path);

}  // namespace atag
