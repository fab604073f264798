#pragma once

#include <memory>

#include "atag/config.hpp"
#include "atag/labels.hpp"
#include "atag/model.hpp"
#include "atag/synth.hpp"
#include "atag/trainer.hpp"

namespace testutil {

struct Overfit {
  atag::SyntheticVideo video;
  atag::RunConfig config;
  std::unique_ptr<atag::AtagModel> model;
  atag::ModelOutput output;  // inference pass after training
};

// Trains the default desk-scale model on a single clean synthetic video.
inline Overfit overfit_one_video(std::size_t epochs = 150, std::uint64_t seed = 3) {
  atag::DatasetSpec spec;
  spec.num_videos = 1;
  spec.min_instances = 1;
  spec.max_instances = 1;
  spec.noise_probability = 0.0;
  spec.seed = seed;
  Overfit o;
  o.video = atag::synth_generate(spec).videos.front();
  o.config = atag::defaults_for_mode(atag::RunMode::synthetic);
  o.config.epochs = epochs;
  o.config.model.dropout = 0.0;
  o.config.optim.decay_period = 1000;
  o.config.seed = seed;
  o.model = std::make_unique<atag::AtagModel>(o.config.model, seed);
  atag::TrainingExample ex{o.video.features.video_id, o.video.features.to_tensor(),
                           atag::assign_labels(o.video.ground_truth, spec.length, o.config.model.max_duration)};
  atag::train(*o.model, o.config, {ex});
  o.output = o.model->forward(ex.features);
  return o;
}

}  // namespace testutil
