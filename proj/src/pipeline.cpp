#include "atag/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "atag/diagnostics.hpp"
#include "atag/errors.hpp"
#include "atag/synth.hpp"

namespace atag {

std::vector<VideoRecord> load_dataset(const std::filesystem::path& dir) {
  const auto gts = load_annotations(dir / "annotations.json");
  std::vector<VideoRecord> out;
  for (const auto& gt : gts) {
    VideoRecord r;
    r.features = load_features(dir / "features" / (gt.video_id + ".meta.json"));
    if (r.features.video_id != gt.video_id) {
      throw DataError("feature file for " + gt.video_id + " names video " + r.features.video_id);
    }
    r.ground_truth = gt;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<FeatureSequence> load_feature_dir(const std::filesystem::path& path) {
  std::vector<FeatureSequence> out;
  if (std::filesystem::is_regular_file(path)) {
    out.push_back(load_features(path));
    return out;
  }
  if (!std::filesystem::is_directory(path)) throw FormatError("no such feature path: " + path.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(path)) {
    const std::string name = e.path().filename().string();
    const bool sidecar = name.size() > 10 && name.ends_with(".meta.json");
    const bool bare_csv = e.path().extension() == ".csv" &&
                          !std::filesystem::exists(e.path().parent_path() / (e.path().stem().string() + ".meta.json"));
    if (sidecar || bare_csv) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) out.push_back(load_features(f));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.video_id < b.video_id; });
  return out;
}

std::vector<Window> model_inputs(const FeatureSequence& f, const GroundTruth& gt, const RunConfig& config) {
  const std::size_t t_len = config.model.length;
  if (f.channels != config.model.channels) {
    throw ConfigError("video " + f.video_id + " has " + std::to_string(f.channels) + " channels, model expects " +
                      std::to_string(config.model.channels));
  }
  switch (config.mode) {
    case RunMode::synthetic:
      if (f.length != t_len) {
        throw ConfigError("video " + f.video_id + " has T=" + std::to_string(f.length) +
                          " but the learned adjacency fixes T=" + std::to_string(t_len));
      }
      return {Window{f, gt}};
    case RunMode::anet: {
      auto [rf, rg] = resize_linear(f, gt, t_len);
      return {Window{std::move(rf), std::move(rg)}};
    }
    case RunMode::thumos:
      return window_video(f, gt, t_len, static_cast<double>(config.window_overlap_percent) / 100.0);
  }
  throw ConfigError("unknown run mode");
}

std::vector<TrainingExample> prepare_examples(const std::vector<VideoRecord>& videos, const RunConfig& config) {
  std::vector<TrainingExample> out;
  for (const auto& v : videos) {
    for (auto& w : model_inputs(v.features, v.ground_truth, config)) {
      TrainingExample ex;
      ex.video_id = v.features.video_id;
      ex.features = w.features.to_tensor();
      ex.labels = assign_labels(w.ground_truth, config.model.length, config.model.max_duration);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

ProposalSet infer_video(const AtagModel& model, const RunConfig& config, const FeatureSequence& features) {
  PrecisionScope precision(config.precision);
  GroundTruth empty{features.video_id, features.length, {}};
  const auto windows = model_inputs(features, empty, config);
  const double source_end = static_cast<double>(features.origin_offset) +
                            static_cast<double>(features.length) * features.time_scale;
  ProposalSet merged;
  for (const auto& w : windows) {
    const ModelOutput out = model.forward(w.features.to_tensor());
    ProposalSet props = enumerate_proposals(out.maps, features.video_id);
    for (auto& p : props) {
      p.t_start = static_cast<double>(w.features.origin_offset) + p.t_start * w.features.time_scale;
      p.t_end = std::min(source_end, static_cast<double>(w.features.origin_offset) + p.t_end * w.features.time_scale);
    }
    std::erase_if(props, [](const Proposal& p) { return !(p.t_end > p.t_start); });
    props = suppress(std::move(props), config.suppression);
    merged.insert(merged.end(), std::make_move_iterator(props.begin()), std::make_move_iterator(props.end()));
  }
  if (windows.size() > 1 && config.suppression.method != Suppression::none) {
    merged = suppress(std::move(merged), config.suppression);
  } else if (windows.size() > 1) {
    sort_proposals(merged);
  }
  return merged;
}

ProposalSet infer_all(const AtagModel& model, const RunConfig& config, const std::vector<FeatureSequence>& videos) {
  ProposalSet all;
  for (const auto& v : videos) {
    auto props = infer_video(model, config, v);
    all.insert(all.end(), std::make_move_iterator(props.begin()), std::make_move_iterator(props.end()));
  }
  return all;
}

std::vector<double> thresholds_for_mode(RunMode mode) {
  return mode == RunMode::thumos ? thumos_thresholds() : activitynet_thresholds();
}

EvalReport evaluate(const ProposalSet& proposals, const std::vector<GroundTruth>& gts, RunMode mode) {
  RankedProposals ranked = rank_by_video(proposals);
  for (const auto& gt : gts) {
    if (!ranked.count(gt.video_id)) record_warning("no proposals for video " + gt.video_id);
  }
  EvalReport report = evaluate_proposals(ranked, gts, thresholds_for_mode(mode));
  bool labelled = false;
  for (const auto& p : proposals) labelled = labelled || !p.label.empty();
  if (labelled) {
    std::vector<Detection> dets;
    for (const auto& p : proposals) dets.push_back({p.video_id, p.label, p.t_start, p.t_end, p.score});
    report.map = map_detection(dets, gts, thresholds_for_mode(mode));
  }
  return report;
}

std::vector<AblationCell> run_ablation(const RunConfig& base, const std::vector<VideoRecord>& videos,
                                       const std::filesystem::path& out_dir) {
  std::vector<AblationCell> cells;
  auto add_cell = [&](const std::string& name, RunConfig c) {
    c.validate();
    cells.push_back({name, c, 0.0, 0.0, false, {}});
  };
  for (FusionMode f : {FusionMode::concat, FusionMode::sum, FusionMode::late}) {
    RunConfig c = base;
    c.model.fusion = f;
    c.model.local_variant = LocalVariant::adaptive;
    add_cell("fusion-" + to_string(f), c);
  }
  for (LocalVariant v : {LocalVariant::general_gcn, LocalVariant::self_attn_gcn, LocalVariant::conv}) {
    RunConfig c = base;
    c.model.fusion = FusionMode::concat;
    c.model.local_variant = v;
    add_cell("local-" + to_string(v), c);
  }

  std::vector<GroundTruth> gts;
  std::vector<FeatureSequence> feats;
  for (const auto& v : videos) {
    gts.push_back(v.ground_truth);
    feats.push_back(v.features);
  }
  for (auto& cell : cells) {
    AtagModel model(cell.config.model, cell.config.seed);
    const auto examples = prepare_examples(videos, cell.config);
    TrainOptions opt;
    if (!out_dir.empty()) opt.out_dir = out_dir / cell.name;
    const TrainResult tr = train(model, cell.config, examples, opt);
    if (tr.halted) throw NumericError("ablation cell " + cell.name + " halted: " + tr.halt_reason);
    cell.first_loss = tr.log.front().total;
    cell.final_loss = tr.log.back().total;
    cell.loss_decreased = cell.final_loss < cell.first_loss;
    const ProposalSet props = infer_all(model, cell.config, feats);
    cell.report = evaluate(props, gts, cell.config.mode);
    if (!out_dir.empty()) {
      std::ofstream(out_dir / cell.name / "report.json") << report_to_json(cell.report).dump(2) << '\n';
    }
  }
  if (!out_dir.empty()) {
    std::ofstream(out_dir / "comparison.json") << ablation_to_json(cells).dump(2) << '\n';
    std::ofstream csv(out_dir / "comparison.csv");
    csv << "cell,fusion,local_variant,first_loss,final_loss,loss_decreased,AR@100,AUC\n";
    for (const auto& c : cells) {
      csv << c.name << ',' << to_string(c.config.model.fusion) << ',' << to_string(c.config.model.local_variant)
          << ',' << c.first_loss << ',' << c.final_loss << ',' << (c.loss_decreased ? "true" : "false") << ','
          << c.report.ar.at(100) << ',' << c.report.auc << '\n';
    }
  }
  return cells;
}

nlohmann::json ablation_to_json(const std::vector<AblationCell>& cells) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : cells) {
    arr.push_back({{"cell", c.name},
                   {"fusion", to_string(c.config.model.fusion)},
                   {"local_variant", to_string(c.config.model.local_variant)},
                   {"first_loss", c.first_loss},
                   {"final_loss", c.final_loss},
                   {"loss_decreased", c.loss_decreased},
                   {"report", report_to_json(c.report)}});
  }
  return arr;
}

RunConfig gradient_check_config() {
  RunConfig c = defaults_for_mode(RunMode::synthetic);
  c.model.length = 8;
  c.model.channels = 8;
  c.model.max_duration = 6;
  c.model.num_samples = 4;
  c.model.heads = 2;
  c.model.ffn_expansion = 2;
  c.model.head_hidden = 8;
  c.model.bm_hidden_3d = 8;
  c.model.bm_hidden_2d = 4;
  c.model.dropout = 0.0;
  c.precision = Precision::f64;
  return c;
}

GradCheckReport model_gradient_check(const RunConfig& config, const GradCheckOptions& options) {
  PrecisionScope precision(Precision::f64);
  DatasetSpec spec;
  spec.num_videos = 1;
  spec.length = config.model.length;
  spec.channels = config.model.channels;
  spec.min_instances = 1;
  spec.max_instances = 1;
  spec.min_instance_length = std::max<std::size_t>(2, config.model.length / 4);
  spec.max_instance_length = std::max<std::size_t>(2, config.model.length / 2);
  spec.noise_probability = 0.0;
  spec.seed = config.seed;
  const auto ds = synth_generate(spec);
  const auto& video = ds.videos.front();
  const Tensor features = video.features.to_tensor();
  const LabelSet labels = assign_labels(video.ground_truth, config.model.length, config.model.max_duration);

  AtagModel model(config.model, config.seed);
  // Zero-initialized biases put ReLU inputs of empty (invalid) cells exactly
  // on the kink; move every parameter to a generic point first.
  std::mt19937_64 rng(config.seed + 1);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  for (auto& e : model.params().entries()) {
    for (double& v : e.tensor.mutable_data()) v += jitter(rng);
  }
  auto loss_fn = [&] { return model_loss(model.forward(features), labels, config.loss).total; };
  return grad_check(loss_fn, model.params().entries(), options);
}

}  // namespace atag
