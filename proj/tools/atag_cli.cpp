// Command-line front end: synth, train, infer, eval, ablate, gradcheck.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "atag/checkpoint.hpp"
#include "atag/config.hpp"
#include "atag/diagnostics.hpp"
#include "atag/errors.hpp"
#include "atag/pipeline.hpp"
#include "atag/synth.hpp"

namespace fs = std::filesystem;
using namespace atag;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string suppress;
  std::string mode;
  std::string precision;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "Flat key = value run configuration");
  cmd->add_option("--seed", f.seed, "Random seed (overrides the config)");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--suppress", f.suppress, "Proposal suppression")->check(CLI::IsMember({"nms", "soft-nms", "none"}));
  cmd->add_option("--mode", f.mode, "Dataset mode")->check(CLI::IsMember({"anet", "thumos", "synthetic"}));
  cmd->add_option("--precision", f.precision, "Storage precision")->check(CLI::IsMember({"f32", "f64"}));
}

RunConfig resolve_config(const CommonFlags& f) {
  std::optional<RunMode> mode;
  if (!f.mode.empty()) mode = parse_run_mode(f.mode);
  RunConfig c = f.config_path.empty() ? defaults_for_mode(mode.value_or(RunMode::synthetic))
                                      : load_run_config(f.config_path, mode);
  if (f.seed) c.seed = *f.seed;
  if (!f.suppress.empty()) c.suppression.method = parse_suppression(f.suppress);
  if (!f.precision.empty()) c.precision = parse_precision(f.precision);
  c.validate();
  return c;
}

void flush_warnings() {
  for (const auto& w : take_warnings()) std::cerr << "warning: " << w << '\n';
}

fs::path require_out(const CommonFlags& f) {
  if (f.out.empty()) throw ConfigError("--out is required");
  fs::create_directories(f.out);
  return f.out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal action proposal generation with global and local branches"};
  app.require_subcommand(1);

  // synth
  CommonFlags synth_flags;
  std::string spec_path;
  std::size_t synth_videos = 0;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  add_common(synth, synth_flags);
  synth->add_option("--spec", spec_path, "Dataset spec JSON");
  synth->add_option("--videos", synth_videos, "Number of videos (overrides the spec)");

  // train
  CommonFlags train_flags;
  std::string train_data, resume_path;
  std::optional<std::size_t> train_epochs;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  add_common(train_cmd, train_flags);
  train_cmd->add_option("--data", train_data, "Dataset directory (annotations.json + features/)")->required();
  train_cmd->add_option("--epochs", train_epochs, "Epoch count (overrides the config)");
  train_cmd->add_option("--resume", resume_path, "Checkpoint to continue from");

  // infer
  CommonFlags infer_flags;
  std::string infer_ckpt, infer_features;
  double fps = 0.0;
  auto* infer = app.add_subcommand("infer", "Generate proposals from a checkpoint");
  add_common(infer, infer_flags);
  infer->add_option("--checkpoint", infer_ckpt, "Checkpoint file")->required();
  infer->add_option("--features", infer_features, "Feature file or directory")->required();
  infer->add_option("--fps", fps, "Write seconds instead of snippets: t * frame_interval / fps");

  // eval
  CommonFlags eval_flags;
  std::string eval_props, eval_ann;
  auto* eval = app.add_subcommand("eval", "Evaluate a proposal file");
  add_common(eval, eval_flags);
  eval->add_option("--proposals", eval_props, "Proposal JSON-lines file")->required();
  eval->add_option("--annotations", eval_ann, "Annotation JSON file")->required();

  // ablate
  CommonFlags ablate_flags;
  std::string ablate_data;
  std::optional<std::size_t> ablate_epochs;
  auto* ablate = app.add_subcommand("ablate", "Train and compare fusion modes and local variants");
  add_common(ablate, ablate_flags);
  ablate->add_option("--data", ablate_data, "Dataset directory")->required();
  ablate->add_option("--epochs", ablate_epochs, "Epoch count per cell");

  // gradcheck
  CommonFlags gc_flags;
  double gc_tol = 1e-4;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the full loss");
  add_common(gradcheck, gc_flags);
  gradcheck->add_option("--tolerance", gc_tol, "Maximum relative error");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      DatasetSpec spec;
      if (!spec_path.empty()) {
        std::ifstream in(spec_path);
        if (!in) throw ConfigError("cannot open spec " + spec_path);
        std::stringstream ss;
        ss << in.rdbuf();
        spec = dataset_spec_from_json(ss.str());
      }
      if (synth_flags.seed) spec.seed = *synth_flags.seed;
      if (synth_videos > 0) spec.num_videos = synth_videos;
      const fs::path out = require_out(synth_flags);
      save_dataset(synth_generate(spec), out);
      std::cout << "wrote " << spec.num_videos << " videos to " << out << '\n';
    } else if (*train_cmd) {
      RunConfig cfg = resolve_config(train_flags);
      if (train_epochs) cfg.epochs = *train_epochs;
      cfg.validate();
      const fs::path out = require_out(train_flags);
      PrecisionScope precision(cfg.precision);
      const auto videos = load_dataset(train_data);
      const auto examples = prepare_examples(videos, cfg);
      AtagModel model(cfg.model, cfg.seed);
      std::optional<Checkpoint> resume;
      TrainOptions opt;
      opt.out_dir = out;
      if (!resume_path.empty()) {
        resume = load_checkpoint(resume_path);
        if (resume->config_hash != config_hash(cfg)) {
          std::cerr << "warning: resuming with a config that differs from the checkpoint's\n";
        }
        opt.resume = &*resume;
      }
      opt.on_epoch = [](const EpochLog& e) {
        std::printf("epoch %zu  loss %.6f  (com %.4f act %.4f start %.4f end %.4f)  lr %.2e  %.2fs\n", e.epoch,
                    e.total, e.completeness, e.actionness, e.start, e.end, e.learning_rate, e.seconds);
        std::fflush(stdout);
      };
      std::ofstream(out / "config.txt") << to_text(cfg);
      const TrainResult r = train(model, cfg, examples, opt);
      flush_warnings();
      if (r.halted) {
        std::cerr << "training halted: " << r.halt_reason << '\n';
        return 3;
      }
    } else if (*infer) {
      const Checkpoint ckpt = load_checkpoint(infer_ckpt);
      RunConfig cfg = ckpt.config;
      if (!infer_flags.config_path.empty()) cfg = resolve_config(infer_flags);
      if (!infer_flags.mode.empty()) cfg.mode = parse_run_mode(infer_flags.mode);
      if (!infer_flags.suppress.empty()) cfg.suppression.method = parse_suppression(infer_flags.suppress);
      if (!infer_flags.precision.empty()) cfg.precision = parse_precision(infer_flags.precision);
      const fs::path out = require_out(infer_flags);
      PrecisionScope precision(cfg.precision);
      AtagModel model(cfg.model, cfg.seed);
      apply_checkpoint(ckpt, model);
      const auto videos = load_feature_dir(infer_features);
      ProposalSet all;
      for (const auto& v : videos) {
        auto props = infer_video(model, cfg, v);
        if (fps > 0.0) {
          for (auto& p : props) {
            p.t_start *= v.frame_interval / fps;
            p.t_end *= v.frame_interval / fps;
          }
        }
        all.insert(all.end(), props.begin(), props.end());
      }
      write_proposals_jsonl(all, out / "proposals.jsonl");
      flush_warnings();
      std::cout << "wrote " << all.size() << " proposals for " << videos.size() << " videos to "
                << (out / "proposals.jsonl") << '\n';
    } else if (*eval) {
      const RunConfig cfg = resolve_config(eval_flags);
      const auto props = read_proposals_jsonl(eval_props);
      const auto gts = load_annotations(eval_ann);
      const EvalReport report = evaluate(props, gts, cfg.mode);
      flush_warnings();
      const auto j = report_to_json(report);
      if (!eval_flags.out.empty()) {
        const fs::path out = require_out(eval_flags);
        std::ofstream(out / "report.json") << j.dump(2) << '\n';
        write_ar_curve_csv(report, out / "ar_curve.csv");
      }
      std::cout << j.dump(2) << '\n';
    } else if (*ablate) {
      RunConfig cfg = resolve_config(ablate_flags);
      if (ablate_epochs) cfg.epochs = *ablate_epochs;
      cfg.checkpoint_every_epoch = false;
      const fs::path out = require_out(ablate_flags);
      const auto cells = run_ablation(cfg, load_dataset(ablate_data), out);
      flush_warnings();
      for (const auto& c : cells) {
        std::printf("%-24s loss %.4f -> %.4f  AR@100 %.2f  AUC %.2f\n", c.name.c_str(), c.first_loss, c.final_loss,
                    c.report.ar.at(100), c.report.auc);
      }
    } else if (*gradcheck) {
      RunConfig cfg = gradient_check_config();
      if (gc_flags.seed) cfg.seed = *gc_flags.seed;
      GradCheckOptions opt;
      opt.tolerance = gc_tol;
      opt.fallback_steps = {1e-6, 1e-7};
      const GradCheckReport r = model_gradient_check(cfg, opt);
      for (const auto& t : r.tensors) {
        std::printf("%-40s %6zu  max rel err %.3e\n", t.name.c_str(), t.checked, t.max_rel_error);
      }
      std::printf("%s: max rel err %.3e at %s[%zu] (analytic %.6e, numeric %.6e), %zu step refinements\n",
                  r.passed ? "PASS" : "FAIL", r.max_rel_error, r.worst_param.c_str(), r.worst_index,
                  r.worst_analytic, r.worst_numeric, r.refined);
      return r.passed ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
