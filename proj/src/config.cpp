#include "atag/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "atag/errors.hpp"

namespace atag {

std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::anet: return "anet";
    case RunMode::thumos: return "thumos";
    case RunMode::synthetic: return "synthetic";
  }
  return "?";
}

RunMode parse_run_mode(const std::string& s) {
  if (s == "anet") return RunMode::anet;
  if (s == "thumos") return RunMode::thumos;
  if (s == "synthetic") return RunMode::synthetic;
  throw ConfigError("unknown mode '" + s + "' (expected anet, thumos or synthetic)");
}

std::string to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

Precision parse_precision(const std::string& s) {
  if (s == "f32") return Precision::f32;
  if (s == "f64") return Precision::f64;
  throw ConfigError("unknown precision '" + s + "' (expected f32 or f64)");
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
  if (!v.empty() && v.find_first_not_of("0123456789") == std::string::npos) {
    try {
      return std::stoull(v);
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Get>
Field size_field(const std::string& key, Get member) {
  return {[key, member](RunConfig& c, const std::string& v) { member(c) = parse_unsigned(key, v); },
          [member](const RunConfig& c) { return std::to_string(member(c)); }};
}

template <typename Get>
Field double_field(const std::string& key, Get member) {
  return {[key, member](RunConfig& c, const std::string& v) { member(c) = parse_double(key, v); },
          [member](const RunConfig& c) { return fmt_double(member(c)); }};
}

template <typename Get>
Field bool_field(const std::string& key, Get member) {
  return {[key, member](RunConfig& c, const std::string& v) { member(c) = parse_bool(key, v); },
          [member](const RunConfig& c) { return std::string(member(c) ? "true" : "false"); }};
}

#define ATAG_REF(expr) [](auto& c) -> auto& { return expr; }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> f;
    f["mode"] = {[](RunConfig& c, const std::string& v) { c.mode = parse_run_mode(v); },
                 [](const RunConfig& c) { return to_string(c.mode); }};
    f["length"] = size_field("length", ATAG_REF(c.model.length));
    f["channels"] = size_field("channels", ATAG_REF(c.model.channels));
    f["max_duration"] = size_field("max_duration", ATAG_REF(c.model.max_duration));
    f["num_samples"] = size_field("num_samples", ATAG_REF(c.model.num_samples));
    f["heads"] = size_field("heads", ATAG_REF(c.model.heads));
    f["transformer_layers"] = size_field("transformer_layers", ATAG_REF(c.model.transformer_layers));
    f["ffn_expansion"] = size_field("ffn_expansion", ATAG_REF(c.model.ffn_expansion));
    f["front_kernel"] = size_field("front_kernel", ATAG_REF(c.model.front_kernel));
    f["delta"] = size_field("delta", ATAG_REF(c.model.delta));
    f["head_hidden"] = size_field("head_hidden", ATAG_REF(c.model.head_hidden));
    f["bm_hidden_3d"] = size_field("bm_hidden_3d", ATAG_REF(c.model.bm_hidden_3d));
    f["bm_hidden_2d"] = size_field("bm_hidden_2d", ATAG_REF(c.model.bm_hidden_2d));
    f["dropout"] = double_field("dropout", ATAG_REF(c.model.dropout));
    f["use_transformer"] = bool_field("use_transformer", ATAG_REF(c.model.use_transformer));
    f["use_front_block"] = bool_field("use_front_block", ATAG_REF(c.model.use_front_block));
    f["use_positional_encoding"] = bool_field("use_positional_encoding", ATAG_REF(c.model.use_positional_encoding));
    f["fusion"] = {[](RunConfig& c, const std::string& v) { c.model.fusion = parse_fusion_mode(v); },
                   [](const RunConfig& c) { return to_string(c.model.fusion); }};
    f["local_variant"] = {[](RunConfig& c, const std::string& v) { c.model.local_variant = parse_local_variant(v); },
                          [](const RunConfig& c) { return to_string(c.model.local_variant); }};
    f["loss_regression_weight"] = double_field("loss_regression_weight", ATAG_REF(c.loss.regression));
    f["loss_actionness_weight"] = double_field("loss_actionness_weight", ATAG_REF(c.loss.actionness));
    f["loss_start_weight"] = double_field("loss_start_weight", ATAG_REF(c.loss.start));
    f["loss_end_weight"] = double_field("loss_end_weight", ATAG_REF(c.loss.end));
    f["positive_threshold"] = double_field("positive_threshold", ATAG_REF(c.loss.positive_threshold));
    f["lr"] = double_field("lr", ATAG_REF(c.optim.lr));
    f["beta1"] = double_field("beta1", ATAG_REF(c.optim.beta1));
    f["beta2"] = double_field("beta2", ATAG_REF(c.optim.beta2));
    f["adam_eps"] = double_field("adam_eps", ATAG_REF(c.optim.eps));
    f["lr_decay"] = double_field("lr_decay", ATAG_REF(c.optim.decay_factor));
    f["lr_decay_period"] = {[](RunConfig& c, const std::string& v) {
                              c.optim.decay_period = static_cast<int>(parse_unsigned("lr_decay_period", v));
                            },
                            [](const RunConfig& c) { return std::to_string(c.optim.decay_period); }};
    f["epochs"] = size_field("epochs", ATAG_REF(c.epochs));
    f["batch_size"] = size_field("batch_size", ATAG_REF(c.batch_size));
    f["seed"] = size_field("seed", ATAG_REF(c.seed));
    f["precision"] = {[](RunConfig& c, const std::string& v) { c.precision = parse_precision(v); },
                      [](const RunConfig& c) { return to_string(c.precision); }};
    f["window_overlap_percent"] = size_field("window_overlap_percent", ATAG_REF(c.window_overlap_percent));
    f["suppress"] = {[](RunConfig& c, const std::string& v) { c.suppression.method = parse_suppression(v); },
                     [](const RunConfig& c) { return to_string(c.suppression.method); }};
    f["soft_nms_sigma"] = double_field("soft_nms_sigma", ATAG_REF(c.suppression.sigma));
    f["soft_nms_floor"] = double_field("soft_nms_floor", ATAG_REF(c.suppression.score_floor));
    f["nms_threshold"] = double_field("nms_threshold", ATAG_REF(c.suppression.iou_threshold));
    f["max_proposals"] = size_field("max_proposals", ATAG_REF(c.suppression.max_out));
    f["checkpoint_every_epoch"] = bool_field("checkpoint_every_epoch", ATAG_REF(c.checkpoint_every_epoch));
    return f;
  }();
  return table;
}

#undef ATAG_REF

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  auto fail = [](const std::string& msg) { throw ConfigError("run config: " + msg); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (loss.regression < 0 || loss.actionness < 0 || loss.start < 0 || loss.end < 0) {
    fail("loss weights must be nonnegative");
  }
  if (!(loss.positive_threshold >= 0.0 && loss.positive_threshold < 1.0)) fail("positive_threshold must be in [0, 1)");
  if (!(optim.lr > 0.0)) fail("lr must be > 0");
  if (!(optim.beta1 >= 0.0 && optim.beta1 < 1.0) || !(optim.beta2 >= 0.0 && optim.beta2 < 1.0)) {
    fail("Adam betas must be in [0, 1)");
  }
  if (!(optim.eps > 0.0)) fail("adam_eps must be > 0");
  if (!(optim.decay_factor > 0.0 && optim.decay_factor <= 1.0)) fail("lr_decay must be in (0, 1]");
  if (window_overlap_percent >= 100) fail("window_overlap_percent must be < 100");
  if (!(suppression.sigma > 0.0)) fail("soft_nms_sigma must be > 0");
  if (!(suppression.iou_threshold > 0.0 && suppression.iou_threshold <= 1.0)) fail("nms_threshold must be in (0, 1]");
  if (suppression.max_out < 1) fail("max_proposals must be >= 1");
}

RunConfig defaults_for_mode(RunMode mode) {
  RunConfig c;
  c.mode = mode;
  switch (mode) {
    case RunMode::anet:
      c.model.length = 100;
      c.model.max_duration = 100;
      break;
    case RunMode::thumos:
      c.model.length = 128;
      c.model.max_duration = 64;
      c.suppression.max_out = kMaxProposalsDetection;
      break;
    case RunMode::synthetic:
      // Eight videos give eight steps per epoch; the 10-epoch decay of the
      // full-size datasets would stop learning after ~80 steps.
      c.optim.decay_period = 100;
      break;
  }
  if (mode != RunMode::synthetic) {
    c.model.channels = 400;
    c.model.head_hidden = 256;
    c.model.bm_hidden_3d = 512;
    c.model.bm_hidden_2d = 128;
  }
  return c;
}

RunConfig parse_run_config(const std::string& text, std::optional<RunMode> mode_override) {
  std::vector<std::pair<std::string, std::string>> kv;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!fields().count(key)) throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("config: duplicate key '" + key + "'");
    kv.emplace_back(std::move(key), std::move(value));
  }
  RunMode mode = RunMode::synthetic;
  for (const auto& [k, v] : kv) {
    if (k == "mode") mode = parse_run_mode(v);
  }
  if (mode_override) mode = *mode_override;
  RunConfig c = defaults_for_mode(mode);
  for (const auto& [k, v] : kv) {
    if (k != "mode") fields().at(k).set(c, v);
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, std::optional<RunMode> mode_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), mode_override);
}

std::string to_text(const RunConfig& c) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(c) + "\n";
  return out;
}

std::uint64_t config_hash(const RunConfig& c) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : to_text(c)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace atag
