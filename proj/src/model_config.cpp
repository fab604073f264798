#include "atag/model_config.hpp"

#include "atag/errors.hpp"

namespace atag {

std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::concat: return "concat";
    case FusionMode::sum: return "sum";
    case FusionMode::late: return "late";
  }
  return "?";
}

std::string to_string(LocalVariant v) {
  switch (v) {
    case LocalVariant::adaptive: return "adaptive";
    case LocalVariant::general_gcn: return "general-gcn";
    case LocalVariant::self_attn_gcn: return "self-attn-gcn";
    case LocalVariant::conv: return "conv";
  }
  return "?";
}

FusionMode parse_fusion_mode(const std::string& s) {
  if (s == "concat") return FusionMode::concat;
  if (s == "sum") return FusionMode::sum;
  if (s == "late") return FusionMode::late;
  throw ConfigError("unknown fusion mode '" + s + "' (expected concat, sum or late)");
}

LocalVariant parse_local_variant(const std::string& s) {
  if (s == "adaptive") return LocalVariant::adaptive;
  if (s == "general-gcn") return LocalVariant::general_gcn;
  if (s == "self-attn-gcn") return LocalVariant::self_attn_gcn;
  if (s == "conv") return LocalVariant::conv;
  throw ConfigError("unknown local variant '" + s +
                    "' (expected adaptive, general-gcn, self-attn-gcn or conv)");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
  if (length < 4) fail("T must be >= 4");
  if (channels < 4 || channels % 2 != 0) fail("C must be even and >= 4");
  const std::size_t cg = global_channels(), cl = local_channels();
  if (max_duration < 1 || max_duration > length) fail("D must be in [1, T]");
  if (num_samples < 2) fail("num_samples must be >= 2");
  if (delta >= length) fail("delta must be < T");
  if (heads == 0 || cg % heads != 0) {
    fail("heads (" + std::to_string(heads) + ") must divide the global width " + std::to_string(cg));
  }
  if (cg % 2 != 0) fail("global width must be even for the positional encoding");
  if (cg % 4 != 0) fail("global width must be divisible by 4 (grouped actionness conv)");
  if (head_hidden == 0 || head_hidden % 4 != 0) fail("head_hidden must be a positive multiple of 4");
  if (front_kernel % 2 == 0) fail("front_kernel must be odd");
  if (transformer_layers < 1) fail("transformer_layers must be >= 1");
  if (ffn_expansion < 1) fail("ffn_expansion must be >= 1");
  if (bm_hidden_3d < 2 || bm_hidden_2d < 2) fail("completeness widths must be >= 2");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must be in [0, 1)");
  switch (fusion) {
    case FusionMode::concat:
      if ((cg + cl) % 4 != 0) fail("fused width must be divisible by 4");
      break;
    case FusionMode::sum:
      if (cg != cl) fail("sum fusion needs equal branch widths");
      break;
    case FusionMode::late:
      if (cl % 4 != 0) fail("late fusion needs the local width divisible by 4");
      if ((head_hidden / 2) % 4 != 0) fail("late fusion needs head_hidden divisible by 8");
      if (bm_hidden_3d % 2 != 0 || bm_hidden_2d % 2 != 0) fail("late fusion needs even completeness widths");
      break;
  }
}

}  // namespace atag
