#include "atag/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "atag/errors.hpp"

namespace atag {
using nlohmann::json;

namespace {

void check_spec(const DatasetSpec& s) {
  if (s.length < 4) throw ConfigError("synthetic spec: length must be >= 4");
  if (s.channels < 2 || s.channels % 2 != 0) throw ConfigError("synthetic spec: channels must be even and >= 2");
  if (s.min_instances > s.max_instances) throw ConfigError("synthetic spec: min_instances > max_instances");
  if (s.min_instance_length < 1 || s.min_instance_length > s.max_instance_length) {
    throw ConfigError("synthetic spec: invalid instance length range");
  }
  // Instances live inside [1, T-1] with one background snippet between them.
  const std::size_t usable = s.length - 2;
  if (s.max_instances > 0 && s.min_instance_length > usable) {
    throw ConfigError("synthetic spec: instance length " + std::to_string(s.min_instance_length) +
                      " does not fit in T=" + std::to_string(s.length));
  }
  if (s.max_instances * s.min_instance_length + (s.max_instances > 0 ? s.max_instances - 1 : 0) > usable) {
    throw ConfigError("synthetic spec: " + std::to_string(s.max_instances) + " instances of length >= " +
                      std::to_string(s.min_instance_length) + " cannot fit in T=" +
                      std::to_string(s.length));
  }
  if (s.noise_probability < 0.0 || s.noise_probability > 1.0) {
    throw ConfigError("synthetic spec: noise_probability must be in [0, 1]");
  }
  if (s.min_noise_length > s.max_noise_length) throw ConfigError("synthetic spec: invalid noise length range");
  if (s.separation < 0.0 || s.feature_noise < 0.0) throw ConfigError("synthetic spec: negative scale");
}

}  // namespace

SyntheticDataset synth_generate(const DatasetSpec& spec) {
  check_spec(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const std::size_t c = spec.channels;
  std::vector<double> mu_b(c), dir(c), mu_a(c);
  for (auto& v : mu_b) v = normal(rng);
  double norm = 0.0;
  for (auto& v : dir) {
    v = normal(rng);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (std::size_t i = 0; i < c; ++i) mu_a[i] = mu_b[i] + spec.separation * dir[i] / norm;

  SyntheticDataset ds;
  ds.spec = spec;
  for (std::size_t v = 0; v < spec.num_videos; ++v) {
    const std::size_t t_len = spec.length;
    std::uniform_int_distribution<std::size_t> count_dist(spec.min_instances, spec.max_instances);
    std::uniform_int_distribution<std::size_t> len_dist(spec.min_instance_length,
                                                        std::min(spec.max_instance_length, t_len - 2));
    const std::size_t k = count_dist(rng);

    std::vector<std::pair<std::size_t, std::size_t>> spans;
    for (int attempt = 0; attempt < 10000 && spans.size() < k; ++attempt) {
      const std::size_t len = len_dist(rng);
      if (len + 1 > t_len - 1) continue;
      std::uniform_int_distribution<std::size_t> start_dist(1, t_len - 1 - len);
      const std::size_t s = start_dist(rng);
      const std::size_t e = s + len;
      bool clash = false;
      for (const auto& [os, oe] : spans) {
        if (s <= oe && os <= e) clash = true;  // also keeps a gap of >= 1 snippet
      }
      if (!clash) spans.emplace_back(s, e);
    }
    if (spans.size() < k) {
      throw ConfigError("synthetic spec: could not place " + std::to_string(k) +
                        " instances in T=" + std::to_string(t_len));
    }
    std::sort(spans.begin(), spans.end());

    std::vector<std::uint8_t> action(t_len, 0), noise(t_len, 0);
    for (const auto& [s, e] : spans) {
      for (std::size_t t = s; t < e; ++t) action[t] = 1;
      std::bernoulli_distribution has_noise(spec.noise_probability);
      if (!has_noise(rng) || spec.max_noise_length == 0) continue;
      std::uniform_int_distribution<std::size_t> nlen_dist(std::max<std::size_t>(1, spec.min_noise_length),
                                                           spec.max_noise_length);
      const std::size_t nlen = nlen_dist(rng);
      // Keep two clean action snippets on each side of the noise run.
      if (e - s < nlen + 4) continue;
      std::uniform_int_distribution<std::size_t> nstart_dist(s + 2, e - 2 - nlen);
      const std::size_t ns = nstart_dist(rng);
      for (std::size_t t = ns; t < ns + nlen; ++t) noise[t] = 1;
    }

    SyntheticVideo video;
    video.features.video_id = "synth_" + std::to_string(v);
    video.features.length = t_len;
    video.features.channels = c;
    video.features.frame_interval = spec.frame_interval;
    video.features.values.resize(t_len * c);
    for (std::size_t t = 0; t < t_len; ++t) {
      const auto& mu = (action[t] && !noise[t]) ? mu_a : mu_b;
      for (std::size_t ch = 0; ch < c; ++ch)
        video.features.values[t * c + ch] = mu[ch] + spec.feature_noise * normal(rng);
    }
    video.ground_truth.video_id = video.features.video_id;
    video.ground_truth.length = t_len;
    for (const auto& [s, e] : spans)
      video.ground_truth.instances.push_back({static_cast<double>(s), static_cast<double>(e), {}});
    video.noise_mask = std::move(noise);
    ds.videos.push_back(std::move(video));
  }
  return ds;
}

DatasetSpec dataset_spec_from_json(const std::string& text) {
  DatasetSpec s;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("synthetic spec: invalid JSON: ") + e.what());
  }
  static const char* known[] = {"num_videos",       "T",
                                "C",                "min_instances",
                                "max_instances",    "min_instance_length",
                                "max_instance_length", "noise_probability",
                                "min_noise_length", "max_noise_length",
                                "separation",       "feature_noise",
                                "seed",             "frame_interval"};
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
        std::end(known)) {
      throw ConfigError("synthetic spec: unknown key '" + key + "'");
    }
  }
  try {
    s.num_videos = j.value("num_videos", s.num_videos);
    s.length = j.value("T", s.length);
    s.channels = j.value("C", s.channels);
    s.min_instances = j.value("min_instances", s.min_instances);
    s.max_instances = j.value("max_instances", s.max_instances);
    s.min_instance_length = j.value("min_instance_length", s.min_instance_length);
    s.max_instance_length = j.value("max_instance_length", s.max_instance_length);
    s.noise_probability = j.value("noise_probability", s.noise_probability);
    s.min_noise_length = j.value("min_noise_length", s.min_noise_length);
    s.max_noise_length = j.value("max_noise_length", s.max_noise_length);
    s.separation = j.value("separation", s.separation);
    s.feature_noise = j.value("feature_noise", s.feature_noise);
    s.seed = j.value("seed", s.seed);
    s.frame_interval = j.value("frame_interval", s.frame_interval);
  } catch (const json::exception& e) {
    throw FormatError(std::string("synthetic spec: ") + e.what());
  }
  return s;
}

std::string dataset_spec_to_json(const DatasetSpec& s) {
  json j = {{"num_videos", s.num_videos},
            {"T", s.length},
            {"C", s.channels},
            {"min_instances", s.min_instances},
            {"max_instances", s.max_instances},
            {"min_instance_length", s.min_instance_length},
            {"max_instance_length", s.max_instance_length},
            {"noise_probability", s.noise_probability},
            {"min_noise_length", s.min_noise_length},
            {"max_noise_length", s.max_noise_length},
            {"separation", s.separation},
            {"feature_noise", s.feature_noise},
            {"seed", s.seed},
            {"frame_interval", s.frame_interval}};
  return j.dump(2);
}

void save_dataset(const SyntheticDataset& ds, const std::filesystem::path& dir) {
  std::vector<GroundTruth> gts;
  json masks = json::object();
  for (const auto& v : ds.videos) {
    save_features(v.features, dir / "features");
    gts.push_back(v.ground_truth);
    masks[v.features.video_id] = v.noise_mask;
  }
  save_annotations(gts, dir / "annotations.json");
  std::ofstream(dir / "noise_masks.json") << masks.dump() << '\n';
  std::ofstream(dir / "dataset_spec.json") << dataset_spec_to_json(ds.spec) << '\n';
}

}  // namespace atag
