#include "atag/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "atag/errors.hpp"
#include "atag/ops.hpp"

namespace atag {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kMetaSuffix = ".meta.json";

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string stem_of_meta(const fs::path& meta) {
  const std::string name = meta.filename().string();
  return name.substr(0, name.size() - std::string(kMetaSuffix).size());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": invalid JSON: " + e.what());
  }
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

std::vector<std::vector<double>> read_csv_rows(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": not a number: '" +
                          cell + "'");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

FeatureSequence from_rows(const std::vector<std::vector<double>>& rows, const fs::path& path,
                          std::size_t expect_t, std::size_t expect_c) {
  if (rows.size() != expect_t) {
    throw FormatError(path.string() + ": expected " + std::to_string(expect_t) + " rows, found " +
                      std::to_string(rows.size()));
  }
  FeatureSequence f;
  f.length = expect_t;
  f.channels = expect_c;
  f.values.reserve(expect_t * expect_c);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (rows[t].size() != expect_c) {
      throw FormatError(path.string() + ": row " + std::to_string(t + 1) + " has " +
                        std::to_string(rows[t].size()) + " columns, expected " +
                        std::to_string(expect_c));
    }
    f.values.insert(f.values.end(), rows[t].begin(), rows[t].end());
  }
  return f;
}

}  // namespace

Tensor FeatureSequence::to_tensor() const { return Tensor::from({length, channels}, values); }

void FeatureSequence::validate() const {
  if (values.size() != length * channels) {
    throw FormatError(video_id + ": feature buffer holds " + std::to_string(values.size()) +
                      " values, expected " + std::to_string(length) + "x" +
                      std::to_string(channels));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw DataError(video_id + ": non-finite feature at snippet " +
                      std::to_string(i / channels) + ", channel " + std::to_string(i % channels));
    }
  }
}

void GroundTruth::validate() const {
  for (const auto& inst : instances) {
    if (!(inst.start >= 0.0 && inst.start < inst.end && inst.end <= static_cast<double>(length))) {
      throw DataError(video_id + ": instance (" + std::to_string(inst.start) + ", " +
                      std::to_string(inst.end) + ") outside [0, " + std::to_string(length) + "]");
    }
  }
}

FeatureSequence load_features(const fs::path& path) {
  const std::string name = path.filename().string();
  if (!ends_with(name, kMetaSuffix)) {
    if (path.extension() != ".csv") {
      throw FormatError(path.string() + ": expected a .meta.json sidecar or a .csv payload");
    }
    const auto rows = read_csv_rows(path);
    if (rows.empty()) throw FormatError(path.string() + ": empty feature file");
    FeatureSequence f = from_rows(rows, path, rows.size(), rows.front().size());
    f.video_id = path.stem().string();
    f.validate();
    return f;
  }

  const json meta = read_json(path);
  std::size_t t_len = 0, c = 0;
  FeatureSequence f;
  try {
    f.video_id = meta.at("video_id").get<std::string>();
    t_len = meta.at("T").get<std::size_t>();
    c = meta.at("C").get<std::size_t>();
    f.frame_interval = meta.value("frame_interval", 1);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad metadata: " + e.what());
  }

  const fs::path dir = path.parent_path();
  const std::string stem = stem_of_meta(path);
  const fs::path bin = dir / (stem + ".bin");
  const fs::path csv = dir / (stem + ".csv");
  if (fs::exists(bin)) {
    const auto bytes = fs::file_size(bin);
    if (bytes != t_len * c * sizeof(float)) {
      throw FormatError(bin.string() + ": holds " + std::to_string(bytes) + " bytes, metadata says " +
                        std::to_string(t_len) + "x" + std::to_string(c) + " float32");
    }
    std::ifstream in(bin, std::ios::binary);
    std::vector<std::uint32_t> raw(t_len * c);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw FormatError(bin.string() + ": short read");
    f.values.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
      f.values[i] = static_cast<double>(std::bit_cast<float>(to_little_endian(raw[i])));
    f.length = t_len;
    f.channels = c;
  } else if (fs::exists(csv)) {
    FeatureSequence rows = from_rows(read_csv_rows(csv), csv, t_len, c);
    f.length = rows.length;
    f.channels = rows.channels;
    f.values = std::move(rows.values);
  } else {
    throw FormatError(path.string() + ": no payload (" + bin.filename().string() + " or " +
                      csv.filename().string() + ")");
  }
  f.validate();
  return f;
}

fs::path save_features(const FeatureSequence& f, const fs::path& dir, PayloadFormat format) {
  f.validate();
  fs::create_directories(dir);
  const fs::path meta_path = dir / (f.video_id + kMetaSuffix);
  json meta = {{"video_id", f.video_id},
               {"T", f.length},
               {"C", f.channels},
               {"frame_interval", f.frame_interval}};
  std::ofstream(meta_path) << meta.dump(2) << '\n';
  if (format == PayloadFormat::binary) {
    std::ofstream out(dir / (f.video_id + ".bin"), std::ios::binary);
    for (double v : f.values) {
      const std::uint32_t word = to_little_endian(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      out.write(reinterpret_cast<const char*>(&word), sizeof(word));
    }
  } else {
    std::ofstream out(dir / (f.video_id + ".csv"));
    out.precision(17);
    for (std::size_t t = 0; t < f.length; ++t) {
      for (std::size_t c = 0; c < f.channels; ++c) {
        if (c) out << ',';
        out << f.at(t, c);
      }
      out << '\n';
    }
  }
  return meta_path;
}

std::vector<GroundTruth> load_annotations(const fs::path& path) {
  const json doc = read_json(path);
  if (!doc.is_array()) throw FormatError(path.string() + ": annotations must be a JSON array");
  std::vector<GroundTruth> out;
  try {
    for (const auto& item : doc) {
      GroundTruth gt;
      gt.video_id = item.at("video_id").get<std::string>();
      gt.length = item.at("T").get<std::size_t>();
      for (const auto& inst : item.at("instances")) {
        ActionInstance a;
        a.start = inst.at("start").get<double>();
        a.end = inst.at("end").get<double>();
        a.label = inst.value("label", std::string{});
        gt.instances.push_back(std::move(a));
      }
      gt.validate();
      out.push_back(std::move(gt));
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad annotation entry: " + e.what());
  }
  return out;
}

void save_annotations(const std::vector<GroundTruth>& gts, const fs::path& path) {
  json doc = json::array();
  for (const auto& gt : gts) {
    json instances = json::array();
    for (const auto& inst : gt.instances) {
      json j = {{"start", inst.start}, {"end", inst.end}};
      if (!inst.label.empty()) j["label"] = inst.label;
      instances.push_back(std::move(j));
    }
    doc.push_back({{"video_id", gt.video_id}, {"T", gt.length}, {"instances", std::move(instances)}});
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream(path) << doc.dump(2) << '\n';
}

FeatureSequence resize_linear(const FeatureSequence& f, std::size_t target_length) {
  if (target_length < 2) throw ConfigError("resize_linear: target length must be >= 2");
  if (f.length < 2) throw ConfigError("resize_linear: input length must be >= 2");
  FeatureSequence out = f;
  out.length = target_length;
  out.values.assign(target_length * f.channels, 0.0);
  out.time_scale = f.time_scale * static_cast<double>(f.length) / static_cast<double>(target_length);
  const double span = static_cast<double>(f.length - 1);
  for (std::size_t k = 0; k < target_length; ++k) {
    const double pos = static_cast<double>(k) * span / static_cast<double>(target_length - 1);
    std::size_t i0 = static_cast<std::size_t>(std::floor(pos));
    if (i0 >= f.length - 1) i0 = f.length - 1;
    const double frac = pos - static_cast<double>(i0);
    for (std::size_t c = 0; c < f.channels; ++c) {
      const double a = f.at(i0, c);
      out.values[k * f.channels + c] =
          frac == 0.0 ? a : (1.0 - frac) * a + frac * f.at(i0 + 1, c);
    }
  }
  return out;
}

std::pair<FeatureSequence, GroundTruth> resize_linear(const FeatureSequence& f,
                                                      const GroundTruth& gt,
                                                      std::size_t target_length) {
  FeatureSequence out = resize_linear(f, target_length);
  GroundTruth g = gt;
  const double ratio = static_cast<double>(target_length) / static_cast<double>(f.length);
  g.length = target_length;
  for (auto& inst : g.instances) {
    inst.start *= ratio;
    inst.end = std::min(inst.end * ratio, static_cast<double>(target_length));
  }
  return {std::move(out), std::move(g)};
}

std::vector<Window> window_video(const FeatureSequence& f, const GroundTruth& gt,
                                 std::size_t window_length, double overlap) {
  if (window_length < 4) throw ConfigError("window_video: window length must be >= 4");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("window_video: overlap must be in [0, 1)");
  const std::size_t stride =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(window_length * (1.0 - overlap))));

  std::vector<std::size_t> offsets;
  if (f.length <= window_length) {
    offsets.push_back(0);
  } else {
    std::size_t off = 0;
    while (true) {
      offsets.push_back(off);
      if (off + window_length >= f.length) break;
      off += stride;
      if (off + window_length > f.length) {
        offsets.push_back(f.length - window_length);
        break;
      }
    }
  }

  std::vector<Window> windows;
  for (std::size_t off : offsets) {
    Window w;
    w.features = f;
    w.features.length = window_length;
    w.features.origin_offset = f.origin_offset + off;
    w.features.values.assign(window_length * f.channels, 0.0);
    const std::size_t avail = std::min(window_length, f.length - off);
    std::copy_n(f.values.begin() + static_cast<std::ptrdiff_t>(off * f.channels),
                avail * f.channels, w.features.values.begin());

    w.ground_truth.video_id = gt.video_id;
    w.ground_truth.length = window_length;
    const double lo = static_cast<double>(off);
    const double hi = static_cast<double>(off + avail);
    for (const auto& inst : gt.instances) {
      const double s = std::max(inst.start, lo);
      const double e = std::min(inst.end, hi);
      if (e - s < 1.0) continue;
      w.ground_truth.instances.push_back({s - lo, e - lo, inst.label});
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& f) {
  if (f.rank() != 2) throw DimensionError("split_channels: expected a T x C matrix");
  const std::size_t c = f.dim(1);
  if (c % 2 != 0) {
    throw ConfigError("split_channels: channel count " + std::to_string(c) + " is odd");
  }
  return {slice_lastdim(f, 0, c / 2), slice_lastdim(f, c / 2, c / 2)};
}

std::pair<Tensor, Tensor> split_channels(const FeatureSequence& f) {
  if (f.channels % 2 != 0) {
    throw ConfigError("split_channels: channel count " + std::to_string(f.channels) + " is odd");
  }
  return split_channels(f.to_tensor());
}

}  // namespace atag
