#include "atag/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "atag/errors.hpp"

namespace atag {
namespace {

constexpr char kMagic[8] = {'A', 'T', 'A', 'G', 'C', 'K', 'P', 'T'};

template <typename U>
void put_le(std::string& buf, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

void put_doubles(std::string& buf, const std::vector<double>& v) {
  for (double d : v) put_le<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(d));
}

std::string hex64(std::uint64_t v) {
  char b[17];
  std::snprintf(b, sizeof b, "%016llx", static_cast<unsigned long long>(v));
  return b;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const AtagModel& model, const RunConfig& config,
                     std::size_t epoch, const OptimState* optimizer, const std::string& rng_state) {
  nlohmann::ordered_json header;
  header["format_version"] = kCheckpointVersion;
  header["config_hash"] = hex64(config_hash(config));
  header["epoch"] = epoch;
  header["config"] = to_text(config);
  header["rng_state"] = rng_state;
  std::string payload;
  std::size_t offset = 0;
  nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
  for (const auto& e : model.params().entries()) {
    const auto d = e.tensor.data();
    manifest.push_back({{"name", e.name}, {"shape", e.tensor.shape()}, {"offset", offset}, {"count", d.size()}});
    put_doubles(payload, std::vector<double>(d.begin(), d.end()));
    offset += d.size();
  }
  header["tensors"] = manifest;
  if (optimizer) {
    header["optimizer"] = {{"step", optimizer->step}, {"offset", offset}};
    for (const auto& m : optimizer->first_moment) put_doubles(payload, m);
    for (const auto& m : optimizer->second_moment) put_doubles(payload, m);
  }
  const std::string text = header.dump();

  std::string buf(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(buf, kCheckpointVersion);
  put_le<std::uint64_t>(buf, text.size());
  buf += text;
  buf += payload;

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write checkpoint " + tmp.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw FormatError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* bytes = reinterpret_cast<const unsigned char*>(buf.data());
  const std::size_t fixed = sizeof kMagic + 4 + 8;
  if (buf.size() < fixed || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError(path.string() + ": not a checkpoint file");
  }
  const auto version = get_le<std::uint32_t>(bytes + 8);
  if (version != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_size = get_le<std::uint64_t>(bytes + 12);
  if (buf.size() < fixed + header_size) throw FormatError(path.string() + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buf.substr(fixed, header_size));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad header: " + e.what());
  }
  const unsigned char* payload = bytes + fixed + header_size;
  const std::size_t payload_doubles = (buf.size() - fixed - header_size) / 8;
  auto read_doubles = [&](std::size_t offset, std::size_t count) {
    if (offset + count > payload_doubles) throw FormatError(path.string() + ": truncated payload");
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i) {
      v[i] = std::bit_cast<double>(get_le<std::uint64_t>(payload + 8 * (offset + i)));
    }
    return v;
  };

  Checkpoint c;
  try {
    c.config = parse_run_config(header.at("config").get<std::string>());
    c.config_hash = std::stoull(header.at("config_hash").get<std::string>(), nullptr, 16);
    c.epoch = header.at("epoch").get<std::size_t>();
    c.rng_state = header.value("rng_state", std::string{});
    for (const auto& t : header.at("tensors")) {
      Checkpoint::TensorData d;
      d.name = t.at("name").get<std::string>();
      d.shape = t.at("shape").get<Shape>();
      d.values = read_doubles(t.at("offset").get<std::size_t>(), t.at("count").get<std::size_t>());
      c.tensors.push_back(std::move(d));
    }
    if (header.contains("optimizer")) {
      c.has_optimizer = true;
      c.optimizer.step = header["optimizer"].at("step").get<std::uint64_t>();
      c.optimizer.config = c.config.optim;
      std::size_t off = header["optimizer"].at("offset").get<std::size_t>();
      for (int pass = 0; pass < 2; ++pass) {
        auto& dst = pass == 0 ? c.optimizer.first_moment : c.optimizer.second_moment;
        for (const auto& t : c.tensors) {
          dst.push_back(read_doubles(off, t.values.size()));
          off += t.values.size();
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed header: " + e.what());
  }
  if (c.config_hash != config_hash(c.config)) {
    throw FormatError(path.string() + ": config hash does not match the stored config");
  }
  return c;
}

void apply_checkpoint(const Checkpoint& ckpt, AtagModel& model) {
  auto& entries = model.params().entries();
  if (entries.size() != ckpt.tensors.size()) {
    throw ConfigError("checkpoint has " + std::to_string(ckpt.tensors.size()) + " tensors, model has " +
                      std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& src = ckpt.tensors[i];
    Tensor& dst = entries[i].tensor;
    if (src.name != entries[i].name || src.shape != dst.shape()) {
      throw ConfigError("checkpoint tensor " + src.name + " " + shape_to_string(src.shape) +
                        " does not match model tensor " + entries[i].name + " " + shape_to_string(dst.shape()));
    }
    auto data = dst.mutable_data();
    std::copy(src.values.begin(), src.values.end(), data.begin());
  }
}

}  // namespace atag
