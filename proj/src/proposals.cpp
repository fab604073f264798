#include "atag/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "atag/errors.hpp"

namespace atag {

double fuse_scores(const Proposal& p) { return p.p_s * p.p_e * p.p_cc * p.p_cr; }

ProposalSet enumerate_proposals(const ScoreMaps& maps, const std::string& video_id) {
  const std::size_t t_len = maps.length;
  const std::size_t d_len = maps.max_duration;
  const auto ps = maps.start.data();
  const auto pe = maps.end.data();
  const auto cc = maps.cc_map.data();
  const auto cr = maps.cr_map.data();
  ProposalSet out;
  for (std::size_t d = 0; d < d_len; ++d) {
    for (std::size_t j = 0; j < t_len; ++j) {
      const std::size_t cell = d * t_len + j;
      if (!maps.valid[cell]) continue;
      Proposal p;
      p.video_id = video_id;
      p.t_start = static_cast<double>(j);
      p.t_end = static_cast<double>(j + d + 1);
      p.p_s = ps[j];
      p.p_e = pe[std::min(j + d + 1, t_len - 1)];
      p.p_cc = cc[cell];
      p.p_cr = cr[cell];
      p.score = fuse_scores(p);
      out.push_back(std::move(p));
    }
  }
  return out;
}

bool ranks_before(const Proposal& a, const Proposal& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.t_start != b.t_start) return a.t_start < b.t_start;
  return a.t_end < b.t_end;
}

void sort_proposals(ProposalSet& props) { std::stable_sort(props.begin(), props.end(), ranks_before); }

Suppression parse_suppression(const std::string& s) {
  if (s == "none") return Suppression::none;
  if (s == "nms") return Suppression::nms;
  if (s == "soft-nms") return Suppression::soft_nms;
  throw ConfigError("unknown suppression '" + s + "' (expected nms, soft-nms or none)");
}

std::string to_string(Suppression s) {
  switch (s) {
    case Suppression::none: return "none";
    case Suppression::nms: return "nms";
    case Suppression::soft_nms: return "soft-nms";
  }
  return "?";
}

namespace {

double overlap(const Proposal& a, const Proposal& b) {
  return tiou({a.t_start, a.t_end}, {b.t_start, b.t_end});
}

}  // namespace

ProposalSet soft_nms(ProposalSet props, double sigma, double score_floor, std::size_t max_out) {
  if (!(sigma > 0.0)) throw ConfigError("soft_nms: sigma must be > 0, got " + std::to_string(sigma));
  ProposalSet kept;
  while (!props.empty() && kept.size() < max_out) {
    auto best = std::min_element(props.begin(), props.end(), ranks_before);
    if (best->score < score_floor) break;
    Proposal chosen = std::move(*best);
    props.erase(best);
    for (auto& p : props) {
      const double o = overlap(chosen, p);
      if (o > 0.0) p.score *= std::exp(-(o * o) / sigma);
    }
    kept.push_back(std::move(chosen));
  }
  return kept;
}

ProposalSet nms(ProposalSet props, double iou_threshold, std::size_t max_out) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw ConfigError("nms: threshold must lie in (0, 1], got " + std::to_string(iou_threshold));
  }
  sort_proposals(props);
  ProposalSet kept;
  for (auto& p : props) {
    if (kept.size() >= max_out) break;
    bool suppressed = false;
    for (const auto& k : kept) {
      if (overlap(k, p) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(std::move(p));
  }
  return kept;
}

ProposalSet suppress(ProposalSet props, const SuppressionOptions& opt) {
  switch (opt.method) {
    case Suppression::nms: return nms(std::move(props), opt.iou_threshold, opt.max_out);
    case Suppression::soft_nms: return soft_nms(std::move(props), opt.sigma, opt.score_floor, opt.max_out);
    case Suppression::none: break;
  }
  sort_proposals(props);
  return props;
}

void write_proposals_jsonl(const ProposalSet& props, const std::filesystem::path& path, double time_factor) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  for (const auto& p : props) {
    nlohmann::ordered_json j;
    j["video_id"] = p.video_id;
    j["t_start"] = p.t_start * time_factor;
    j["t_end"] = p.t_end * time_factor;
    j["score"] = p.score;
    j["p_s"] = p.p_s;
    j["p_e"] = p.p_e;
    j["p_cc"] = p.p_cc;
    j["p_cr"] = p.p_cr;
    if (!p.label.empty()) j["label"] = p.label;
    out << j.dump() << '\n';
  }
}

ProposalSet read_proposals_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open proposal file " + path.string());
  ProposalSet out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Proposal p;
      p.video_id = j.at("video_id").get<std::string>();
      p.t_start = j.at("t_start").get<double>();
      p.t_end = j.at("t_end").get<double>();
      p.score = j.at("score").get<double>();
      p.p_s = j.value("p_s", 0.0);
      p.p_e = j.value("p_e", 0.0);
      p.p_cc = j.value("p_cc", 0.0);
      p.p_cr = j.value("p_cr", 0.0);
      p.label = j.value("label", std::string{});
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

RankedProposals rank_by_video(const ProposalSet& props) {
  RankedProposals r;
  for (const auto& p : props) r[p.video_id].push_back({p.t_start, p.t_end, p.score, p.label});
  return r;
}

}  // namespace atag
