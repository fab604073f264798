#include "atag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "atag/errors.hpp"

namespace atag {

double tiou(const Interval& a, const Interval& b) {
  if (!(a.end > a.start) || !(b.end > b.start)) {
    throw DataError("tiou: degenerate interval (" + std::to_string(a.start) + ", " +
                    std::to_string(a.end) + ") vs (" + std::to_string(b.start) + ", " +
                    std::to_string(b.end) + ")");
  }
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
  return inter / uni;
}

namespace {

std::vector<double> threshold_range(double lo, double hi) {
  std::vector<double> t;
  for (int k = 0; lo + 0.05 * k <= hi + 1e-9; ++k) t.push_back(std::round((lo + 0.05 * k) * 100.0) / 100.0);
  return t;
}

// Best tIoU of each instance over the first `an` proposals.
std::vector<double> best_overlaps(const std::vector<ScoredInterval>& props, const GroundTruth& gt,
                                  std::size_t an) {
  std::vector<double> best(gt.instances.size(), 0.0);
  const std::size_t n = std::min(an, props.size());
  for (std::size_t g = 0; g < gt.instances.size(); ++g) {
    const Interval gi{gt.instances[g].start, gt.instances[g].end};
    for (std::size_t k = 0; k < n; ++k) best[g] = std::max(best[g], tiou({props[k].start, props[k].end}, gi));
  }
  return best;
}

}  // namespace

std::vector<double> activitynet_thresholds() { return threshold_range(0.5, 0.95); }
std::vector<double> thumos_thresholds() { return threshold_range(0.5, 1.0); }

double ar_at_an(const RankedProposals& proposals, const std::vector<GroundTruth>& gts,
                std::size_t an, const std::vector<double>& thresholds) {
  if (thresholds.empty()) throw ConfigError("ar_at_an: no thresholds");
  std::size_t total = 0;
  std::vector<std::size_t> matched(thresholds.size(), 0);
  static const std::vector<ScoredInterval> none;
  for (const auto& gt : gts) {
    if (gt.instances.empty()) continue;
    total += gt.instances.size();
    const auto it = proposals.find(gt.video_id);
    const auto best = best_overlaps(it == proposals.end() ? none : it->second, gt, an);
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      for (double b : best) matched[t] += b >= thresholds[t] ? 1 : 0;
    }
  }
  if (total == 0) return 0.0;
  double sum = 0.0;
  for (auto m : matched) sum += static_cast<double>(m) / static_cast<double>(total);
  return sum / static_cast<double>(thresholds.size());
}

std::vector<double> ar_curve(const RankedProposals& proposals, const std::vector<GroundTruth>& gts,
                             const std::vector<double>& thresholds, std::size_t max_an) {
  std::vector<double> curve;
  curve.reserve(max_an);
  for (std::size_t an = 1; an <= max_an; ++an) curve.push_back(ar_at_an(proposals, gts, an, thresholds));
  return curve;
}

double auc_from_curve(const std::vector<double>& curve) {
  if (curve.size() < 2) return curve.empty() ? 0.0 : 100.0 * curve[0];
  double area = 0.0;
  for (std::size_t k = 1; k < curve.size(); ++k) area += 0.5 * (curve[k - 1] + curve[k]);
  return 100.0 * area / static_cast<double>(curve.size() - 1);
}

double auc(const RankedProposals& proposals, const std::vector<GroundTruth>& gts,
           const std::vector<double>& thresholds, std::size_t max_an) {
  return auc_from_curve(ar_curve(proposals, gts, thresholds, max_an));
}

double average_precision(std::vector<Detection> dets, const std::vector<GroundTruth>& gts,
                         const std::string& label, double threshold) {
  std::map<std::string, std::vector<Interval>> truth;
  std::size_t positives = 0;
  for (const auto& gt : gts) {
    for (const auto& inst : gt.instances) {
      if (inst.label != label) continue;
      truth[gt.video_id].push_back({inst.start, inst.end});
      ++positives;
    }
  }
  std::erase_if(dets, [&](const Detection& d) { return d.label != label; });
  if (positives == 0 || dets.empty()) return 0.0;
  std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.start != b.start) return a.start < b.start;
    return a.end < b.end;
  });
  std::map<std::string, std::vector<bool>> used;
  for (const auto& [vid, v] : truth) used[vid].assign(v.size(), false);

  std::vector<double> precision, recall;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < dets.size(); ++k) {
    const auto& d = dets[k];
    const auto it = truth.find(d.video_id);
    if (it != truth.end()) {
      auto& u = used[d.video_id];
      std::size_t best = it->second.size();
      double best_iou = -1.0;
      for (std::size_t g = 0; g < it->second.size(); ++g) {
        if (u[g]) continue;
        const double o = tiou({d.start, d.end}, it->second[g]);
        if (o >= threshold && o > best_iou) {
          best_iou = o;
          best = g;
        }
      }
      if (best < it->second.size()) {
        u[best] = true;
        ++tp;
      }
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(positives));
  }
  for (std::size_t k = precision.size() - 1; k-- > 0;) precision[k] = std::max(precision[k], precision[k + 1]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t k = 0; k < precision.size(); ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

MapResult map_detection(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                        const std::vector<double>& thresholds) {
  std::set<std::string> classes;
  for (const auto& gt : gts)
    for (const auto& inst : gt.instances) classes.insert(inst.label);
  for (const auto& d : dets) classes.insert(d.label);
  MapResult r;
  r.thresholds = thresholds;
  for (double t : thresholds) {
    double sum = 0.0;
    for (const auto& c : classes) sum += average_precision(dets, gts, c, t);
    r.map.push_back(classes.empty() ? 0.0 : sum / static_cast<double>(classes.size()));
  }
  double total = 0.0;
  for (double m : r.map) total += m;
  r.average = r.map.empty() ? 0.0 : total / static_cast<double>(r.map.size());
  return r;
}

EvalReport evaluate_proposals(const RankedProposals& proposals, const std::vector<GroundTruth>& gts,
                              const std::vector<double>& thresholds) {
  EvalReport r;
  const auto curve = ar_curve(proposals, gts, thresholds, 100);
  for (double c : curve) r.curve.push_back(100.0 * c);
  for (std::size_t an : {1, 5, 10, 50, 100}) r.ar[an] = 100.0 * curve[an - 1];
  r.auc = auc_from_curve(curve);
  return r;
}

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  for (const auto& [an, v] : r.ar) j["AR@" + std::to_string(an)] = v;
  j["AUC"] = r.auc;
  if (r.map) {
    nlohmann::json m = nlohmann::json::object();
    for (std::size_t k = 0; k < r.map->thresholds.size(); ++k) {
      char key[16];
      std::snprintf(key, sizeof key, "%.2f", r.map->thresholds[k]);
      m[key] = 100.0 * r.map->map[k];
    }
    j["mAP"] = m;
    j["average_mAP"] = 100.0 * r.map->average;
  }
  return j;
}

void write_ar_curve_csv(const EvalReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "an,ar\n";
  for (std::size_t k = 0; k < r.curve.size(); ++k) out << (k + 1) << ',' << r.curve[k] << '\n';
}

}  // namespace atag
