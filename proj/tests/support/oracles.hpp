#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Each one is written from the definition (loops, dense sampling,
// exhaustive search) rather than from the library code it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "atag/features.hpp"
#include "atag/proposals.hpp"

namespace oracle {

// --- linear algebra ----------------------------------------------------------

inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                                  std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) c[i * n + j] += a[i * k + p] * b[p * n + j];
  return c;
}

// --- intervals ---------------------------------------------------------------

// Overlap length by case analysis rather than min/max clipping.
inline double overlap_length(double a0, double a1, double b0, double b1) {
  if (a1 <= b0 || b1 <= a0) return 0.0;
  if (a0 <= b0 && b1 <= a1) return b1 - b0;
  if (b0 <= a0 && a1 <= b1) return a1 - a0;
  if (a0 < b0) return a1 - b0;
  return b1 - a0;
}

inline double tiou(double a0, double a1, double b0, double b1) {
  const double inter = overlap_length(a0, a1, b0, b1);
  return inter / ((a1 - a0) + (b1 - b0) - inter);
}

// --- label assignment by dense integration -------------------------------------

inline constexpr int kSamplesPerSnippet = 1000;

// Fraction of the snippet [i, i+1) inside [lo, hi], measured by counting
// midpoints of a 1e-3 grid. Returned as a count out of 1000.
inline int covered_samples(std::size_t i, double lo, double hi) {
  int n = 0;
  for (int k = 0; k < kSamplesPerSnippet; ++k) {
    const double x = static_cast<double>(i) + (k + 0.5) / kSamplesPerSnippet;
    if (x >= lo && x <= hi) ++n;
  }
  return n;
}

struct DenseLabels {
  std::vector<double> start, end, action, completeness;
};

inline DenseLabels dense_labels(const atag::GroundTruth& gt, std::size_t length, std::size_t max_duration) {
  DenseLabels out;
  out.start.assign(length, 0.0);
  out.end.assign(length, 0.0);
  out.action.assign(length, 0.0);
  for (std::size_t i = 0; i < length; ++i) {
    int best_s = 0, best_e = 0, best_a = 0;
    for (const auto& inst : gt.instances) {
      best_s = std::max(best_s, covered_samples(i, inst.start - 1.5, inst.start + 1.5));
      best_e = std::max(best_e, covered_samples(i, inst.end - 1.5, inst.end + 1.5));
      best_a = std::max(best_a, covered_samples(i, inst.start, inst.end));
    }
    out.start[i] = best_s * 2 > kSamplesPerSnippet ? 1.0 : 0.0;
    out.end[i] = best_e * 2 > kSamplesPerSnippet ? 1.0 : 0.0;
    out.action[i] = best_a * 2 > kSamplesPerSnippet ? 1.0 : 0.0;
  }
  // Completeness: intersection measured on the same 1e-3 grid over the whole
  // proposal span, union from the lengths.
  out.completeness.assign(max_duration * length, 0.0);
  for (std::size_t d = 0; d < max_duration; ++d) {
    const std::size_t dur = d + 1;
    for (std::size_t j = 0; j + dur <= length - 1; ++j) {
      double best = 0.0;
      for (const auto& inst : gt.instances) {
        int inter = 0;
        for (std::size_t s = j; s < j + dur; ++s) {
          // Half-open instance coverage is what matters for measure; the
          // closed test in covered_samples only differs on a null set.
          inter += covered_samples(s, inst.start, inst.end);
        }
        const double inter_len = static_cast<double>(inter) / kSamplesPerSnippet;
        const double uni = static_cast<double>(dur) + (inst.end - inst.start) - inter_len;
        best = std::max(best, inter_len / uni);
      }
      out.completeness[d * length + j] = best;
    }
  }
  return out;
}

// --- suppression -----------------------------------------------------------------

inline bool better(const atag::Proposal& a, const atag::Proposal& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.t_start != b.t_start) return a.t_start < b.t_start;
  return a.t_end < b.t_end;
}

// Hard NMS from the definition: walk the full ranking; a proposal survives
// iff no survivor ranked above it overlaps it by more than the threshold.
inline atag::ProposalSet nms(atag::ProposalSet props, double threshold, std::size_t max_out) {
  const std::size_t n = props.size();
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) rank[i] = i;
  // Selection sort: O(n^2), no library sort.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (better(props[rank[j]], props[rank[i]])) std::swap(rank[i], rank[j]);
  std::vector<bool> alive(n, false);
  atag::ProposalSet out;
  for (std::size_t r = 0; r < n && out.size() < max_out; ++r) {
    const auto& p = props[rank[r]];
    bool ok = true;
    for (std::size_t q = 0; q < r; ++q) {
      const auto& k = props[rank[q]];
      if (alive[q] && tiou(k.t_start, k.t_end, p.t_start, p.t_end) > threshold) ok = false;
    }
    alive[r] = ok;
    if (ok) out.push_back(p);
  }
  return out;
}

// Soft-NMS recomputing every candidate's score from scratch each round:
// original score times the decay of every already selected proposal, in
// selection order.
inline atag::ProposalSet soft_nms(const atag::ProposalSet& props, double sigma, double floor,
                                  std::size_t max_out) {
  std::vector<std::size_t> chosen;
  std::vector<bool> taken(props.size(), false);
  atag::ProposalSet out;
  while (out.size() < max_out && chosen.size() < props.size()) {
    std::size_t best = props.size();
    atag::Proposal best_p;
    for (std::size_t i = 0; i < props.size(); ++i) {
      if (taken[i]) continue;
      atag::Proposal cand = props[i];
      for (std::size_t c : chosen) {
        const double o = tiou(props[c].t_start, props[c].t_end, cand.t_start, cand.t_end);
        if (o > 0.0) cand.score *= std::exp(-(o * o) / sigma);
      }
      if (best == props.size() || better(cand, best_p)) {
        best = i;
        best_p = cand;
      }
    }
    if (best_p.score < floor) break;
    taken[best] = true;
    chosen.push_back(best);
    out.push_back(best_p);
  }
  return out;
}

// --- proposal metrics ------------------------------------------------------------

struct RankedInterval {
  double start, end;
};
using Ranked = std::map<std::string, std::vector<RankedInterval>>;

// Dataset-level recall averaged over thresholds: builds the full overlap
// matrix of every instance against every kept proposal.
inline double average_recall(const Ranked& props, const std::vector<atag::GroundTruth>& gts, std::size_t an,
                             const std::vector<double>& thresholds) {
  double total = 0.0;
  std::vector<double> hits(thresholds.size(), 0.0);
  for (const auto& gt : gts) {
    const auto it = props.find(gt.video_id);
    const std::size_t kept = it == props.end() ? 0 : std::min(an, it->second.size());
    for (const auto& inst : gt.instances) {
      total += 1.0;
      std::vector<double> row;
      for (std::size_t k = 0; k < kept; ++k) {
        row.push_back(tiou(inst.start, inst.end, it->second[k].start, it->second[k].end));
      }
      for (std::size_t t = 0; t < thresholds.size(); ++t) {
        bool any = false;
        for (double o : row) any = any || o >= thresholds[t];
        if (any) hits[t] += 1.0;
      }
    }
  }
  if (total == 0.0) return 0.0;
  double s = 0.0;
  for (double h : hits) s += h / total;
  return s / static_cast<double>(thresholds.size());
}

// Area under the AR curve for AN = 1..max_an as a Riemann sum of trapezoids,
// normalized by the area of a curve that is identically 1.
inline double auc(const Ranked& props, const std::vector<atag::GroundTruth>& gts,
                  const std::vector<double>& thresholds, std::size_t max_an = 100) {
  double area = 0.0;
  double prev = average_recall(props, gts, 1, thresholds);
  for (std::size_t an = 2; an <= max_an; ++an) {
    const double cur = average_recall(props, gts, an, thresholds);
    area += (prev + cur) / 2.0;
    prev = cur;
  }
  return 100.0 * area / static_cast<double>(max_an - 1);
}

struct LabelledDetection {
  std::string video_id, label;
  double start, end, score;
};

// All-point AP in its "sum over true positives of the best precision at
// equal or higher recall" form. Matching: each detection, best first,
// claims the unclaimed same-class instance of its video with the highest
// overlap at or above the threshold.
inline double average_precision(std::vector<LabelledDetection> dets, const std::vector<atag::GroundTruth>& gts,
                                const std::string& label, double threshold) {
  std::vector<std::pair<std::string, atag::ActionInstance>> truth;
  for (const auto& gt : gts)
    for (const auto& inst : gt.instances)
      if (inst.label == label) truth.push_back({gt.video_id, inst});
  std::vector<LabelledDetection> mine;
  for (const auto& d : dets)
    if (d.label == label) mine.push_back(d);
  if (truth.empty() || mine.empty()) return 0.0;
  for (std::size_t i = 0; i < mine.size(); ++i)
    for (std::size_t j = i + 1; j < mine.size(); ++j) {
      const auto& a = mine[i];
      const auto& b = mine[j];
      const bool swap = b.score > a.score || (b.score == a.score && (b.start < a.start ||
                                                                    (b.start == a.start && b.end < a.end)));
      if (swap) std::swap(mine[i], mine[j]);
    }
  std::vector<bool> claimed(truth.size(), false);
  std::vector<bool> is_tp(mine.size(), false);
  for (std::size_t k = 0; k < mine.size(); ++k) {
    double best = -1.0;
    std::size_t pick = truth.size();
    for (std::size_t g = 0; g < truth.size(); ++g) {
      if (claimed[g] || truth[g].first != mine[k].video_id) continue;
      const double o = tiou(mine[k].start, mine[k].end, truth[g].second.start, truth[g].second.end);
      if (o >= threshold && o > best) {
        best = o;
        pick = g;
      }
    }
    if (pick < truth.size()) {
      claimed[pick] = true;
      is_tp[k] = true;
    }
  }
  double ap = 0.0;
  std::size_t tp_so_far = 0;
  for (std::size_t k = 0; k < mine.size(); ++k) {
    if (!is_tp[k]) continue;
    ++tp_so_far;
    // Best precision at any rank r >= k (recall there is at least as high).
    double best_prec = 0.0;
    std::size_t tp = tp_so_far - 1;
    for (std::size_t r = k; r < mine.size(); ++r) {
      if (is_tp[r]) ++tp;
      best_prec = std::max(best_prec, static_cast<double>(tp) / static_cast<double>(r + 1));
    }
    ap += best_prec / static_cast<double>(truth.size());
  }
  return ap;
}

inline double mean_ap(const std::vector<LabelledDetection>& dets, const std::vector<atag::GroundTruth>& gts,
                      double threshold) {
  std::vector<std::string> classes;
  auto note = [&](const std::string& c) {
    if (std::find(classes.begin(), classes.end(), c) == classes.end()) classes.push_back(c);
  };
  for (const auto& gt : gts)
    for (const auto& inst : gt.instances) note(inst.label);
  for (const auto& d : dets) note(d.label);
  if (classes.empty()) return 0.0;
  double s = 0.0;
  for (const auto& c : classes) s += average_precision(dets, gts, c, threshold);
  return s / static_cast<double>(classes.size());
}

// --- random instances ----------------------------------------------------------

// Proposal with integer-snippet endpoints inside [0, length].
inline atag::Proposal random_proposal(std::mt19937_64& rng, std::size_t length, const std::string& vid = "v") {
  std::uniform_int_distribution<int> start(0, static_cast<int>(length) - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  atag::Proposal p;
  p.video_id = vid;
  p.t_start = start(rng);
  std::uniform_int_distribution<int> dur(1, static_cast<int>(length) - static_cast<int>(p.t_start));
  p.t_end = p.t_start + dur(rng);
  p.p_s = unit(rng);
  p.p_e = unit(rng);
  p.p_cc = unit(rng);
  p.p_cr = unit(rng);
  p.score = p.p_s * p.p_e * p.p_cc * p.p_cr;
  return p;
}

// Ground truth with coordinates on a 0.01 grid, instances inside [0, length].
inline atag::GroundTruth random_ground_truth(std::mt19937_64& rng, std::size_t length, std::size_t max_instances,
                                             const std::string& vid = "v") {
  atag::GroundTruth gt{vid, length, {}};
  std::uniform_int_distribution<std::size_t> count(0, max_instances);
  const int ticks = static_cast<int>(length) * 100;
  std::uniform_int_distribution<int> pos(0, ticks);
  const std::size_t n = count(rng);
  for (std::size_t i = 0; i < n; ++i) {
    int a = pos(rng), b = pos(rng);
    if (a == b) b = a < ticks ? a + 1 : a - 1;
    if (a > b) std::swap(a, b);
    gt.instances.push_back({a / 100.0, b / 100.0, ""});
  }
  return gt;
}

}  // namespace oracle
