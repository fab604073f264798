#include "atag/losses.hpp"

#include <cmath>

#include "atag/diagnostics.hpp"
#include "atag/errors.hpp"
#include "atag/ops.hpp"

namespace atag {

Tensor weighted_bl_loss(const Tensor& p, const std::vector<double>& g,
                        const std::vector<std::uint8_t>* keep) {
  const std::size_t n = p.numel();
  if (g.size() != n || (keep && keep->size() != n)) {
    throw DimensionError("weighted_bl_loss: " + std::to_string(n) + " probabilities, " +
                         std::to_string(g.size()) + " labels");
  }
  double count = 0.0, positives = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep && !(*keep)[i]) continue;
    count += 1.0;
    positives += g[i];
  }
  if (count == 0.0) throw ConfigError("weighted_bl_loss: no entries to score");
  const double negatives = count - positives;
  double alpha_pos = 0.0, alpha_neg = 0.0;
  if (positives > 0.0) {
    alpha_pos = count / positives;
  } else {
    record_warning("weighted_bl_loss: no positive labels, positive weight set to 0");
  }
  if (negatives > 0.0) {
    alpha_neg = count / negatives;
  } else {
    record_warning("weighted_bl_loss: no negative labels, negative weight set to 0");
  }
  std::vector<double> wp(n, 0.0), wn(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (keep && !(*keep)[i]) continue;
    wp[i] = -alpha_pos * g[i] / count;
    wn[i] = -alpha_neg * (1.0 - g[i]) / count;
  }
  const Tensor flat = reshape(p, {n});
  const Tensor q = clamp(flat, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  const Tensor pos_term = sum(mul(log(q), Tensor::from({n}, std::move(wp))));
  const Tensor neg_term = sum(mul(log(add_scalar(scale(q, -1.0), 1.0)), Tensor::from({n}, std::move(wn))));
  return add(pos_term, neg_term);
}

Tensor actionness_loss(const Tensor& p, const std::vector<double>& g) { return weighted_bl_loss(p, g); }

CompletenessLoss completeness_loss(const Tensor& cc, const Tensor& cr, const std::vector<double>& target,
                                   const std::vector<std::uint8_t>& valid, double regression_weight,
                                   double positive_threshold) {
  const std::size_t n = cc.numel();
  if (cr.numel() != n || target.size() != n || valid.size() != n) {
    throw DimensionError("completeness_loss: map sizes disagree");
  }
  std::size_t count = 0;
  for (auto v : valid) count += v;
  if (count == 0) throw ConfigError("completeness_loss: no valid cells");

  std::vector<double> binary(n, 0.0), masked_target(n, 0.0), weight(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!valid[i]) continue;
    binary[i] = target[i] > positive_threshold ? 1.0 : 0.0;
    masked_target[i] = target[i];
    weight[i] = 1.0 / static_cast<double>(count);
  }
  CompletenessLoss out;
  out.classification = weighted_bl_loss(cc, binary, &valid);
  const Tensor diff = sub(reshape(cr, {n}), Tensor::from({n}, std::move(masked_target)));
  out.regression = sum(mul(square(diff), Tensor::from({n}, std::move(weight))));
  out.total = regression_weight == 0.0 ? out.classification
                                       : add(out.classification, scale(out.regression, regression_weight));
  return out;
}

LossBreakdown total_loss(const LossComponents& c, const LossWeights& w) {
  LossBreakdown b;
  const std::pair<const char*, const Tensor*> parts[] = {
      {"completeness", &c.completeness}, {"actionness", &c.actionness}, {"start", &c.start}, {"end", &c.end}};
  for (const auto& [name, t] : parts) {
    if (!t->defined()) throw ConfigError(std::string("total_loss: missing component ") + name);
    if (!std::isfinite(t->item())) {
      throw NumericError(std::string("total_loss: component '") + name + "' is not finite");
    }
  }
  b.completeness = c.completeness.item();
  b.actionness = c.actionness.item();
  b.start = c.start.item();
  b.end = c.end.item();
  Tensor total = c.completeness;
  if (w.actionness != 0.0) total = add(total, scale(c.actionness, w.actionness));
  if (w.start != 0.0) total = add(total, scale(c.start, w.start));
  if (w.end != 0.0) total = add(total, scale(c.end, w.end));
  b.total = total;
  b.value = total.item();
  return b;
}

}  // namespace atag
