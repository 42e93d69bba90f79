#include "snaplabel/mask_filter.hpp"

#include "snaplabel/error.hpp"

namespace snaplabel {

namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

void validate(const FilterConfig& c) {
  if (!in_unit(c.beta)) throw DomainError("beta must be in [0,1]");
  if (!(c.alpha > 0.0 && c.alpha < 0.5)) throw DomainError("alpha must be in (0, 0.5)");
  if (!in_unit(c.stability_iou)) throw DomainError("stability_iou must be in [0,1]");
  if (!(c.tau - c.alpha > 0.0 && c.tau + c.alpha < 1.0))
    throw DomainError("tau ± alpha must stay inside (0,1)");
}

double mask_scoring_loss(std::span<const IouPair> matched, std::span<const double> unmatched,
                         double gamma) {
  if (!(gamma >= 0.0)) throw DomainError("gamma must be >= 0");
  double unmatched_sum = 0.0;
  for (double u : unmatched) {
    if (!in_unit(u)) throw DomainError("unmatched IoU outside [0,1]");
    unmatched_sum += u * u;
  }
  double matched_sum = 0.0;
  for (const auto& m : matched) {
    if (!in_unit(m.predicted) || !in_unit(m.ground_truth))
      throw DomainError("matched IoU outside [0,1]");
    const double d = m.predicted - m.ground_truth;
    matched_sum += d * d;
  }
  return gamma * unmatched_sum + matched_sum;
}

bool stability_filter(const InstanceMask& mask, double alpha, double tau, double stability_iou) {
  if (!mask.soft_values) return true;
  std::size_t lower = 0;
  std::size_t upper = 0;
  for (double s : *mask.soft_values) {
    lower += s > tau - alpha;
    upper += s > tau + alpha;
  }
  // The upper set is contained in the lower one.
  if (upper == 0) return false;
  return static_cast<double>(upper) / static_cast<double>(lower) >= stability_iou;
}

std::vector<std::size_t> filter_mask_ids(const MaskSet& masks, const FilterConfig& config) {
  validate(config);
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < masks.masks.size(); ++i) {
    const auto& m = masks.masks[i];
    if (m.quality_score && *m.quality_score < config.beta) continue;
    if (!stability_filter(m, config.alpha, config.tau, config.stability_iou)) continue;
    if (m.size() < config.n_min) continue;
    kept.push_back(i);
  }
  return kept;
}

MaskSet filter_masks(const MaskSet& masks, const FilterConfig& config) {
  MaskSet out;
  out.source = masks.source;
  for (std::size_t i : filter_mask_ids(masks, config)) out.masks.push_back(masks.masks[i]);
  return out;
}

}  // namespace snaplabel
