#pragma once

#include <span>
#include <utility>
#include <vector>

#include "snaplabel/scene_io.hpp"

namespace snaplabel {

struct FilterConfig {
  double beta = 0.5;           ///< minimum predicted IoU
  double alpha = 0.05;         ///< stability threshold offset
  double stability_iou = 0.8;  ///< required IoU between the two binarizations
  std::size_t n_min = 50;      ///< minimum point count
  double tau = 0.5;            ///< base binarization level
};

/// Throws DomainError for out-of-range settings.
void validate(const FilterConfig& config);

struct IouPair {
  double predicted = 0.0;
  double ground_truth = 0.0;
};

/// Mask-quality regression loss:
///   gamma * Σ unmatched² + Σ (predicted − ground_truth)²
/// Unmatched predictions have ground truth 0 and are down-weighted by gamma.
double mask_scoring_loss(std::span<const IouPair> matched,
                         std::span<const double> unmatched, double gamma);

/// Binarizes the soft mask at tau − alpha and tau + alpha (strictly
/// greater) and accepts it when the two sets overlap with IoU ≥
/// stability_iou. Hard masks (no soft values) always pass.
bool stability_filter(const InstanceMask& mask, double alpha, double tau, double stability_iou);

/// Indices of the masks that pass the score, stability and size filters.
std::vector<std::size_t> filter_mask_ids(const MaskSet& masks, const FilterConfig& config);
MaskSet filter_masks(const MaskSet& masks, const FilterConfig& config);

}  // namespace snaplabel
