#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "snaplabel/geometry.hpp"
#include "snaplabel/lookup.hpp"
#include "snaplabel/scene_io.hpp"

namespace snaplabel {

/// |a ∩ b| / |a ∪ b| over point indices. Throws DomainError if both are empty.
double mask_iou(const InstanceMask& a, const InstanceMask& b);

struct ScoredInstance {
  InstanceMask mask;
  std::string label;
  double probability = 0.0;
};

struct ClassAp {
  std::string label;
  std::size_t num_gt = 0;
  std::size_t num_predictions = 0;
  double ap25 = 0.0;
  double ap50 = 0.0;
  /// Mean over thresholds 0.50, 0.55, ..., 0.95.
  double ap = 0.0;
};

struct EvalResult {
  /// Classes with at least one ground-truth instance, sorted by label.
  std::vector<ClassAp> classes;
  double mean_ap25 = 0.0;
  double mean_ap50 = 0.0;
  double mean_ap = 0.0;
};

/// Greedy-matching average precision for a single threshold, averaged over
/// classes that have ground truth. Per class, predictions are visited by
/// descending probability (then input order) and each takes the unmatched
/// ground truth of its class with the highest IoU, if that IoU reaches
/// `threshold`. AP is the all-point interpolated area under the PR curve.
/// `iou(p, g)` is queried for prediction p and ground truth g.
struct ApInput {
  std::vector<std::string> pred_labels;
  std::vector<double> pred_probs;
  std::vector<std::string> gt_labels;
};
std::map<std::string, double> average_precision(
    const ApInput& input, const std::function<double(std::size_t, std::size_t)>& iou,
    double threshold);

EvalResult instance_ap(std::vector<ScoredInstance> predictions,
                       const std::vector<LabeledMask3D>& gt);

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
  friend bool operator==(const Aabb&, const Aabb&) = default;
};

/// Componentwise extrema of the mask's points. Throws DomainError if empty.
Aabb to_aabb(const InstanceMask& mask, const PointCloud& cloud);

/// Volume IoU. Two identical boxes give 1 even when degenerate.
double box_iou_3d(const Aabb& a, const Aabb& b);

struct ScoredBox {
  Aabb box;
  std::string label;
  double probability = 0.0;
};
struct LabeledBox {
  Aabb box;
  std::string label;
};

/// Same matching as instance_ap with 3D box IoU; the headline number is ap25.
EvalResult detection_ap25(std::vector<ScoredBox> predictions,
                          const std::vector<LabeledBox>& gt);

struct ClassAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
};

struct RecognitionResult {
  std::map<std::string, ClassAccuracy> per_class;
  /// (ground truth, predicted) -> count; unlabeled masks predict "".
  std::map<std::pair<std::string, std::string>, std::size_t> confusion;
  double mean_accuracy = 0.0;
};

/// Top-1 accuracy when the pipeline ran on the ground-truth masks
/// themselves, so `labeled[i].mask_id` indexes `gt`. Unlabeled masks count
/// as wrong.
RecognitionResult recognition_top1(const std::vector<LabeledMask3D>& gt,
                                   const std::vector<LabeledMask>& labeled);

/// Joins lookup output with the mask set it was computed on.
std::vector<ScoredInstance> scored_instances(const MaskSet& masks,
                                             const std::vector<LabeledMask>& labeled);

/// CSV with header class,AP25,AP50,AP and a trailing "mean" row.
std::string eval_csv(const EvalResult& result);
std::string summary_table(const EvalResult& result);
std::string recognition_csv(const RecognitionResult& result);

}  // namespace snaplabel
