#include "snaplabel/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "snaplabel/error.hpp"

namespace snaplabel {

double mask_iou(const InstanceMask& a, const InstanceMask& b) {
  const auto& x = a.point_indices;
  const auto& y = b.point_indices;
  if (x.empty() && y.empty()) throw DomainError("IoU of two empty masks is undefined");
  std::size_t i = 0, j = 0, inter = 0;
  while (i < x.size() && j < y.size()) {
    if (x[i] < y[j]) {
      ++i;
    } else if (y[j] < x[i]) {
      ++j;
    } else {
      ++inter;
      ++i;
      ++j;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(x.size() + y.size() - inter);
}

std::map<std::string, double> average_precision(
    const ApInput& input, const std::function<double(std::size_t, std::size_t)>& iou,
    double threshold) {
  if (input.pred_labels.size() != input.pred_probs.size())
    throw DomainError("prediction labels and probabilities differ in length");
  std::map<std::string, std::vector<std::size_t>> gt_of, pred_of;
  for (std::size_t g = 0; g < input.gt_labels.size(); ++g) gt_of[input.gt_labels[g]].push_back(g);
  for (std::size_t p = 0; p < input.pred_labels.size(); ++p)
    pred_of[input.pred_labels[p]].push_back(p);

  std::map<std::string, double> out;
  for (const auto& [label, gts] : gt_of) {
    std::vector<std::size_t> preds;
    if (auto it = pred_of.find(label); it != pred_of.end()) preds = it->second;
    std::stable_sort(preds.begin(), preds.end(), [&](std::size_t a, std::size_t b) {
      return input.pred_probs[a] > input.pred_probs[b];
    });

    std::vector<bool> used(gts.size(), false);
    std::vector<bool> tp(preds.size(), false);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      std::optional<std::size_t> best;
      double best_iou = -1.0;
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (used[g]) continue;
        const double v = iou(preds[i], gts[g]);
        if (v > best_iou) {
          best_iou = v;
          best = g;
        }
      }
      if (best && best_iou >= threshold) {
        used[*best] = true;
        tp[i] = true;
      }
    }

    const double n_gt = static_cast<double>(gts.size());
    std::vector<double> recall(preds.size()), precision(preds.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (tp[i]) ++hits;
      recall[i] = static_cast<double>(hits) / n_gt;
      precision[i] = static_cast<double>(hits) / static_cast<double>(i + 1);
    }
    for (std::size_t i = preds.size(); i-- > 1;)
      precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
    out[label] = ap;
  }
  return out;
}

namespace {

EvalResult evaluate(const ApInput& input,
                    const std::function<double(std::size_t, std::size_t)>& iou) {
  static constexpr double kThresholds[] = {0.50, 0.55, 0.60, 0.65, 0.70,
                                           0.75, 0.80, 0.85, 0.90, 0.95};
  // Each IoU is needed at many thresholds; compute it once.
  const std::size_t np = input.pred_labels.size();
  const std::size_t ng = input.gt_labels.size();
  std::vector<double> table(np * ng, 0.0);
  for (std::size_t p = 0; p < np; ++p)
    for (std::size_t g = 0; g < ng; ++g)
      if (input.pred_labels[p] == input.gt_labels[g]) table[p * ng + g] = iou(p, g);
  const auto cached = [&](std::size_t p, std::size_t g) { return table[p * ng + g]; };

  const auto ap25 = average_precision(input, cached, 0.25);
  const auto ap50 = average_precision(input, cached, 0.50);
  std::map<std::string, double> ap_sum;
  for (double t : kThresholds)
    for (const auto& [label, v] : average_precision(input, cached, t)) ap_sum[label] += v;

  EvalResult result;
  for (const auto& [label, v] : ap25) {
    ClassAp c;
    c.label = label;
    c.num_gt = static_cast<std::size_t>(
        std::count(input.gt_labels.begin(), input.gt_labels.end(), label));
    c.num_predictions = static_cast<std::size_t>(
        std::count(input.pred_labels.begin(), input.pred_labels.end(), label));
    c.ap25 = v;
    c.ap50 = ap50.at(label);
    c.ap = ap_sum[label] / static_cast<double>(std::size(kThresholds));
    result.classes.push_back(c);
  }
  if (!result.classes.empty()) {
    for (const auto& c : result.classes) {
      result.mean_ap25 += c.ap25;
      result.mean_ap50 += c.ap50;
      result.mean_ap += c.ap;
    }
    const double n = static_cast<double>(result.classes.size());
    result.mean_ap25 /= n;
    result.mean_ap50 /= n;
    result.mean_ap /= n;
  }
  return result;
}

}  // namespace

EvalResult instance_ap(std::vector<ScoredInstance> predictions,
                       const std::vector<LabeledMask3D>& gt) {
  // Canonical order so equal-probability ties do not depend on input order.
  std::sort(predictions.begin(), predictions.end(),
            [](const ScoredInstance& a, const ScoredInstance& b) {
              if (a.probability != b.probability) return a.probability > b.probability;
              if (a.label != b.label) return a.label < b.label;
              return a.mask.point_indices < b.mask.point_indices;
            });
  ApInput input;
  for (const auto& p : predictions) {
    input.pred_labels.push_back(p.label);
    input.pred_probs.push_back(p.probability);
  }
  for (const auto& g : gt) input.gt_labels.push_back(g.label);
  return evaluate(input, [&](std::size_t p, std::size_t g) {
    const auto& a = predictions[p].mask;
    const auto& b = gt[g].mask;
    if (a.point_indices.empty() && b.point_indices.empty()) return 0.0;
    return mask_iou(a, b);
  });
}

Aabb to_aabb(const InstanceMask& mask, const PointCloud& cloud) {
  if (mask.point_indices.empty()) throw DomainError("bounding box of an empty mask");
  Aabb box;
  box.min = box.max = cloud.points.at(mask.point_indices.front());
  for (PointIndex i : mask.point_indices) {
    const Vec3& p = cloud.points.at(i);
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  return box;
}

double box_iou_3d(const Aabb& a, const Aabb& b) {
  if (a == b) return 1.0;
  double inter = 1.0;
  double va = 1.0;
  double vb = 1.0;
  for (int i = 0; i < 3; ++i) {
    inter *= std::max(0.0, std::min(a.max[i], b.max[i]) - std::max(a.min[i], b.min[i]));
    va *= std::max(0.0, a.max[i] - a.min[i]);
    vb *= std::max(0.0, b.max[i] - b.min[i]);
  }
  const double uni = va + vb - inter;
  if (!(uni > 0.0)) return 0.0;
  // Rounding can push a near-identical pair to exactly 1; keep 1 for identity.
  return std::min(inter / uni, std::nextafter(1.0, 0.0));
}

EvalResult detection_ap25(std::vector<ScoredBox> predictions,
                          const std::vector<LabeledBox>& gt) {
  const auto key = [](const ScoredBox& b) {
    return std::array<double, 6>{b.box.min.x(), b.box.min.y(), b.box.min.z(),
                                 b.box.max.x(), b.box.max.y(), b.box.max.z()};
  };
  std::sort(predictions.begin(), predictions.end(), [&](const ScoredBox& a, const ScoredBox& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    if (a.label != b.label) return a.label < b.label;
    return key(a) < key(b);
  });
  ApInput input;
  for (const auto& p : predictions) {
    input.pred_labels.push_back(p.label);
    input.pred_probs.push_back(p.probability);
  }
  for (const auto& g : gt) input.gt_labels.push_back(g.label);
  return evaluate(input, [&](std::size_t p, std::size_t g) {
    return box_iou_3d(predictions[p].box, gt[g].box);
  });
}

RecognitionResult recognition_top1(const std::vector<LabeledMask3D>& gt,
                                   const std::vector<LabeledMask>& labeled) {
  std::vector<const std::string*> predicted(gt.size(), nullptr);
  for (const auto& l : labeled) {
    if (l.mask_id >= gt.size())
      throw DomainError("labeled mask " + std::to_string(l.mask_id) +
                        " is not a ground-truth mask");
    predicted[l.mask_id] = &l.label;
  }
  RecognitionResult r;
  static const std::string kNone;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    auto& c = r.per_class[gt[i].label];
    ++c.total;
    const std::string& pred = predicted[i] ? *predicted[i] : kNone;
    if (predicted[i] && pred == gt[i].label) ++c.correct;
    ++r.confusion[{gt[i].label, pred}];
  }
  if (!r.per_class.empty()) {
    for (const auto& [label, c] : r.per_class) r.mean_accuracy += c.accuracy();
    r.mean_accuracy /= static_cast<double>(r.per_class.size());
  }
  return r;
}

std::vector<ScoredInstance> scored_instances(const MaskSet& masks,
                                             const std::vector<LabeledMask>& labeled) {
  std::vector<ScoredInstance> out;
  out.reserve(labeled.size());
  for (const auto& l : labeled) {
    if (l.mask_id >= masks.size())
      throw DomainError("labeled mask " + std::to_string(l.mask_id) + " is not in the mask set");
    out.push_back({masks.masks[l.mask_id], l.label, l.probability});
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string eval_csv(const EvalResult& result) {
  std::string out = "class,AP25,AP50,AP\n";
  for (const auto& c : result.classes)
    out += c.label + "," + fmt(c.ap25) + "," + fmt(c.ap50) + "," + fmt(c.ap) + "\n";
  out += "mean," + fmt(result.mean_ap25) + "," + fmt(result.mean_ap50) + "," +
         fmt(result.mean_ap) + "\n";
  return out;
}

std::string summary_table(const EvalResult& result) {
  std::size_t width = 5;
  for (const auto& c : result.classes) width = std::max(width, c.label.size());
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s %6s %6s %6s %6s %6s\n", static_cast<int>(width), "class",
                "gt", "pred", "AP25", "AP50", "AP");
  os << line;
  for (const auto& c : result.classes) {
    std::snprintf(line, sizeof line, "%-*s %6zu %6zu %6.3f %6.3f %6.3f\n",
                  static_cast<int>(width), c.label.c_str(), c.num_gt, c.num_predictions, c.ap25,
                  c.ap50, c.ap);
    os << line;
  }
  std::snprintf(line, sizeof line, "%-*s %6s %6s %6.3f %6.3f %6.3f\n", static_cast<int>(width),
                "mean", "", "", result.mean_ap25, result.mean_ap50, result.mean_ap);
  os << line;
  return os.str();
}

std::string recognition_csv(const RecognitionResult& result) {
  std::string out = "class,correct,total,top1\n";
  for (const auto& [label, c] : result.per_class)
    out += label + "," + std::to_string(c.correct) + "," + std::to_string(c.total) + "," +
           fmt(c.accuracy()) + "\n";
  out += "mean,,," + fmt(result.mean_accuracy) + "\n";
  return out;
}

}  // namespace snaplabel
