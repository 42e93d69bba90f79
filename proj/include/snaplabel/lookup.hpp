#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "snaplabel/detection.hpp"
#include "snaplabel/projection.hpp"

namespace snaplabel {

struct LookupConfig {
  double iou_gate = 0.20;
  int min_views = 2;
  int lel_top_k = 4;
  double crop_scale = 2.0;
  double lel_iou_gate = 0.20;
  int lel_min_views = 1;
};

void validate(const LookupConfig& config);

enum class LookupStage { kGlobal, kLocal };
std::string_view to_string(LookupStage stage);

struct LabelCandidate {
  std::string label;
  double probability = 0.0;
  double mean_iou = 0.0;
  int support = 0;
};

struct LabeledMask {
  std::size_t mask_id = 0;
  std::string label;
  double probability = 0.0;
  /// (view_id, IoU) for the views that voted for `label`, by view id.
  std::vector<std::pair<int, double>> supporting_views;
  LookupStage stage = LookupStage::kGlobal;
  /// Every label that survived the support filter; probabilities sum to 1.
  std::vector<LabelCandidate> candidates;
};

struct ViewMatch {
  std::string label;
  double iou = 0.0;
  std::size_t detection_index = 0;
};

/// IoU between a mask footprint and a detection: pixel sets for mask
/// detections, tight boxes for box detections.
double footprint_iou(const MaskFootprint& footprint, const Detection& detection);

/// Best detection for the footprint by IoU (ties: higher confidence, then
/// label, then lower index), if its IoU reaches `iou_gate`.
std::optional<ViewMatch> match_in_view(const MaskFootprint& footprint,
                                       const std::vector<Detection>& detections, double iou_gate);
std::optional<ViewMatch> match_in_view(const Mask2PixelMap& map, std::size_t mask_id,
                                       const std::vector<Detection>& detections, double iou_gate);

/// One view's vote for a mask.
struct ViewVote {
  int view_id = 0;
  std::string label;
  double iou = 0.0;
};

/// Groups votes by label, drops labels with fewer than `min_views`
/// supporting views, scores each label by its mean IoU and normalizes the
/// scores into probabilities. Nothing if no label survives.
std::optional<LabeledMask> aggregate_votes(std::size_t mask_id, std::vector<ViewVote> votes,
                                           int min_views, LookupStage stage);

struct GlobalLookupResult {
  std::vector<LabeledMask> labeled;
  std::vector<std::size_t> leftovers;
};

GlobalLookupResult global_lookup(const std::vector<Mask2PixelMap>& maps,
                                 const ClassLookupTable& clt, std::size_t num_masks,
                                 const LookupConfig& config);

/// Where a view's image comes from when re-querying the detector.
struct ViewSource {
  int view_id = 0;
  ImageRef image;
  int width = 0;
  int height = 0;
};

struct LocalLookupResult {
  std::vector<LabeledMask> labeled;
  std::vector<std::string> warnings;
  std::size_t crops_sent = 0;
  std::size_t crops_failed = 0;
};

/// Re-queries the detector on enlarged crops around each leftover mask in
/// its least-occluded views, then votes with the relaxed local settings.
LocalLookupResult local_enforced_lookup(const std::vector<std::size_t>& leftovers,
                                        const OcclusionReport& report,
                                        const std::vector<Mask2PixelMap>& maps,
                                        const std::vector<ViewSource>& views,
                                        DetectionProvider& provider,
                                        const std::vector<std::string>& vocabulary,
                                        const LookupConfig& config,
                                        const QueryOptions& query = {});

/// Merges stage outputs into the final labeled set, ordered by mask id.
/// Masks without a label are dropped.
std::vector<LabeledMask> final_refinement(std::size_t num_masks,
                                          std::vector<LabeledMask> labeled);

/// {"mask_id":k,"label":"...","prob":p,"stage":"global","views":[[v,iou],...]}
std::string labeled_to_jsonl(const std::vector<LabeledMask>& labeled);
std::vector<LabeledMask> parse_labeled_jsonl(const std::string& data);
std::vector<LabeledMask> load_labeled(const std::filesystem::path& path);

}  // namespace snaplabel
