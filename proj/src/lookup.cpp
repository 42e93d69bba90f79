#include "snaplabel/lookup.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "snaplabel/error.hpp"
#include "snaplabel/scene_io.hpp"

namespace snaplabel {

void validate(const LookupConfig& c) {
  if (!(c.iou_gate > 0.0 && c.iou_gate < 1.0)) throw DomainError("iou_gate must be in (0,1)");
  if (!(c.lel_iou_gate > 0.0 && c.lel_iou_gate < 1.0))
    throw DomainError("lel_iou_gate must be in (0,1)");
  if (c.min_views < 1 || c.lel_min_views < 1) throw DomainError("min_views must be >= 1");
  if (c.lel_top_k < 1) throw DomainError("lel_top_k must be >= 1");
  if (!(c.crop_scale >= 1.0)) throw DomainError("crop_scale must be >= 1");
}

std::string_view to_string(LookupStage stage) {
  return stage == LookupStage::kGlobal ? "global" : "local";
}

namespace {

std::size_t sorted_intersection(const std::vector<std::uint32_t>& a,
                                 const std::vector<std::uint32_t>& b) {
  std::size_t i = 0, j = 0, n = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

}  // namespace

double footprint_iou(const MaskFootprint& footprint, const Detection& detection) {
  if (footprint.pixels.empty()) return 0.0;
  if (const auto* m = std::get_if<PixelMask>(&detection.region)) {
    const std::size_t inter = sorted_intersection(footprint.pixels, m->pixels);
    const std::size_t uni = footprint.pixels.size() + m->pixels.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
  }
  return footprint.box ? box_iou(*footprint.box, std::get<PixelBox>(detection.region)) : 0.0;
}

std::optional<ViewMatch> match_in_view(const MaskFootprint& footprint,
                                       const std::vector<Detection>& detections, double iou_gate) {
  if (footprint.pixels.empty() || detections.empty()) return std::nullopt;
  std::optional<std::size_t> best;
  double best_iou = -1.0;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const double iou = footprint_iou(footprint, detections[i]);
    bool better = false;
    if (!best || iou > best_iou) {
      better = true;
    } else if (iou == best_iou) {
      const auto& cur = detections[*best];
      const auto& cand = detections[i];
      if (cand.confidence != cur.confidence)
        better = cand.confidence > cur.confidence;
      else
        better = cand.label < cur.label;
    }
    if (better) {
      best = i;
      best_iou = iou;
    }
  }
  if (best_iou < iou_gate) return std::nullopt;
  return ViewMatch{detections[*best].label, best_iou, *best};
}

std::optional<ViewMatch> match_in_view(const Mask2PixelMap& map, std::size_t mask_id,
                                       const std::vector<Detection>& detections, double iou_gate) {
  if (mask_id >= map.masks.size()) throw DomainError("mask id out of range for Mask2Pixel map");
  return match_in_view(map.masks[mask_id], detections, iou_gate);
}

std::optional<LabeledMask> aggregate_votes(std::size_t mask_id, std::vector<ViewVote> votes,
                                           int min_views, LookupStage stage) {
  std::map<std::string, std::vector<std::pair<int, double>>> by_label;
  for (auto& v : votes) by_label[v.label].emplace_back(v.view_id, v.iou);

  std::vector<LabelCandidate> candidates;
  std::vector<std::vector<std::pair<int, double>>> support;
  double total = 0.0;
  for (auto& [label, views] : by_label) {
    if (static_cast<int>(views.size()) < min_views) continue;
    std::sort(views.begin(), views.end());
    double sum = 0.0;
    for (const auto& [v, iou] : views) sum += iou;
    LabelCandidate c;
    c.label = label;
    c.support = static_cast<int>(views.size());
    c.mean_iou = sum / static_cast<double>(views.size());
    total += c.mean_iou;
    candidates.push_back(std::move(c));
    support.push_back(views);
  }
  if (candidates.empty() || !(total > 0.0)) return std::nullopt;

  std::size_t best = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    candidates[i].probability = candidates[i].mean_iou / total;
    if (i == 0) continue;
    const auto& b = candidates[best];
    const auto& c = candidates[i];
    // Labels arrive in lexicographic order, so only strict wins replace.
    if (c.probability > b.probability || (c.probability == b.probability && c.support > b.support))
      best = i;
  }
  LabeledMask out;
  out.mask_id = mask_id;
  out.label = candidates[best].label;
  out.probability = candidates[best].probability;
  out.supporting_views = std::move(support[best]);
  out.stage = stage;
  out.candidates = std::move(candidates);
  return out;
}

GlobalLookupResult global_lookup(const std::vector<Mask2PixelMap>& maps,
                                 const ClassLookupTable& clt, std::size_t num_masks,
                                 const LookupConfig& config) {
  validate(config);
  for (const auto& m : maps) {
    if (m.masks.size() != num_masks) throw DomainError("Mask2Pixel map does not match mask count");
  }
  GlobalLookupResult result;
  for (std::size_t k = 0; k < num_masks; ++k) {
    std::vector<ViewVote> votes;
    for (const auto& map : maps) {
      if (auto match = match_in_view(map.masks[k], clt.view(map.view_id), config.iou_gate))
        votes.push_back({map.view_id, std::move(match->label), match->iou});
    }
    if (auto labeled = aggregate_votes(k, std::move(votes), config.min_views, LookupStage::kGlobal))
      result.labeled.push_back(std::move(*labeled));
    else
      result.leftovers.push_back(k);
  }
  return result;
}

LocalLookupResult local_enforced_lookup(const std::vector<std::size_t>& leftovers,
                                        const OcclusionReport& report,
                                        const std::vector<Mask2PixelMap>& maps,
                                        const std::vector<ViewSource>& views,
                                        DetectionProvider& provider,
                                        const std::vector<std::string>& vocabulary,
                                        const LookupConfig& config, const QueryOptions& query) {
  validate(config);
  LocalLookupResult result;
  if (leftovers.empty() || report.view_ids.empty()) return result;
  if (vocabulary.empty()) throw DomainError("vocabulary is empty");

  std::unordered_map<int, std::size_t> map_of_view, source_of_view;
  for (std::size_t i = 0; i < maps.size(); ++i) map_of_view[maps[i].view_id] = i;
  for (std::size_t i = 0; i < views.size(); ++i) source_of_view[views[i].view_id] = i;

  struct Crop {
    std::size_t mask;
    int view_id;
  };
  std::vector<Crop> crops;
  std::vector<DetectionRequest> requests;
  const std::size_t k = std::min<std::size_t>(config.lel_top_k, report.view_ids.size());
  for (std::size_t mask : leftovers) {
    for (int view_id : top_k_views(report, mask, k)) {
      const auto vpos = std::find(report.view_ids.begin(), report.view_ids.end(), view_id) -
                        report.view_ids.begin();
      if (!(report.rate(mask, static_cast<std::size_t>(vpos)) > 0.0)) continue;
      auto mi = map_of_view.find(view_id);
      auto si = source_of_view.find(view_id);
      if (mi == map_of_view.end() || si == source_of_view.end())
        throw DomainError("no Mask2Pixel map or image for view " + std::to_string(view_id));
      const auto& fp = maps[mi->second].masks.at(mask);
      if (!fp.box) continue;
      const ViewSource& src = views[si->second];
      DetectionRequest req;
      req.image = src.image;
      req.vocabulary = vocabulary;
      req.crop = scale_box(*fp.box, config.crop_scale, src.width, src.height);
      req.view_id = view_id;
      req.width = src.width;
      req.height = src.height;
      crops.push_back({mask, view_id});
      requests.push_back(std::move(req));
    }
  }
  result.crops_sent = requests.size();
  const auto outcomes = query_each(provider, requests, query);

  std::map<std::size_t, std::vector<ViewVote>> votes;
  struct Tally {
    int crops = 0;
    int failures = 0;
    std::string last_error;
  };
  std::map<std::size_t, Tally> tried;
  for (std::size_t i = 0; i < crops.size(); ++i) {
    const Crop& c = crops[i];
    auto& t = tried[c.mask];
    ++t.crops;
    if (outcomes[i].error) {
      ++t.failures;
      t.last_error = *outcomes[i].error;
      ++result.crops_failed;
      continue;
    }
    const auto& fp = maps[map_of_view[c.view_id]].masks[c.mask];
    if (auto match = match_in_view(fp, outcomes[i].detections, config.lel_iou_gate))
      votes[c.mask].push_back({c.view_id, std::move(match->label), match->iou});
  }
  for (const auto& [mask, t] : tried) {
    if (t.crops == t.failures) {
      result.warnings.push_back("local lookup skipped mask " + std::to_string(mask) + ": all " +
                                std::to_string(t.crops) + " crop queries failed (" +
                                t.last_error + ")");
    }
  }
  for (auto& [mask, v] : votes) {
    if (auto labeled = aggregate_votes(mask, std::move(v), config.lel_min_views, LookupStage::kLocal))
      result.labeled.push_back(std::move(*labeled));
  }
  return result;
}

std::vector<LabeledMask> final_refinement(std::size_t num_masks, std::vector<LabeledMask> labeled) {
  std::sort(labeled.begin(), labeled.end(),
            [](const LabeledMask& a, const LabeledMask& b) { return a.mask_id < b.mask_id; });
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    if (labeled[i].mask_id >= num_masks) throw DomainError("labeled mask id out of range");
    if (i > 0 && labeled[i].mask_id == labeled[i - 1].mask_id)
      throw DomainError("mask " + std::to_string(labeled[i].mask_id) + " labeled twice");
  }
  return labeled;
}

std::string labeled_to_jsonl(const std::vector<LabeledMask>& labeled) {
  std::string out;
  for (const auto& l : labeled) {
    nlohmann::ordered_json j;
    j["mask_id"] = l.mask_id;
    j["label"] = l.label;
    j["prob"] = l.probability;
    j["stage"] = to_string(l.stage);
    nlohmann::ordered_json views = nlohmann::ordered_json::array();
    for (const auto& [v, iou] : l.supporting_views) views.push_back({v, iou});
    j["views"] = std::move(views);
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<LabeledMask> parse_labeled_jsonl(const std::string& data) {
  std::vector<LabeledMask> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < data.size()) {
    std::size_t end = data.find('\n', pos);
    if (end == std::string::npos) end = data.size();
    const std::string line = data.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      LabeledMask l;
      l.mask_id = j.at("mask_id").get<std::size_t>();
      l.label = j.at("label").get<std::string>();
      l.probability = j.at("prob").get<double>();
      const auto stage = j.at("stage").get<std::string>();
      if (stage != "global" && stage != "local") throw FormatError("unknown stage", FormatError::Unit::kLine, line_no);
      l.stage = stage == "global" ? LookupStage::kGlobal : LookupStage::kLocal;
      for (const auto& v : j.value("views", nlohmann::json::array()))
        l.supporting_views.emplace_back(v.at(0).get<int>(), v.at(1).get<double>());
      out.push_back(std::move(l));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad labeled record: ") + e.what(), FormatError::Unit::kLine, line_no);
    }
  }
  return out;
}

std::vector<LabeledMask> load_labeled(const std::filesystem::path& path) {
  try {
    return parse_labeled_jsonl(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.unit(), e.offset());
  }
}

}  // namespace snaplabel
