#include "snaplabel/pipeline.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <regex>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "snaplabel/error.hpp"
#include "snaplabel/mask_filter.hpp"

namespace snaplabel {

ProviderFactory make_provider_factory(const PipelineConfig& config,
                                      std::vector<LabeledMask3D> ground_truth) {
  switch (config.detector.provider) {
    case ProviderKind::kFile: {
      const auto dir = config.detector.responses;
      if (dir.empty()) throw ConfigError("detector.responses is required for the file provider");
      return [dir](const ProviderContext&) { return std::make_unique<FileProvider>(dir); };
    }
    case ProviderKind::kHttp: {
      if (config.detector.endpoint.empty())
        throw ConfigError("detector.endpoint is required for the http provider");
      HttpOptions opts;
      opts.timeout_s = config.detector.timeout_s;
      opts.max_concurrency = config.detector.max_concurrency;
      const auto endpoint = config.detector.endpoint;
      return [endpoint, opts](const ProviderContext&) {
        return std::make_unique<HttpProvider>(endpoint, opts);
      };
    }
    case ProviderKind::kOracle:
    default:
      break;
  }
  auto gt = std::make_shared<const std::vector<LabeledMask3D>>(std::move(ground_truth));
  return [gt](const ProviderContext& ctx) -> std::unique_ptr<DetectionProvider> {
    std::unordered_map<PointIndex, PointIndex> local;
    local.reserve(ctx.source_points.size());
    for (std::size_t i = 0; i < ctx.source_points.size(); ++i)
      local.emplace(ctx.source_points[i], static_cast<PointIndex>(i));
    MaskSet masks;
    std::vector<std::string> labels;
    for (const auto& g : *gt) {
      InstanceMask m;
      for (PointIndex p : g.mask.point_indices) {
        if (auto it = local.find(p); it != local.end()) m.point_indices.push_back(it->second);
      }
      std::sort(m.point_indices.begin(), m.point_indices.end());
      masks.masks.push_back(std::move(m));
      labels.push_back(g.label);
    }
    const MaskMembership membership(masks, ctx.cloud.size());
    auto maps = build_mask2pixel_all(ctx.cloud, membership, ctx.views, ctx.config.projection,
                                     ctx.config.run.workers);
    OracleOptions opts;
    opts.drop_rate = ctx.config.detector.drop_rate;
    opts.perturb_rate = ctx.config.detector.perturb_rate;
    opts.seed = ctx.config.run.seed;
    return std::make_unique<OracleProvider>(std::move(maps), std::move(labels), opts);
  };
}

std::string report_to_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["input"] = r.input;
  j["filtered_out"] = r.filtered_out;
  j["global_labeled"] = r.global_labeled;
  j["local_labeled"] = r.local_labeled;
  j["dropped"] = r.dropped;
  j["views"] = r.views;
  j["detections"] = r.detections;
  j["crops_sent"] = r.crops_sent;
  j["crops_failed"] = r.crops_failed;
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

namespace {

std::vector<RenderedView> render_snaps(const PointCloud& cloud, const PipelineConfig& config) {
  if (cloud.empty()) return {};
  const SceneBounds bounds = compute_bounds(cloud, config.scene.up_axis);
  const SnapPlan plan = plan_snaps(bounds, cloud, config.snap);
  return render_all(cloud, plan.cameras, config.render, config.run.workers);
}

struct PartResult {
  std::vector<LabeledMask> labeled;
  std::size_t global = 0;
  std::size_t local = 0;
};

PartResult run_part(const PointCloud& cloud, const MaskSet& masks,
                    const std::vector<PointIndex>& source_points, const PipelineConfig& config,
                    const ProviderFactory& factory, const std::vector<PipelineView>* external,
                    RunReport& report) {
  PartResult out;
  if (masks.masks.empty()) return out;

  std::vector<PipelineView> views;
  if (external) {
    views = *external;
  } else {
    for (auto& v : render_snaps(cloud, config)) {
      auto img = std::make_shared<const RgbImage>(v.rgb);
      views.push_back({std::move(v), std::move(img)});
    }
  }
  std::vector<RenderedView> rendered;
  std::vector<int> view_ids;
  for (const auto& v : views) {
    rendered.push_back(v.view);
    view_ids.push_back(v.view.view_id);
  }
  report.views += views.size();

  const MaskMembership membership(masks, cloud.size());
  const auto maps =
      build_mask2pixel_all(cloud, membership, rendered, config.projection, config.run.workers);

  const auto& vocabulary = config.detector.vocabulary;
  std::vector<Detection> detections;
  std::unique_ptr<DetectionProvider> provider;
  if (vocabulary.empty()) {
    report.warnings.push_back("vocabulary is empty; no detector queries were made");
  } else if (!views.empty()) {
    provider = factory(ProviderContext{cloud, source_points, rendered, config});
    std::vector<DetectionRequest> requests;
    for (const auto& v : views) {
      DetectionRequest r;
      r.image = v.image;
      r.vocabulary = vocabulary;
      r.view_id = v.view.view_id;
      r.width = v.view.camera.width;
      r.height = v.view.camera.height;
      requests.push_back(std::move(r));
    }
    detections = query_detector(*provider, requests, QueryOptions{config.detector.retries});
  }
  report.detections += detections.size();
  const auto clt = build_clt(std::move(detections), vocabulary, view_ids);

  auto global = global_lookup(maps, clt, masks.size(), config.lookup);
  out.global = global.labeled.size();
  std::vector<LabeledMask> all = std::move(global.labeled);

  if (provider && !global.leftovers.empty()) {
    const auto occlusion = occlusion_report(maps, membership);
    std::vector<ViewSource> sources;
    for (const auto& v : views)
      sources.push_back({v.view.view_id, v.image, v.view.camera.width, v.view.camera.height});
    auto local = local_enforced_lookup(global.leftovers, occlusion, maps, sources, *provider,
                                       vocabulary, config.lookup,
                                       QueryOptions{config.detector.retries});
    out.local = local.labeled.size();
    report.crops_sent += local.crops_sent;
    report.crops_failed += local.crops_failed;
    for (auto& w : local.warnings) report.warnings.push_back(std::move(w));
    for (auto& l : local.labeled) all.push_back(std::move(l));
  }
  out.labeled = final_refinement(masks.size(), std::move(all));
  return out;
}

}  // namespace

std::vector<RenderedView> snap_scene(const PointCloud& cloud, const PipelineConfig& config) {
  validate(cloud);
  const SceneBounds bounds = compute_bounds(cloud, config.scene.up_axis);
  const CropResult crop = crop_top(cloud, MaskSet{}, bounds, config.scene.crop_margin);
  return render_snaps(crop.cloud, config);
}

LookupRun run_lookup(const PointCloud& cloud, const MaskSet& masks, const PipelineConfig& config,
                     const ProviderFactory& factory,
                     const std::vector<PipelineView>* external_views) {
  validate(cloud);
  validate(masks, cloud.size());
  validate(config);

  LookupRun run;
  RunReport& report = run.report;
  report.input = masks.size();

  const auto kept = filter_mask_ids(masks, config.filter);
  MaskSet filtered;
  filtered.source = masks.source;
  for (std::size_t i : kept) filtered.masks.push_back(masks.masks[i]);

  const SceneBounds bounds = compute_bounds(cloud, config.scene.up_axis);
  const CropResult crop = crop_top(cloud, filtered, bounds, config.scene.crop_margin);
  std::vector<std::size_t> to_input(crop.masks.size());
  for (std::size_t j = 0; j < crop.masks.size(); ++j) to_input[j] = kept[crop.kept_masks[j]];
  std::vector<PointIndex> crop_points(crop.cloud.size());
  for (std::size_t i = 0; i < crop.remap.old_to_new.size(); ++i) {
    const PointIndex n = crop.remap.old_to_new[i];
    if (n != IndexRemap::kDropped) crop_points[n] = static_cast<PointIndex>(i);
  }
  report.filtered_out = report.input - crop.masks.size();

  std::vector<Patch> parts;
  if (config.scene.patch_size) {
    parts = split_patches(crop.cloud, crop.masks, *config.scene.patch_size, config.scene.up_axis);
  } else {
    Patch whole;
    whole.cloud = crop.cloud;
    whole.masks = crop.masks;
    whole.source_points.resize(crop.cloud.size());
    std::iota(whole.source_points.begin(), whole.source_points.end(), PointIndex{0});
    whole.source_masks.resize(crop.masks.size());
    std::iota(whole.source_masks.begin(), whole.source_masks.end(), std::size_t{0});
    parts.push_back(std::move(whole));
  }

  std::size_t global = 0, local = 0;
  for (const auto& part : parts) {
    std::vector<PointIndex> source(part.source_points.size());
    for (std::size_t i = 0; i < source.size(); ++i) source[i] = crop_points[part.source_points[i]];
    auto res = run_part(part.cloud, part.masks, source, config, factory, external_views, report);
    global += res.global;
    local += res.local;
    for (auto& l : res.labeled) {
      l.mask_id = to_input[part.source_masks[l.mask_id]];
      run.labeled.push_back(std::move(l));
    }
  }
  std::sort(run.labeled.begin(), run.labeled.end(),
            [](const LabeledMask& a, const LabeledMask& b) { return a.mask_id < b.mask_id; });
  report.global_labeled = global;
  report.local_labeled = local;
  report.dropped = crop.masks.size() - global - local;
  return run;
}

std::string camera_to_json(const CameraModel& c) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json pose = nlohmann::ordered_json::array();
  for (int r = 0; r < 4; ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int k = 0; k < 4; ++k) row.push_back(c.pose(r, k));
    pose.push_back(std::move(row));
  }
  j["pose"] = std::move(pose);
  j["fx"] = c.intrinsics.fx;
  j["fy"] = c.intrinsics.fy;
  j["cx"] = c.intrinsics.cx;
  j["cy"] = c.intrinsics.cy;
  j["width"] = c.width;
  j["height"] = c.height;
  j["scale"] = to_string(c.scale);
  return j.dump(2) + "\n";
}

CameraModel camera_from_json(const std::string& text) {
  CameraModel c;
  try {
    const auto j = nlohmann::json::parse(text);
    const auto& pose = j.at("pose");
    if (!pose.is_array() || pose.size() != 4) throw DomainError("pose must be a 4x4 array");
    for (int r = 0; r < 4; ++r) {
      if (!pose[r].is_array() || pose[r].size() != 4) throw DomainError("pose must be a 4x4 array");
      for (int k = 0; k < 4; ++k) c.pose(r, k) = pose[r][k].get<double>();
    }
    c.intrinsics.fx = j.at("fx").get<double>();
    c.intrinsics.fy = j.at("fy").get<double>();
    c.intrinsics.cx = j.at("cx").get<double>();
    c.intrinsics.cy = j.at("cy").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    const auto scale = parse_snap_scale(j.value("scale", std::string("external")));
    c.scale = scale.value_or(SnapScale::kExternal);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad camera record: ") + e.what(), FormatError::Unit::kByte, 0);
  }
  validate(c);
  return c;
}

void write_views(const std::vector<RenderedView>& views, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& v : views) {
    const std::string stem = "view_" + std::to_string(v.view_id);
    save_png(v.rgb, dir / (stem + ".png"));
    save_depth(v.depth, dir / (stem + ".dpth"));
    write_file(dir / (stem + ".json"), camera_to_json(v.camera));
  }
}

LoadedViews load_views(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw ConfigError("views directory not found: " + dir.string());
  static const std::regex kName(R"(view_(\d+)\.json)");
  std::map<int, std::filesystem::path> cameras;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, kName)) cameras.emplace(std::stoi(m[1].str()), entry.path());
  }

  LoadedViews out;
  for (const auto& [id, camera_path] : cameras) {
    const std::string stem = "view_" + std::to_string(id);
    PipelineView pv;
    try {
      pv.view.camera = camera_from_json(read_file(camera_path));
    } catch (const Error& e) {
      throw ConfigError(camera_path.string() + ": " + e.what());
    }
    pv.view.view_id = id;
    const auto png = dir / (stem + ".png");
    if (!std::filesystem::exists(png)) throw ConfigError("missing image " + png.string());
    pv.view.rgb = load_png(png);
    if (pv.view.rgb.width != pv.view.camera.width || pv.view.rgb.height != pv.view.camera.height)
      throw ConfigError(png.string() + ": image is " + std::to_string(pv.view.rgb.width) + "x" +
                        std::to_string(pv.view.rgb.height) + " but its camera expects " +
                        std::to_string(pv.view.camera.width) + "x" +
                        std::to_string(pv.view.camera.height));
    const auto depth = dir / (stem + ".dpth");
    if (!std::filesystem::exists(depth)) {
      out.warnings.push_back("view " + std::to_string(id) + " has no depth map (" +
                             depth.string() + "); excluded");
      continue;
    }
    pv.view.depth = load_depth(depth);
    if (pv.view.depth.width != pv.view.camera.width ||
        pv.view.depth.height != pv.view.camera.height)
      throw ConfigError(depth.string() + ": depth map size does not match its camera");
    pv.image = png;
    out.views.push_back(std::move(pv));
  }
  return out;
}

}  // namespace snaplabel
