// Command-line front end: snap, lookup, eval, gen-synthetic, render-debug.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "snaplabel/config.hpp"
#include "snaplabel/error.hpp"
#include "snaplabel/eval.hpp"
#include "snaplabel/pipeline.hpp"
#include "snaplabel/projection.hpp"
#include "snaplabel/scene_io.hpp"
#include "snaplabel/synthetic.hpp"

namespace fs = std::filesystem;
using namespace snaplabel;

namespace {

struct Flags {
  std::string config;
  std::string scene;
  std::string masks;
  std::string provider;
  std::string endpoint;
  std::string vocab;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> beta, alpha, gamma;
  std::optional<std::size_t> n_min;
  // gen-synthetic
  int objects = 10;
  double noise = 0.0;
};

PipelineConfig resolve(const Flags& f) {
  PipelineConfig c = f.config.empty() ? PipelineConfig{} : load_config(f.config);
  if (!f.scene.empty()) c.scene.cloud = f.scene;
  if (!f.masks.empty()) c.scene.masks = f.masks;
  if (!f.provider.empty()) {
    auto k = parse_provider_kind(f.provider);
    if (!k) throw ConfigError("--provider must be oracle, file or http");
    c.detector.provider = *k;
  }
  if (!f.endpoint.empty()) c.detector.endpoint = f.endpoint;
  if (!f.vocab.empty()) {
    c.detector.vocabulary.clear();
    std::size_t pos = 0;
    while (pos <= f.vocab.size()) {
      std::size_t end = f.vocab.find(',', pos);
      if (end == std::string::npos) end = f.vocab.size();
      std::string item = f.vocab.substr(pos, end - pos);
      const auto b = item.find_first_not_of(' ');
      const auto e = item.find_last_not_of(' ');
      if (b != std::string::npos) c.detector.vocabulary.push_back(item.substr(b, e - b + 1));
      pos = end + 1;
    }
  }
  if (!f.out.empty()) c.run.out = f.out;
  if (f.seed) c.run.seed = *f.seed;
  if (f.beta) c.filter.beta = *f.beta;
  if (f.alpha) c.filter.alpha = *f.alpha;
  if (f.gamma) c.gamma = *f.gamma;
  if (f.n_min) c.filter.n_min = *f.n_min;
  validate(c);
  return c;
}

PointCloud load_scene(const PipelineConfig& c) {
  if (c.scene.cloud.empty()) throw ConfigError("no scene given (--scene or scene.cloud)");
  const auto ext = c.scene.cloud.extension().string();
  return load_point_cloud(c.scene.cloud, ext == ".ply" ? CloudFormat::kPly : CloudFormat::kXyzrgbText);
}

MaskSet load_mask_set(const PipelineConfig& c) {
  if (c.scene.masks.empty()) throw ConfigError("no masks given (--masks or scene.masks)");
  return load_masks(c.scene.masks);
}

std::vector<LabeledMask3D> load_gt(const PipelineConfig& c, bool required) {
  if (c.scene.ground_truth.empty()) {
    if (required) throw ConfigError("scene.ground_truth is not set");
    return {};
  }
  if (!fs::exists(c.scene.ground_truth))
    throw ConfigError("ground truth file not found: " + c.scene.ground_truth.string());
  return load_ground_truth(c.scene.ground_truth);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

int cmd_gen_synthetic(const Flags& f) {
  SyntheticOptions o;
  o.seed = f.seed.value_or(0);
  o.n_objects = f.objects;
  o.noise = f.noise;
  const fs::path out = f.out.empty() ? fs::path("synthetic") : fs::path(f.out);
  const auto scene = generate_synthetic(o);
  write_synthetic(scene, out, o.seed);
  std::printf("wrote %zu points, %zu objects to %s\n", scene.cloud.size(),
              scene.ground_truth.size(), out.string().c_str());
  return 0;
}

int cmd_snap(const Flags& f) {
  const auto c = resolve(f);
  const auto cloud = load_scene(c);
  const auto views = snap_scene(cloud, c);
  const fs::path dir = c.run.out / "views";
  write_views(views, dir);
  std::printf("wrote %zu views to %s\n", views.size(), dir.string().c_str());
  return 0;
}

int cmd_lookup(const Flags& f) {
  auto c = resolve(f);
  const auto cloud = load_scene(c);
  const auto masks = load_mask_set(c);
  const bool oracle = c.detector.provider == ProviderKind::kOracle;
  auto gt = load_gt(c, oracle);
  if (oracle && c.detector.vocabulary.empty()) {
    for (const auto& g : gt) {
      if (std::find(c.detector.vocabulary.begin(), c.detector.vocabulary.end(), g.label) ==
          c.detector.vocabulary.end())
        c.detector.vocabulary.push_back(g.label);
    }
    std::sort(c.detector.vocabulary.begin(), c.detector.vocabulary.end());
  }
  const auto factory = make_provider_factory(c, std::move(gt));

  std::optional<LoadedViews> external;
  if (!c.run.views.empty()) external = load_views(c.run.views);
  auto run = run_lookup(cloud, masks, c, factory, external ? &external->views : nullptr);
  if (external)
    run.report.warnings.insert(run.report.warnings.begin(), external->warnings.begin(),
                               external->warnings.end());

  ensure_dir(c.run.out);
  write_file(c.run.out / "labeled.jsonl", labeled_to_jsonl(run.labeled));
  write_file(c.run.out / "report.json", report_to_json(run.report));
  for (const auto& w : run.report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  const auto& r = run.report;
  std::printf("masks in %zu: filtered %zu, global %zu, local %zu, dropped %zu\n", r.input,
              r.filtered_out, r.global_labeled, r.local_labeled, r.dropped);
  return 0;
}

int cmd_eval(const Flags& f) {
  const auto c = resolve(f);
  const auto gt = load_gt(c, true);
  const auto masks = load_mask_set(c);
  if (c.eval.predictions.empty()) throw ConfigError("eval.predictions is not set");
  if (!fs::exists(c.eval.predictions))
    throw ConfigError("predictions file not found: " + c.eval.predictions.string());
  const auto labeled = load_labeled(c.eval.predictions);

  const auto result = instance_ap(scored_instances(masks, labeled), gt);
  ensure_dir(c.run.out);
  write_file(c.run.out / "metrics.csv", eval_csv(result));
  std::printf("%s", summary_table(result).c_str());

  bool masks_are_gt = masks.size() == gt.size();
  for (std::size_t i = 0; masks_are_gt && i < gt.size(); ++i)
    masks_are_gt = masks.masks[i].point_indices == gt[i].mask.point_indices;
  if (masks_are_gt) {
    const auto rec = recognition_top1(gt, labeled);
    write_file(c.run.out / "recognition.csv", recognition_csv(rec));
    std::printf("top-1 accuracy (class mean): %.4f\n", rec.mean_accuracy);
  }

  if (!c.scene.cloud.empty()) {
    const auto cloud = load_scene(c);
    std::vector<ScoredBox> pred;
    for (const auto& l : labeled) {
      const auto& m = masks.masks.at(l.mask_id);
      if (!m.point_indices.empty()) pred.push_back({to_aabb(m, cloud), l.label, l.probability});
    }
    std::vector<LabeledBox> boxes;
    for (const auto& g : gt) boxes.push_back({to_aabb(g.mask, cloud), g.label});
    const auto det = detection_ap25(std::move(pred), boxes);
    write_file(c.run.out / "detection.csv", eval_csv(det));
    std::printf("box AP25 (class mean): %.4f\n", det.mean_ap25);
  }
  return 0;
}

int cmd_render_debug(const Flags& f) {
  const auto c = resolve(f);
  const auto cloud = load_scene(c);
  const auto masks = load_mask_set(c);
  validate(masks, cloud.size());
  std::vector<RenderedView> views;
  if (!c.run.views.empty()) {
    auto loaded = load_views(c.run.views);
    for (const auto& w : loaded.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    for (auto& v : loaded.views) views.push_back(std::move(v.view));
  } else {
    if (c.scene.crop_margin > 0.0)
      throw ConfigError("render-debug renders the uncropped scene; set scene.crop_margin = 0");
    views = snap_scene(cloud, c);
  }
  const MaskMembership membership(masks, cloud.size());
  const auto maps = build_mask2pixel_all(cloud, membership, views, c.projection, c.run.workers);
  const fs::path dir = c.run.out / "labels";
  ensure_dir(dir);
  for (const auto& m : maps)
    save_png16(label_image(m), dir / ("view_" + std::to_string(m.view_id) + ".png"));
  write_occlusion_csv(occlusion_report(maps, membership), c.run.out / "occlusion.csv");
  std::printf("wrote %zu label images and occlusion.csv to %s\n", maps.size(),
              c.run.out.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-vocabulary labeling of 3D instance masks"};
  app.require_subcommand(1);
  Flags f;

  const auto common = [&](CLI::App* s) {
    s->add_option("--config", f.config, "pipeline config file")->check(CLI::ExistingFile);
    s->add_option("--scene", f.scene, "point cloud (.ply or xyzrgb text)");
    s->add_option("--masks", f.masks, "mask set (JSON lines)");
    s->add_option("--provider", f.provider, "detector provider")
        ->check(CLI::IsMember({"oracle", "file", "http"}));
    s->add_option("--endpoint", f.endpoint, "detector URL for the http provider");
    s->add_option("--vocab", f.vocab, "comma-separated vocabulary");
    s->add_option("--out", f.out, "output directory");
    s->add_option("--seed", f.seed, "random seed");
    s->add_option("--beta", f.beta, "minimum predicted mask IoU");
    s->add_option("--alpha", f.alpha, "stability threshold offset");
    s->add_option("--gamma", f.gamma, "unmatched-mask loss weight");
    s->add_option("--n-min", f.n_min, "minimum mask size in points");
  };

  auto* snap = app.add_subcommand("snap", "render snapshots of the scene");
  auto* lookup = app.add_subcommand("lookup", "label masks through the detector");
  auto* eval = app.add_subcommand("eval", "score labeled masks against ground truth");
  auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic test scene");
  auto* debug = app.add_subcommand("render-debug", "export mask label images and occlusion rates");
  for (auto* s : {snap, lookup, eval, debug}) common(s);
  gen->add_option("--out", f.out, "output directory");
  gen->add_option("--seed", f.seed, "random seed");
  gen->add_option("--objects", f.objects, "number of objects")->check(CLI::NonNegativeNumber);
  gen->add_option("--noise", f.noise, "position noise (m)")->check(CLI::NonNegativeNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen_synthetic(f);
    if (*snap) return cmd_snap(f);
    if (*lookup) return cmd_lookup(f);
    if (*eval) return cmd_eval(f);
    if (*debug) return cmd_render_debug(f);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const TransportError& e) {
    std::fprintf(stderr, "detector error: %s\n", e.what());
    return 4;
  } catch (const ProtocolError& e) {
    std::fprintf(stderr, "detector error: %s\n", e.what());
    return 4;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
