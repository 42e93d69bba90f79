// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cstring>
#include <cstdio>
#include <functional>
#include <set>
#include <string>

#include "snaplabel/camera.hpp"
#include "snaplabel/config.hpp"
#include "snaplabel/eval.hpp"
#include "snaplabel/lookup.hpp"
#include "snaplabel/mask_filter.hpp"
#include "snaplabel/pipeline.hpp"
#include "snaplabel/projection.hpp"
#include "snaplabel/renderer.hpp"
#include "snaplabel/synthetic.hpp"
#include "support.hpp"

using namespace snaplabel;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), f, a, b);
  return buf;
}

MaskSet masks_of(const SyntheticScene& s) {
  MaskSet m;
  for (const auto& g : s.ground_truth) m.masks.push_back(g.mask);
  return m;
}

PipelineConfig oracle_config(const SyntheticScene& s, int workers) {
  PipelineConfig c;
  c.run.workers = workers;
  c.detector.vocabulary = s.vocabulary;
  return c;
}

// ---------------------------------------------------------------------------

Outcome e2e_oracle() {
  Outcome o;
  SyntheticOptions opt;
  opt.seed = 7;
  opt.n_objects = 10;
  const auto t0 = std::chrono::steady_clock::now();
  const auto scene = generate_synthetic(opt);
  const auto c = oracle_config(scene, 1);
  const auto masks = masks_of(scene);
  const auto run = run_lookup(scene.cloud, masks, c, make_provider_factory(c, scene.ground_truth));
  const auto rec = recognition_top1(scene.ground_truth, run.labeled);
  const auto ap = instance_ap(scored_instances(masks, run.labeled), scene.ground_truth);
  const double elapsed = seconds_since(t0);

  if (run.report.views != 24) o.fail("expected 24 views");
  for (const auto& [label, acc] : rec.per_class)
    if (acc.accuracy() != 1.0) o.fail("top-1 below 1 for " + label);
  for (const auto& cls : ap.classes)
    if (cls.ap50 != 1.0) o.fail("AP50 below 1 for " + cls.label);
  if (elapsed >= 30.0) o.fail(fmt("runtime %.2f s", elapsed));
  if (o.pass)
    o.detail = fmt("top-1 %.3f, mAP50 %.3f", rec.mean_accuracy, ap.mean_ap50) + fmt(", %.2f s", elapsed);
  return o;
}

Outcome occlusion_equivalence() {
  Outcome o;
  testing::Gen g(1001);
  double worst = 0.0;
  for (int s = 0; s < 20; ++s) {
    const auto n = static_cast<std::size_t>(g.integer(1, 500));
    const auto cloud = g.cloud(n);
    const int m = g.integer(1, 5);
    const auto masks = g.masks(n, m, g.coin());
    const auto cam = g.camera(8, 8);
    const ProjectionOptions popt{1e-2, g.integer(0, 1)};
    const auto view = render(cloud, cam, {popt.splat_radius_px, {0, 0, 0}});
    const auto ref = testing::ref_occlusion(cloud, masks, view, popt.depth_tol, popt.splat_radius_px);
    const auto map = build_mask2pixel(cloud, masks, view, popt);
    const auto rep = occlusion_report(cloud, masks, {view}, popt);
    for (int k = 0; k < m; ++k) {
      if (map.masks[k].visible_points != ref.visible[k]) o.fail("visible count differs");
      const double rate = static_cast<double>(ref.visible[k]) / masks.masks[k].size();
      worst = std::max(worst, std::abs(rep.rate(k, 0) - rate));
    }
    const auto owners = map.owner_image();
    for (std::size_t p = 0; p < ref.fp.size(); ++p)
      if (owners[p] != ref.fp[p]) o.fail("pixel owner differs");
  }
  if (worst > 1e-12) o.fail(fmt("rate error %.3g", worst));
  if (o.pass) o.detail = fmt("20 scenes, max rate error %.3g", worst);
  return o;
}

Outcome renderer_oracle() {
  Outcome o;
  testing::Gen g(1002);
  for (int s = 0; s < 50; ++s) {
    const auto cloud = g.cloud(g.integer(0, 400));
    const auto cam = g.camera(g.integer(4, 24), g.integer(4, 24));
    const int radius = g.integer(0, 2);
    const Rgb bg = g.color();
    const auto view = render(cloud, cam, {radius, bg});
    const auto ref = testing::ref_render(cloud, cam, radius, bg);
    for (std::size_t p = 0; p < ref.depth.size(); ++p) {
      const int x = static_cast<int>(p % cam.width), y = static_cast<int>(p / cam.width);
      const bool depth_ok = std::memcmp(&view.depth.data[p], &ref.depth[p], sizeof(float)) == 0;
      if (!depth_ok || view.rgb.at(x, y) != ref.rgb[p]) {
        o.fail("scene " + std::to_string(s) + " differs at pixel " + std::to_string(p));
        break;
      }
    }
  }
  if (o.pass) o.detail = "50 scenes bit-exact";
  return o;
}

Outcome calibration() {
  Outcome o;
  // The unit-intrinsics example: x-range [-1000,-192] lands on [0,1000].
  const std::vector<Vec3> line = {Vec3(-1000, 0, 1), Vec3(-192, 0, 1)};
  const auto k0 = calibrate_intrinsics(Mat4::Identity(), line, 1000, 1000, 0.0);
  if (std::abs(k0.fx * -1000 + k0.cx) > 1e-6 || std::abs(k0.fx * -192 + k0.cx - 1000) > 1e-6)
    o.fail("[-1000,-192] example does not map onto [0,1000]");

  testing::Gen g(1003);
  double worst_fill = 0.0;
  for (int s = 0; s < 100; ++s) {
    const auto cloud = g.cloud(static_cast<std::size_t>(g.integer(2, 300)), -1, 1);
    CameraModel cam = g.camera(g.integer(100, 1500), g.integer(100, 1500));
    const double margin = g.coin() ? 0.0 : g.uniform(0, 40);
    cam.intrinsics = calibrate_intrinsics(cam.pose, cloud.points, cam.width, cam.height, margin);
    if (cam.intrinsics.fx != cam.intrinsics.fy) o.fail("fx != fy");
    double u0 = 1e300, u1 = -1e300, v0 = 1e300, v1 = -1e300;
    for (const auto& p : cloud.points) {
      const Vec3 c = cam.to_camera(p);
      const double u = cam.intrinsics.fx * (c.x() / c.z()) + cam.intrinsics.cx;
      const double v = cam.intrinsics.fy * (c.y() / c.z()) + cam.intrinsics.cy;
      if (u < margin || u > cam.width - margin || v < margin || v > cam.height - margin)
        o.fail("point outside the margin box");
      u0 = std::min(u0, u), u1 = std::max(u1, u), v0 = std::min(v0, v), v1 = std::max(v1, v);
    }
    const double fill = std::max((u1 - u0) / (cam.width - 2 * margin), (v1 - v0) / (cam.height - 2 * margin));
    worst_fill = std::max(worst_fill, std::abs(fill - 1.0));
  }
  if (worst_fill > 1e-6) o.fail(fmt("fill error %.3g", worst_fill));
  if (o.pass) o.detail = fmt("100 cameras, max fill error %.3g", worst_fill);
  return o;
}

Outcome loss() {
  Outcome o;
  testing::Gen g(1004);
  double worst = 0.0;
  for (int s = 0; s < 20; ++s) {
    std::vector<IouPair> m;
    std::vector<double> u;
    for (int i = g.integer(0, 8); i > 0; --i) m.push_back({g.uniform(0, 1), g.uniform(0, 1)});
    for (int i = g.integer(0, 8); i > 0; --i) u.push_back(g.uniform(0, 1));
    const double gamma = g.uniform(0, 1);
    double hand = 0.0;
    for (double x : u) hand += gamma * x * x;
    for (const auto& p : m) hand += (p.predicted - p.ground_truth) * (p.predicted - p.ground_truth);
    worst = std::max(worst, std::abs(mask_scoring_loss(m, u, gamma) - hand));
    std::vector<IouPair> perfect;
    for (const auto& p : m) perfect.push_back({p.ground_truth, p.ground_truth});
    if (mask_scoring_loss(perfect, {}, gamma) != 0.0) o.fail("non-zero loss at perfect prediction");
  }
  const std::vector<IouPair> ex = {{0.7, 0.9}};
  const std::vector<double> exu = {0.5};
  worst = std::max(worst, std::abs(mask_scoring_loss(ex, exu, 0.1) - 0.065));
  if (worst > 1e-12) o.fail(fmt("loss error %.3g", worst));
  if (o.pass) o.detail = fmt("20 triples, max error %.3g", worst);
  return o;
}

// Random maps and detections over a 32×24 image.
struct MglScene {
  std::vector<Mask2PixelMap> maps;
  std::vector<Detection> dets;
  std::vector<int> view_ids;
  std::size_t num_masks = 0;
};

MglScene mgl_scene(testing::Gen& g) {
  constexpr int W = 32, H = 24;
  const std::vector<std::string> labels = {"bed", "chair", "desk"};
  auto blob = [&](double p) {
    std::vector<std::uint32_t> px;
    const int x0 = g.integer(0, W - 2), y0 = g.integer(0, H - 2);
    const int x1 = g.integer(x0 + 1, W), y1 = g.integer(y0 + 1, H);
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x)
        if (g.coin(p)) px.push_back(static_cast<std::uint32_t>(y * W + x));
    return px;
  };
  auto fp = [&](std::vector<std::uint32_t> px) {
    MaskFootprint f;
    f.pixels = std::move(px);
    f.visible_points = static_cast<std::uint32_t>(f.pixels.size());
    if (!f.pixels.empty()) {
      PixelBox b{W, H, 0, 0};
      for (auto p : f.pixels) {
        const int x = static_cast<int>(p % W), y = static_cast<int>(p / W);
        b = {std::min(b.x0, x), std::min(b.y0, y), std::max(b.x1, x + 1), std::max(b.y1, y + 1)};
      }
      f.box = b;
    }
    return f;
  };
  MglScene s;
  s.num_masks = static_cast<std::size_t>(g.integer(1, 6));
  std::vector<std::vector<std::uint32_t>> base;
  for (std::size_t k = 0; k < s.num_masks; ++k) base.push_back(blob(0.9));
  for (int v = 0, nv = g.integer(1, 6); v < nv; ++v) {
    Mask2PixelMap m{v, W, H, {}};
    for (std::size_t k = 0; k < s.num_masks; ++k) m.masks.push_back(fp(g.coin(0.8) ? base[k] : std::vector<std::uint32_t>{}));
    s.maps.push_back(m);
    s.view_ids.push_back(v);
    for (int d = g.integer(0, 6); d > 0; --d) {
      auto px = g.coin(0.6) ? base[g.integer(0, static_cast<int>(s.num_masks) - 1)] : blob(0.7);
      if (g.coin(0.5) && !px.empty()) px.resize(px.size() * 3 / 4 + 1);
      if (px.empty()) continue;
      s.dets.push_back({labels[g.integer(0, 2)], PixelMask{W, H, px}, g.integer(1, 4) / 4.0, v});
    }
  }
  return s;
}

Outcome mgl() {
  Outcome o;
  testing::Gen g(1005);
  for (int s = 0; s < 300; ++s) {
    auto sc = mgl_scene(g);
    LookupConfig cfg;
    cfg.min_views = g.integer(1, 3);
    const auto a = global_lookup(sc.maps, build_clt(sc.dets, {}, sc.view_ids), sc.num_masks, cfg);
    for (const auto& l : a.labeled) {
      double sum = 0;
      for (const auto& c : l.candidates) sum += c.probability;
      if (std::abs(sum - 1.0) > 1e-9) o.fail("probabilities do not sum to 1");
    }
    auto shuffled = sc;
    std::shuffle(shuffled.maps.begin(), shuffled.maps.end(), std::mt19937(s));
    std::shuffle(shuffled.dets.begin(), shuffled.dets.end(), std::mt19937(s + 7));
    const auto b = global_lookup(shuffled.maps, build_clt(shuffled.dets, {}, shuffled.view_ids), sc.num_masks, cfg);
    bool same = a.leftovers == b.leftovers && a.labeled.size() == b.labeled.size();
    for (std::size_t i = 0; same && i < a.labeled.size(); ++i)
      same = a.labeled[i].label == b.labeled[i].label && a.labeled[i].probability == b.labeled[i].probability;
    if (!same) o.fail("result depends on view or detection order");

    auto lower = cfg;
    lower.iou_gate = g.uniform(0, cfg.iou_gate);
    std::set<std::size_t> hi, lo;
    for (const auto& l : a.labeled) hi.insert(l.mask_id);
    for (const auto& l : global_lookup(sc.maps, build_clt(sc.dets, {}, sc.view_ids), sc.num_masks, lower).labeled)
      lo.insert(l.mask_id);
    if (!std::includes(lo.begin(), lo.end(), hi.begin(), hi.end())) o.fail("lower gate lost a label");
  }
  // IoU 0.15 against the 0.20 gate.
  MaskFootprint f;
  for (std::uint32_t p = 0; p < 10; ++p) f.pixels.push_back(p);
  f.box = PixelBox{0, 0, 10, 1};
  std::vector<std::uint32_t> d;
  for (std::uint32_t p = 7; p < 20; ++p) d.push_back(p);
  const Detection det{"lamp", PixelMask{32, 1, d}, 0.9, 0};
  if (std::abs(footprint_iou(f, det) - 0.15) > 1e-12) o.fail("example IoU is not 0.15");
  if (match_in_view(f, {det}, 0.20)) o.fail("0.15 passed the 0.20 gate");
  if (o.pass) o.detail = "300 random scenes; 0.15 rejected at 0.20";
  return o;
}

Outcome filter_properties() {
  Outcome o;
  testing::Gen g(1006);
  for (int s = 0; s < 1000; ++s) {
    MaskSet set;
    for (int k = g.integer(0, 10); k > 0; --k) {
      InstanceMask m;
      for (int i = g.integer(1, 100); i > 0; --i) m.point_indices.push_back(static_cast<PointIndex>(m.point_indices.size()));
      if (g.coin(0.8)) m.quality_score = g.uniform(0, 1);
      if (g.coin(0.7)) {
        std::vector<double> soft;
        const double bias = g.uniform(0, 1);
        for (std::size_t i = 0; i < m.size(); ++i) soft.push_back(g.coin(bias) ? g.uniform(0.5, 1) : g.uniform(0, 1));
        m.soft_values = soft;
      }
      set.masks.push_back(std::move(m));
    }
    FilterConfig c;
    c.beta = g.uniform(0, 1);
    c.alpha = g.uniform(0.01, 0.3);
    c.stability_iou = g.uniform(0.2, 1);
    c.n_min = static_cast<std::size_t>(g.integer(0, 80));
    const auto base = filter_mask_ids(set, c);
    auto raised = c;
    raised.beta = g.uniform(c.beta, 1);
    raised.n_min += static_cast<std::size_t>(g.integer(0, 30));
    raised.stability_iou = g.uniform(c.stability_iou, 1);
    const auto tighter = filter_mask_ids(set, raised);
    if (!std::includes(base.begin(), base.end(), tighter.begin(), tighter.end()))
      o.fail("raising a threshold grew the kept set");
    const auto once = filter_masks(set, c);
    if (filter_masks(once, c).masks != once.masks) o.fail("filter is not idempotent");
  }
  if (o.pass) o.detail = "1000 cases";
  return o;
}

Outcome degraded_detector() {
  Outcome o;
  SyntheticOptions opt;
  opt.seed = 7;
  const auto scene = generate_synthetic(opt);
  auto c = oracle_config(scene, 4);
  c.detector.drop_rate = 0.3;
  c.detector.perturb_rate = 0.1;
  const auto masks = masks_of(scene);
  try {
    const auto run = run_lookup(scene.cloud, masks, c, make_provider_factory(c, scene.ground_truth));
    if (!run.report.balanced()) o.fail("report counts do not balance");
    const auto ap = instance_ap(scored_instances(masks, run.labeled), scene.ground_truth);
    if (o.pass)
      o.detail = fmt("labeled %.0f of 10, mAP50 %.3f",
                     static_cast<double>(run.labeled.size()), ap.mean_ap50);
  } catch (const std::exception& e) {
    o.fail(std::string("threw: ") + e.what());
  }
  return o;
}

Outcome performance() {
  Outcome o;
  testing::Gen g(1009);
  PointCloud cloud = g.cloud(100000, 0, 8);
  for (auto& p : cloud.points) p.z() *= 0.3;
  const auto bounds = compute_bounds(cloud);
  const auto t0 = std::chrono::steady_clock::now();
  const auto plan = plan_snaps(bounds, cloud, SnapConfig{});
  const auto views = render_all(cloud, plan.cameras, {}, 4);
  const double elapsed = seconds_since(t0);
  if (views.size() != 24 || views[0].rgb.width != 1000) o.fail("wrong view set");
  if (elapsed >= 5.0) o.fail(fmt("%.2f s", elapsed));
  if (o.pass) o.detail = fmt("24 views at 1000x1000 in %.2f s", elapsed);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"end-to-end oracle correctness", e2e_oracle},
      {"occlusion report equivalence", occlusion_equivalence},
      {"renderer oracle", renderer_oracle},
      {"intrinsic calibration", calibration},
      {"mask scoring loss", loss},
      {"lookup gate and aggregation", mgl},
      {"filter monotonicity and idempotence", filter_properties},
      {"degraded detector robustness", degraded_detector},
      {"render performance budget", performance},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.fail(std::string("threw: ") + e.what());
    }
    failures += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
