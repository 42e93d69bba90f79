#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "snaplabel/error.hpp"
#include "snaplabel/eval.hpp"
#include "support.hpp"

using namespace snaplabel;

namespace {

InstanceMask mask_of(std::vector<PointIndex> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return {std::move(ids), std::nullopt, std::nullopt};
}

InstanceMask range(PointIndex lo, PointIndex hi) {
  std::vector<PointIndex> ids;
  for (PointIndex i = lo; i < hi; ++i) ids.push_back(i);
  return mask_of(ids);
}

// Disjoint GT blocks of 20 points; predictions are noisy copies or junk.
struct RandomEval {
  std::vector<LabeledMask3D> gt;
  std::vector<ScoredInstance> preds;
};

RandomEval random_eval(testing::Gen& g) {
  const std::vector<std::string> labels = {"bed", "chair", "desk"};
  RandomEval r;
  const int n_gt = g.integer(1, 6);
  for (int k = 0; k < n_gt; ++k)
    r.gt.push_back({range(20 * k, 20 * k + 20), labels[g.integer(0, 2)]});
  for (int p = g.integer(0, 8); p > 0; --p) {
    std::vector<PointIndex> ids;
    if (g.coin(0.7)) {
      const int k = g.integer(0, n_gt - 1);
      const int keep = g.integer(1, 20);
      for (int i = 0; i < keep; ++i) ids.push_back(20 * k + i);
      for (int extra = g.integer(0, 15); extra > 0; --extra) ids.push_back(g.integer(0, 20 * n_gt + 20));
    } else {
      for (int extra = g.integer(1, 30); extra > 0; --extra) ids.push_back(g.integer(0, 20 * n_gt + 20));
    }
    r.preds.push_back({mask_of(ids), labels[g.integer(0, 2)], g.integer(1, 10) / 10.0});
  }
  return r;
}

}  // namespace

TEST_CASE("mask IoU") {
  CHECK(mask_iou(range(0, 10), range(0, 10)) == 1.0);
  CHECK(mask_iou(range(0, 10), range(10, 20)) == 0.0);
  CHECK(mask_iou(range(0, 10), range(5, 15)) == doctest::Approx(5.0 / 15.0));
  CHECK(mask_iou(range(0, 10), mask_of({})) == 0.0);
  CHECK_THROWS_AS(mask_iou(mask_of({}), mask_of({})), DomainError);
  testing::Gen g(71);
  for (int s = 0; s < 300; ++s) {
    const auto a = mask_of(g.subset(60, g.uniform(0, 1)));
    const auto b = mask_of(g.subset(60, g.uniform(0, 1)));
    if (a.point_indices.empty() && b.point_indices.empty()) continue;
    CHECK(std::abs(mask_iou(a, b) - testing::set_iou(a.point_indices, b.point_indices)) < 1e-15);
  }
}

TEST_CASE("perfect predictions score 1, no predictions score 0") {
  const std::vector<LabeledMask3D> gt = {{range(0, 10), "chair"}, {range(10, 20), "desk"}};
  std::vector<ScoredInstance> perfect;
  for (const auto& x : gt) perfect.push_back({x.mask, x.label, 1.0});
  const auto r = instance_ap(perfect, gt);
  CHECK(r.mean_ap25 == 1.0);
  CHECK(r.mean_ap50 == 1.0);
  CHECK(r.mean_ap == 1.0);
  const auto none = instance_ap({}, gt);
  CHECK(none.mean_ap == 0.0);
  REQUIRE(none.classes.size() == 2);
  CHECK(none.classes[0].num_gt == 1);
}

TEST_CASE("scripted scene matches the reference scorer") {
  // Five instances, two classes. Point blocks of 10.
  const std::vector<LabeledMask3D> gt = {{range(0, 10), "chair"},
                                         {range(10, 20), "chair"},
                                         {range(20, 30), "chair"},
                                         {range(30, 40), "table"},
                                         {range(40, 50), "table"}};
  const std::vector<ScoredInstance> preds = {
      {range(0, 10), "chair", 0.9},    // exact
      {range(12, 22), "chair", 0.8},   // 8/12 with gt 1
      {range(0, 6), "chair", 0.7},     // duplicate of gt 0
      {range(25, 40), "chair", 0.6},   // 5/20 with gt 2
      {range(30, 38), "table", 0.95},  // 8/10 with gt 3
      {range(44, 60), "table", 0.5},   // 6/20 with gt 4
      {range(40, 50), "chair", 0.4},   // wrong class
  };
  std::vector<testing::RefPred> rp;
  std::vector<std::string> gl;
  std::vector<std::vector<double>> iou(preds.size(), std::vector<double>(gt.size()));
  for (const auto& p : preds) rp.push_back({p.label, p.probability});
  for (const auto& x : gt) gl.push_back(x.label);
  for (std::size_t p = 0; p < preds.size(); ++p)
    for (std::size_t g = 0; g < gt.size(); ++g) iou[p][g] = mask_iou(preds[p].mask, gt[g].mask);

  const auto r = instance_ap(preds, gt);
  const auto r25 = testing::ref_ap(rp, gl, iou, 0.25);
  const auto r50 = testing::ref_ap(rp, gl, iou, 0.50);
  REQUIRE(r.classes.size() == 2);
  for (const auto& c : r.classes) {
    CHECK(std::abs(c.ap25 - r25.at(c.label)) < 1e-12);
    CHECK(std::abs(c.ap50 - r50.at(c.label)) < 1e-12);
    double mean = 0;
    for (int t = 0; t < 10; ++t) mean += testing::ref_ap(rp, gl, iou, 0.5 + 0.05 * t).at(c.label);
    CHECK(std::abs(c.ap - mean / 10) < 1e-12);
  }
  // Hand values at 0.5: chair TPs at ranks 1 and 2 of 5 over 3 GT; table 1 of 2.
  CHECK(r.classes[0].ap50 == doctest::Approx(2.0 / 3.0));
  CHECK(r.classes[1].ap50 == doctest::Approx(0.5));
  CHECK(r.mean_ap50 == doctest::Approx((2.0 / 3.0 + 0.5) / 2));
}

TEST_CASE("random scenes match the reference scorer") {
  testing::Gen g(72);
  for (int s = 0; s < 200; ++s) {
    auto sc = random_eval(g);
    // The reference ranks with a stable sort; hand it the canonical order.
    std::stable_sort(sc.preds.begin(), sc.preds.end(), [](const auto& a, const auto& b) {
      if (a.probability != b.probability) return a.probability > b.probability;
      if (a.label != b.label) return a.label < b.label;
      return a.mask.point_indices < b.mask.point_indices;
    });
    std::vector<testing::RefPred> rp;
    std::vector<std::string> gl;
    std::vector<std::vector<double>> iou(sc.preds.size(), std::vector<double>(sc.gt.size()));
    for (const auto& p : sc.preds) rp.push_back({p.label, p.probability});
    for (const auto& x : sc.gt) gl.push_back(x.label);
    for (std::size_t p = 0; p < sc.preds.size(); ++p)
      for (std::size_t k = 0; k < sc.gt.size(); ++k) iou[p][k] = mask_iou(sc.preds[p].mask, sc.gt[k].mask);
    const auto r = instance_ap(sc.preds, sc.gt);
    const auto r25 = testing::ref_ap(rp, gl, iou, 0.25);
    const auto r50 = testing::ref_ap(rp, gl, iou, 0.5);
    for (const auto& c : r.classes) {
      CHECK(std::abs(c.ap25 - r25.at(c.label)) < 1e-12);
      CHECK(std::abs(c.ap50 - r50.at(c.label)) < 1e-12);
    }
  }
}

TEST_CASE("AP never rises with the IoU threshold") {
  testing::Gen g(73);
  for (int s = 0; s < 300; ++s) {
    const auto sc = random_eval(g);
    ApInput in;
    for (const auto& p : sc.preds) {
      in.pred_labels.push_back(p.label);
      in.pred_probs.push_back(p.probability);
    }
    for (const auto& x : sc.gt) in.gt_labels.push_back(x.label);
    const auto iou = [&](std::size_t p, std::size_t k) { return mask_iou(sc.preds[p].mask, sc.gt[k].mask); };
    std::map<std::string, double> prev;
    for (int t = 0; t <= 20; ++t) {
      const auto cur = average_precision(in, iou, 0.05 * t);
      for (const auto& [label, ap] : cur)
        if (prev.count(label)) CHECK(ap <= prev[label] + 1e-15);
      prev = cur;
    }
  }
}

TEST_CASE("zero-probability non-overlapping duplicates change nothing") {
  testing::Gen g(74);
  for (int s = 0; s < 100; ++s) {
    const auto sc = random_eval(g);
    auto extended = sc.preds;
    for (int d = g.integer(1, 4); d > 0; --d)
      extended.push_back({range(10000 + 10 * d, 10005 + 10 * d), sc.gt[0].label, 0.0});
    const auto a = instance_ap(sc.preds, sc.gt);
    const auto b = instance_ap(extended, sc.gt);
    CHECK(a.mean_ap25 == b.mean_ap25);
    CHECK(a.mean_ap50 == b.mean_ap50);
    CHECK(a.mean_ap == b.mean_ap);
  }
}

TEST_CASE("prediction order does not matter") {
  testing::Gen g(75);
  for (int s = 0; s < 100; ++s) {
    auto sc = random_eval(g);
    const auto a = instance_ap(sc.preds, sc.gt);
    std::shuffle(sc.preds.begin(), sc.preds.end(), std::mt19937(s));
    const auto b = instance_ap(sc.preds, sc.gt);
    CHECK(eval_csv(a) == eval_csv(b));
  }
}

TEST_CASE("axis-aligned boxes") {
  PointCloud cloud;
  for (int i = 0; i < 8; ++i) cloud.points.push_back(Vec3(i & 1, (i >> 1) & 1, (i >> 2) & 1));
  cloud.colors.assign(8, Rgb{0, 0, 0});
  const auto unit = to_aabb(range(0, 8), cloud);
  CHECK(unit.min == Vec3(0, 0, 0));
  CHECK(unit.max == Vec3(1, 1, 1));
  const auto single = to_aabb(mask_of({5}), cloud);
  CHECK(single.min == single.max);
  CHECK_THROWS_AS(to_aabb(mask_of({}), cloud), DomainError);

  testing::Gen g(76);
  const auto big = g.cloud(200, -5, 5);
  for (int s = 0; s < 100; ++s) {
    auto ids = g.subset(200, 0.2);
    if (ids.empty()) ids.push_back(0);
    const auto box = to_aabb(mask_of(ids), big);
    Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
    for (auto i : ids)
      for (int a = 0; a < 3; ++a) {
        lo[a] = std::min(lo[a], big.points[i][a]);
        hi[a] = std::max(hi[a], big.points[i][a]);
      }
    CHECK(box.min == lo);
    CHECK(box.max == hi);
  }
}

TEST_CASE("3D box IoU is symmetric and 1 only for identical boxes") {
  const Aabb a{Vec3(0, 0, 0), Vec3(2, 2, 2)};
  const Aabb b{Vec3(1, 0, 0), Vec3(3, 2, 2)};
  CHECK(box_iou_3d(a, b) == doctest::Approx(4.0 / 12.0));
  CHECK(box_iou_3d(a, a) == 1.0);
  const Aabb flat{Vec3(0, 0, 1), Vec3(1, 1, 1)};
  CHECK(box_iou_3d(flat, flat) == 1.0);
  CHECK(box_iou_3d(flat, a) < 1.0);
  testing::Gen g(77);
  for (int s = 0; s < 1000; ++s) {
    auto rnd = [&] {
      Vec3 p = g.vec(-1, 1), q = g.vec(-1, 1);
      if (g.coin(0.2)) q[g.integer(0, 2)] = p[0];
      return Aabb{p.cwiseMin(q), p.cwiseMax(q)};
    };
    const Aabb x = rnd();
    const Aabb y = g.coin(0.1) ? x : rnd();
    const double v = box_iou_3d(x, y);
    CHECK(v == box_iou_3d(y, x));
    CHECK(v >= 0.0);
    CHECK((v == 1.0) == (x == y));
  }
}

TEST_CASE("box AP mirrors the mask cases") {
  const std::vector<LabeledBox> gt = {{{Vec3(0, 0, 0), Vec3(1, 1, 1)}, "bed"},
                                      {{Vec3(5, 0, 0), Vec3(6, 1, 1)}, "sofa"}};
  std::vector<ScoredBox> perfect;
  for (const auto& x : gt) perfect.push_back({x.box, x.label, 1.0});
  CHECK(detection_ap25(perfect, gt).mean_ap25 == 1.0);
  CHECK(detection_ap25({}, gt).mean_ap25 == 0.0);
  // Half-overlapping bed box: IoU 1/3 passes 0.25 but not 0.5.
  const std::vector<ScoredBox> shifted = {{{Vec3(0.5, 0, 0), Vec3(1.5, 1, 1)}, "bed", 0.9}};
  const auto r = detection_ap25(shifted, gt);
  CHECK(r.classes[0].ap25 == 1.0);
  CHECK(r.classes[0].ap50 == 0.0);
  CHECK(r.classes[1].ap25 == 0.0);
}

TEST_CASE("recognition accuracy counts") {
  const std::vector<LabeledMask3D> gt = {{range(0, 2), "chair"},
                                         {range(2, 4), "chair"},
                                         {range(4, 6), "chair"},
                                         {range(6, 8), "desk"}};
  auto lm = [](std::size_t id, std::string label) {
    LabeledMask m;
    m.mask_id = id;
    m.label = std::move(label);
    m.probability = 1;
    return m;
  };
  auto r = recognition_top1(gt, {lm(0, "chair"), lm(1, "chair"), lm(2, "chair"), lm(3, "desk")});
  CHECK(r.mean_accuracy == 1.0);

  r = recognition_top1(gt, {});
  CHECK(r.mean_accuracy == 0.0);
  CHECK(r.confusion.at({"chair", ""}) == 3);

  r = recognition_top1(gt, {lm(0, "chair"), lm(2, "desk"), lm(3, "desk")});
  CHECK(r.per_class.at("chair").correct == 1);
  CHECK(r.per_class.at("chair").total == 3);
  CHECK(r.per_class.at("desk").accuracy() == 1.0);
  CHECK(r.mean_accuracy == doctest::Approx((1.0 / 3.0 + 1.0) / 2));
  CHECK(r.confusion.at({"chair", "desk"}) == 1);
  CHECK(r.confusion.at({"chair", ""}) == 1);
  CHECK(recognition_csv(r).find("chair") != std::string::npos);
}

TEST_CASE("CSV layout") {
  const std::vector<LabeledMask3D> gt = {{range(0, 10), "chair"}};
  const auto csv = eval_csv(instance_ap({{range(0, 10), "chair", 1.0}}, gt));
  CHECK(csv == "class,AP25,AP50,AP\nchair,1.000000,1.000000,1.000000\nmean,1.000000,1.000000,1.000000\n");
}
