#pragma once

// Hand-rolled generators and brute-force reference implementations shared by
// the unit and acceptance tests. The references are deliberately naive: they
// follow each definition literally and share no code with the library beyond
// its data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "snaplabel/camera.hpp"
#include "snaplabel/renderer.hpp"
#include "snaplabel/scene_io.hpp"

namespace testing {

using namespace snaplabel;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng_); }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }
  std::mt19937_64& engine() { return rng_; }

  Vec3 vec(double lo, double hi) { return Vec3(uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)); }

  Rgb color() {
    return {static_cast<std::uint8_t>(integer(0, 255)), static_cast<std::uint8_t>(integer(0, 255)),
            static_cast<std::uint8_t>(integer(0, 255))};
  }

  PointCloud cloud(std::size_t n, double lo = -1.0, double hi = 1.0) {
    PointCloud c;
    for (std::size_t i = 0; i < n; ++i) {
      c.points.push_back(vec(lo, hi));
      c.colors.push_back(color());
    }
    return c;
  }

  /// Random subset of [0, n) in increasing order, each index kept with `p`.
  std::vector<PointIndex> subset(std::size_t n, double p) {
    std::vector<PointIndex> out;
    for (std::size_t i = 0; i < n; ++i)
      if (coin(p)) out.push_back(static_cast<PointIndex>(i));
    return out;
  }

  /// Masks with at least one point each; overlaps allowed when `overlap`.
  MaskSet masks(std::size_t n_points, int n_masks, bool overlap) {
    MaskSet set;
    std::vector<int> owner(n_points);
    for (auto& o : owner) o = integer(-1, n_masks - 1);
    for (int k = 0; k < n_masks; ++k) {
      InstanceMask m;
      for (std::size_t i = 0; i < n_points; ++i) {
        if (owner[i] == k || (overlap && coin(0.1))) m.point_indices.push_back(static_cast<PointIndex>(i));
      }
      if (m.point_indices.empty()) m.point_indices.push_back(static_cast<PointIndex>(integer(0, static_cast<int>(n_points) - 1)));
      set.masks.push_back(std::move(m));
    }
    return set;
  }

  /// A camera at a random spot looking at the origin region, with random
  /// (not calibrated) intrinsics.
  CameraModel camera(int width, int height) {
    CameraModel cam;
    for (;;) {
      const Vec3 pos = vec(-4.0, 4.0);
      const Vec3 target = vec(-0.3, 0.3);
      if ((pos - target).norm() < 2.5) continue;
      const Vec3 up = Vec3(0, 0, 1);
      const Vec3 f = (target - pos).normalized();
      if (std::abs(f.dot(up)) > 0.95) continue;
      cam.pose = lookat(pos, target, up);
      break;
    }
    cam.width = width;
    cam.height = height;
    const double f = uniform(0.6, 1.4) * width;
    cam.intrinsics = {f, f, uniform(0.3, 0.7) * width, uniform(0.3, 0.7) * height};
    return cam;
  }

 private:
  std::mt19937_64 rng_;
};

// ---- literal projection ----------------------------------------------------

struct RefHit {
  int x = 0, y = 0;
  double depth = 0.0;
};

/// u = fx·x/z + cx, v = fy·y/z + cy, inside the closed image rectangle,
/// pixel = floor clamped to the last column/row.
inline bool ref_project(const CameraModel& cam, const Vec3& p, RefHit& hit) {
  const Mat4& T = cam.pose;
  const double cx = T(0, 0) * p.x() + T(0, 1) * p.y() + T(0, 2) * p.z() + T(0, 3);
  const double cy = T(1, 0) * p.x() + T(1, 1) * p.y() + T(1, 2) * p.z() + T(1, 3);
  const double cz = T(2, 0) * p.x() + T(2, 1) * p.y() + T(2, 2) * p.z() + T(2, 3);
  if (!(cz > 1e-4)) return false;
  const double u = cam.intrinsics.fx * (cx / cz) + cam.intrinsics.cx;
  const double v = cam.intrinsics.fy * (cy / cz) + cam.intrinsics.cy;
  if (u < 0.0 || v < 0.0 || u > cam.width || v > cam.height) return false;
  hit.x = std::min(static_cast<int>(std::floor(u)), cam.width - 1);
  hit.y = std::min(static_cast<int>(std::floor(v)), cam.height - 1);
  hit.depth = cz;
  return true;
}

// ---- brute-force splatter --------------------------------------------------

struct RefImage {
  std::vector<Rgb> rgb;
  std::vector<float> depth;
};

/// For every pixel, scans every point: the smallest float depth among the
/// splats covering it wins, the earliest point on equal depth.
inline RefImage ref_render(const PointCloud& cloud, const CameraModel& cam, int radius, Rgb bg) {
  const int W = cam.width, H = cam.height;
  std::vector<RefHit> hits(cloud.size());
  std::vector<bool> ok(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) ok[i] = ref_project(cam, cloud.points[i], hits[i]);

  RefImage out;
  out.rgb.assign(static_cast<std::size_t>(W) * H, bg);
  out.depth.assign(static_cast<std::size_t>(W) * H, std::numeric_limits<float>::infinity());
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      float best = std::numeric_limits<float>::infinity();
      long who = -1;
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (!ok[i]) continue;
        if (std::abs(hits[i].x - x) > radius || std::abs(hits[i].y - y) > radius) continue;
        const float z = static_cast<float>(hits[i].depth);
        if (who < 0 || z < best) {
          best = z;
          who = static_cast<long>(i);
        }
      }
      if (who >= 0) {
        out.rgb[static_cast<std::size_t>(y) * W + x] = cloud.colors[who];
        out.depth[static_cast<std::size_t>(y) * W + x] = best;
      }
    }
  }
  return out;
}

// ---- dense point-count / foremost-point occlusion --------------------------

struct RefOcclusion {
  /// visible[k] = Σ_pixels PC[pixel][k]·[FP[pixel] = k]
  std::vector<std::uint64_t> visible;
  /// FP per pixel: mask id, or -1 for background / empty.
  std::vector<int> fp;
};

/// Step 1: PC is a dense W×H×(M+1) array counting, per pixel, the points of
/// each mask (slot M for background) that project there and pass the depth
/// test. Step 2: FP is the mask of the foremost depth-passing point whose
/// splat covers the pixel; a point in several masks belongs to the lowest.
/// Step 3: visible counts.
inline RefOcclusion ref_occlusion(const PointCloud& cloud, const MaskSet& masks,
                                  const RenderedView& view, double tol, int radius) {
  const CameraModel& cam = view.camera;
  const int W = cam.width, H = cam.height;
  const std::size_t M = masks.size();
  std::vector<std::vector<int>> masks_of(cloud.size());
  for (std::size_t k = 0; k < M; ++k)
    for (PointIndex i : masks.masks[k].point_indices) masks_of[i].push_back(static_cast<int>(k));
  for (auto& v : masks_of) std::sort(v.begin(), v.end());

  const auto passes = [&](double z, int x, int y) {
    const float scene = view.depth.data[static_cast<std::size_t>(y) * W + x];
    return static_cast<double>(static_cast<float>(z)) <= static_cast<double>(scene) * (1.0 + tol);
  };

  std::vector<std::uint64_t> pc(static_cast<std::size_t>(W) * H * (M + 1), 0);
  std::vector<RefHit> hits(cloud.size());
  std::vector<bool> ok(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    ok[i] = ref_project(cam, cloud.points[i], hits[i]);
    if (!ok[i] || !passes(hits[i].depth, hits[i].x, hits[i].y)) continue;
    const std::size_t base = (static_cast<std::size_t>(hits[i].y) * W + hits[i].x) * (M + 1);
    if (masks_of[i].empty()) {
      ++pc[base + M];
    } else {
      for (int k : masks_of[i]) ++pc[base + k];
    }
  }

  RefOcclusion out;
  out.fp.assign(static_cast<std::size_t>(W) * H, -1);
  out.visible.assign(M, 0);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      float best = std::numeric_limits<float>::infinity();
      long who = -1;
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (!ok[i]) continue;
        if (std::abs(hits[i].x - x) > radius || std::abs(hits[i].y - y) > radius) continue;
        if (!passes(hits[i].depth, x, y)) continue;
        const float z = static_cast<float>(hits[i].depth);
        if (who < 0 || z < best) {
          best = z;
          who = static_cast<long>(i);
        }
      }
      const std::size_t p = static_cast<std::size_t>(y) * W + x;
      if (who >= 0 && !masks_of[who].empty()) out.fp[p] = masks_of[who].front();
      for (std::size_t k = 0; k < M; ++k)
        if (out.fp[p] == static_cast<int>(k)) out.visible[k] += pc[p * (M + 1) + k];
    }
  }
  return out;
}

// ---- sets ------------------------------------------------------------------

template <typename T>
double set_iou(const std::vector<T>& a, const std::vector<T>& b) {
  std::set<T> sa(a.begin(), a.end()), sb(b.begin(), b.end()), u = sa;
  u.insert(sb.begin(), sb.end());
  std::size_t inter = 0;
  for (const auto& x : sa) inter += sb.count(x);
  return u.empty() ? 0.0 : static_cast<double>(inter) / static_cast<double>(u.size());
}

// ---- reference AP ----------------------------------------------------------

struct RefPred {
  std::string label;
  double prob;
};

/// Per class: rank predictions by probability (stable), greedily take the
/// best unmatched ground truth at IoU ≥ threshold, then integrate the
/// interpolated precision by summing, for each true positive, the best
/// precision at that rank or later divided by the ground-truth count.
inline std::map<std::string, double> ref_ap(const std::vector<RefPred>& preds,
                                            const std::vector<std::string>& gt,
                                            const std::vector<std::vector<double>>& iou,
                                            double threshold) {
  std::map<std::string, double> out;
  std::set<std::string> classes(gt.begin(), gt.end());
  for (const auto& cls : classes) {
    std::vector<std::size_t> order;
    for (std::size_t p = 0; p < preds.size(); ++p)
      if (preds[p].label == cls) order.push_back(p);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return preds[a].prob > preds[b].prob; });
    std::vector<bool> taken(gt.size(), false);
    std::vector<int> tp;
    for (std::size_t p : order) {
      long best = -1;
      double best_iou = -1.0;
      for (std::size_t g = 0; g < gt.size(); ++g) {
        if (gt[g] != cls || taken[g]) continue;
        if (iou[p][g] > best_iou) {
          best_iou = iou[p][g];
          best = static_cast<long>(g);
        }
      }
      const bool hit = best >= 0 && best_iou >= threshold;
      if (hit) taken[best] = true;
      tp.push_back(hit ? 1 : 0);
    }
    const double n_gt = static_cast<double>(std::count(gt.begin(), gt.end(), cls));
    double ap = 0.0;
    int cum = 0;
    for (std::size_t i = 0; i < tp.size(); ++i) {
      cum += tp[i];
      if (!tp[i]) continue;
      double best_prec = 0.0;
      int c2 = 0;
      for (std::size_t j = 0; j < tp.size(); ++j) {
        c2 += tp[j];
        if (j >= i) best_prec = std::max(best_prec, static_cast<double>(c2) / static_cast<double>(j + 1));
      }
      ap += best_prec / n_gt;
    }
    out[cls] = ap;
  }
  return out;
}

}  // namespace testing
