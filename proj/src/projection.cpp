#include "snaplabel/projection.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "snaplabel/error.hpp"
#include "snaplabel/parallel.hpp"

namespace snaplabel {

MaskMembership::MaskMembership(const MaskSet& masks, std::size_t num_points)
    : offsets_(num_points + 1, 0), totals_(masks.size(), 0) {
  validate(masks, num_points);
  for (const auto& m : masks.masks)
    for (PointIndex i : m.point_indices) ++offsets_[i + 1];
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  mask_ids_.resize(offsets_.back());
  std::vector<std::uint32_t> cursor(offsets_.begin(), offsets_.end() - 1);
  // Masks are visited in order, so each point's list comes out sorted.
  for (std::size_t k = 0; k < masks.size(); ++k) {
    totals_[k] = static_cast<std::uint32_t>(masks.masks[k].point_indices.size());
    for (PointIndex i : masks.masks[k].point_indices) mask_ids_[cursor[i]++] = static_cast<std::uint32_t>(k);
  }
}

std::vector<std::int32_t> Mask2PixelMap::owner_image() const {
  std::vector<std::int32_t> img(static_cast<std::size_t>(width) * height, MaskMembership::kBackground);
  for (std::size_t k = 0; k < masks.size(); ++k)
    for (std::uint32_t p : masks[k].pixels) img[p] = static_cast<std::int32_t>(k);
  return img;
}

namespace {

constexpr std::uint32_t kOffImage = 0xFFFFFFFFu;

inline bool visible_at(float z, float scene_depth, double tol) {
  return static_cast<double>(z) <= static_cast<double>(scene_depth) * (1.0 + tol);
}

}  // namespace

Mask2PixelMap build_mask2pixel(const PointCloud& cloud, const MaskMembership& membership,
                               const RenderedView& view, const ProjectionOptions& options) {
  if (membership.num_points() != cloud.size())
    throw DomainError("mask membership was built for a different cloud");
  const CameraModel& cam = view.camera;
  const int W = cam.width;
  const int H = cam.height;
  if (view.depth.width != W || view.depth.height != H)
    throw DomainError("depth map size does not match camera");
  const int r = options.splat_radius_px;
  const std::size_t npx = static_cast<std::size_t>(W) * H;
  const float* scene_depth = view.depth.data.data();

  // Foremost visible point per pixel, first in cloud order on ties.
  std::vector<float> best(npx, DepthMap::kEmpty);
  std::vector<std::int32_t> winner(npx, -1);
  std::vector<std::uint32_t> center(cloud.size(), kOffImage);
  std::vector<float> depth(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto hit = cam.project(cloud.points[i]);
    if (!hit) continue;
    const float z = static_cast<float>(hit->depth);
    center[i] = static_cast<std::uint32_t>(hit->y) * W + hit->x;
    depth[i] = z;
    const int y0 = std::max(0, hit->y - r), y1 = std::min(H - 1, hit->y + r);
    const int x0 = std::max(0, hit->x - r), x1 = std::min(W - 1, hit->x + r);
    for (int y = y0; y <= y1; ++y) {
      std::size_t p = static_cast<std::size_t>(y) * W + x0;
      for (int x = x0; x <= x1; ++x, ++p) {
        if (visible_at(z, scene_depth[p], options.depth_tol) && z < best[p]) {
          best[p] = z;
          winner[p] = static_cast<std::int32_t>(i);
        }
      }
    }
  }

  Mask2PixelMap map;
  map.view_id = view.view_id;
  map.width = W;
  map.height = H;
  map.masks.resize(membership.num_masks());
  std::vector<std::int32_t> owner(npx, MaskMembership::kBackground);
  for (std::size_t p = 0; p < npx; ++p) {
    if (winner[p] < 0) continue;
    const std::int32_t k = membership.owner(static_cast<PointIndex>(winner[p]));
    owner[p] = k;
    if (k == MaskMembership::kBackground) continue;
    MaskFootprint& fp = map.masks[k];
    fp.pixels.push_back(static_cast<std::uint32_t>(p));
    const int x = static_cast<int>(p % W);
    const int y = static_cast<int>(p / W);
    if (!fp.box) {
      fp.box = PixelBox{x, y, x + 1, y + 1};
    } else {
      fp.box->x0 = std::min(fp.box->x0, x);
      fp.box->x1 = std::max(fp.box->x1, x + 1);
      fp.box->y1 = y + 1;
    }
  }

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const std::uint32_t c = center[i];
    if (c == kOffImage || owner[c] == MaskMembership::kBackground) continue;
    if (!visible_at(depth[i], scene_depth[c], options.depth_tol)) continue;
    for (std::uint32_t k : membership.masks_of(static_cast<PointIndex>(i))) {
      if (owner[c] == static_cast<std::int32_t>(k)) ++map.masks[k].visible_points;
    }
  }
  return map;
}

Mask2PixelMap build_mask2pixel(const PointCloud& cloud, const MaskSet& masks,
                               const RenderedView& view, const ProjectionOptions& options) {
  return build_mask2pixel(cloud, MaskMembership(masks, cloud.size()), view, options);
}

std::vector<Mask2PixelMap> build_mask2pixel_all(const PointCloud& cloud,
                                                const MaskMembership& membership,
                                                const std::vector<RenderedView>& views,
                                                const ProjectionOptions& options, int workers) {
  std::vector<Mask2PixelMap> maps(views.size());
  parallel_for(views.size(), workers, [&](std::size_t v) {
    maps[v] = build_mask2pixel(cloud, membership, views[v], options);
  });
  return maps;
}

OcclusionReport occlusion_report(const std::vector<Mask2PixelMap>& maps,
                                 const MaskMembership& membership) {
  if (maps.empty()) throw DomainError("occlusion report needs at least one view");
  OcclusionReport report;
  report.num_masks = membership.num_masks();
  report.total_points = membership.totals();
  for (std::size_t k = 0; k < report.num_masks; ++k) {
    if (report.total_points[k] == 0)
      throw DomainError("mask " + std::to_string(k) + " has no points");
  }
  for (const auto& m : maps) report.view_ids.push_back(m.view_id);
  const std::size_t V = maps.size();
  report.rates.assign(report.num_masks * V, 0.0);
  for (std::size_t v = 0; v < V; ++v) {
    if (maps[v].masks.size() != report.num_masks)
      throw DomainError("Mask2Pixel map does not match the mask set");
    for (std::size_t k = 0; k < report.num_masks; ++k) {
      report.rates[k * V + v] = static_cast<double>(maps[v].masks[k].visible_points) /
                                static_cast<double>(report.total_points[k]);
    }
  }
  return report;
}

OcclusionReport occlusion_report(const PointCloud& cloud, const MaskSet& masks,
                                 const std::vector<RenderedView>& views,
                                 const ProjectionOptions& options, int workers) {
  const MaskMembership membership(masks, cloud.size());
  return occlusion_report(build_mask2pixel_all(cloud, membership, views, options, workers),
                          membership);
}

std::vector<int> top_k_views(const OcclusionReport& report, std::size_t mask, std::size_t k) {
  const std::size_t V = report.view_ids.size();
  if (mask >= report.num_masks) throw DomainError("mask id out of range");
  if (k < 1 || k > V) throw DomainError("k must be in [1, number of views]");
  std::vector<std::size_t> order(V);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ra = report.rate(mask, a), rb = report.rate(mask, b);
    if (ra != rb) return ra > rb;
    return report.view_ids[a] < report.view_ids[b];
  });
  std::vector<int> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(report.view_ids[order[i]]);
  return out;
}

Gray16Image label_image(const Mask2PixelMap& map) {
  if (map.masks.size() > 65535) throw DomainError("too many masks for a 16-bit label image");
  Gray16Image img;
  img.width = map.width;
  img.height = map.height;
  img.data.assign(static_cast<std::size_t>(map.width) * map.height, 0);
  for (std::size_t k = 0; k < map.masks.size(); ++k)
    for (std::uint32_t p : map.masks[k].pixels) img.data[p] = static_cast<std::uint16_t>(k + 1);
  return img;
}

void write_occlusion_csv(const OcclusionReport& report, const std::filesystem::path& path) {
  std::string out = "mask_id,view_id,rate\n";
  char buf[96];
  for (std::size_t k = 0; k < report.num_masks; ++k) {
    for (std::size_t v = 0; v < report.view_ids.size(); ++v) {
      const int n = std::snprintf(buf, sizeof(buf), "%zu,%d,%.17g\n", k, report.view_ids[v],
                                  report.rate(k, v));
      out.append(buf, static_cast<std::size_t>(n));
    }
  }
  write_file(path, out);
}

}  // namespace snaplabel
