#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "snaplabel/geometry.hpp"
#include "snaplabel/image.hpp"
#include "snaplabel/renderer.hpp"
#include "snaplabel/scene_io.hpp"

namespace snaplabel {

/// Point -> mask lookup for a MaskSet. Masks may overlap; a point's owner
/// is the lowest-indexed mask containing it.
class MaskMembership {
 public:
  static constexpr std::int32_t kBackground = -1;

  MaskMembership(const MaskSet& masks, std::size_t num_points);

  std::span<const std::uint32_t> masks_of(PointIndex point) const {
    return {mask_ids_.data() + offsets_[point], mask_ids_.data() + offsets_[point + 1]};
  }
  std::int32_t owner(PointIndex point) const {
    return offsets_[point] == offsets_[point + 1] ? kBackground
                                                  : static_cast<std::int32_t>(mask_ids_[offsets_[point]]);
  }
  std::size_t num_masks() const { return totals_.size(); }
  std::size_t num_points() const { return offsets_.size() - 1; }
  /// Point count of each mask (T_k).
  const std::vector<std::uint32_t>& totals() const { return totals_; }

 private:
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> mask_ids_;
  std::vector<std::uint32_t> totals_;
};

struct ProjectionOptions {
  /// A point is visible at a pixel when its depth is within this relative
  /// tolerance of the stored scene depth.
  double depth_tol = 1e-2;
  int splat_radius_px = 1;
};

struct MaskFootprint {
  /// Owned pixels as sorted row-major linear indices.
  std::vector<std::uint32_t> pixels;
  /// Mask points that are visible and land on a pixel the mask owns.
  std::uint32_t visible_points = 0;
  std::optional<PixelBox> box;
};

struct Mask2PixelMap {
  int view_id = 0;
  int width = 0;
  int height = 0;
  std::vector<MaskFootprint> masks;

  /// Dense owner per pixel, MaskMembership::kBackground where unowned.
  std::vector<std::int32_t> owner_image() const;
};

/// Builds the per-view footprint of every mask. Each pixel belongs to the
/// mask of the foremost visible point splatted onto it; a mask point counts
/// as visible when it lands (unsplatted) on a pixel that mask owns.
Mask2PixelMap build_mask2pixel(const PointCloud& cloud, const MaskMembership& membership,
                               const RenderedView& view, const ProjectionOptions& options = {});
Mask2PixelMap build_mask2pixel(const PointCloud& cloud, const MaskSet& masks,
                               const RenderedView& view, const ProjectionOptions& options = {});
std::vector<Mask2PixelMap> build_mask2pixel_all(const PointCloud& cloud,
                                                const MaskMembership& membership,
                                                const std::vector<RenderedView>& views,
                                                const ProjectionOptions& options = {},
                                                int workers = 1);

/// Per-mask, per-view fraction of a mask's points that are foremost in
/// their pixel.
struct OcclusionReport {
  std::size_t num_masks = 0;
  std::vector<int> view_ids;
  /// Row-major num_masks × view_ids.size().
  std::vector<double> rates;
  std::vector<std::uint32_t> total_points;

  double rate(std::size_t mask, std::size_t view_index) const {
    return rates[mask * view_ids.size() + view_index];
  }
};

OcclusionReport occlusion_report(const std::vector<Mask2PixelMap>& maps,
                                 const MaskMembership& membership);
OcclusionReport occlusion_report(const PointCloud& cloud, const MaskSet& masks,
                                 const std::vector<RenderedView>& views,
                                 const ProjectionOptions& options = {}, int workers = 1);

/// The k view ids with the highest rate for `mask`, ties to the lower id.
std::vector<int> top_k_views(const OcclusionReport& report, std::size_t mask, std::size_t k);

/// 16-bit label image: mask index + 1, 0 where unowned.
Gray16Image label_image(const Mask2PixelMap& map);
void write_occlusion_csv(const OcclusionReport& report, const std::filesystem::path& path);

}  // namespace snaplabel
