#pragma once

#include <vector>

#include "snaplabel/camera.hpp"
#include "snaplabel/image.hpp"
#include "snaplabel/scene_io.hpp"

namespace snaplabel {

struct RenderedView {
  RgbImage rgb;
  DepthMap depth;
  CameraModel camera;
  int view_id = 0;
};

struct RenderOptions {
  int splat_radius_px = 1;
  Rgb background = {255, 255, 255};
};

/// Z-buffered point splatting. Each visible point covers the square of
/// pixels within `splat_radius_px` (Chebyshev) of the pixel it projects to
/// and wins a pixel only with a strictly smaller depth, so the first point
/// in cloud order wins ties.
RenderedView render(const PointCloud& cloud, const CameraModel& camera,
                    const RenderOptions& options = {}, int view_id = 0);

/// Renders every camera of the plan; view ids are plan indices.
std::vector<RenderedView> render_all(const PointCloud& cloud,
                                     const std::vector<CameraModel>& cameras,
                                     const RenderOptions& options = {}, int workers = 1);

}  // namespace snaplabel
