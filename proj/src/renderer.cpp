#include "snaplabel/renderer.hpp"

#include <algorithm>

#include "snaplabel/error.hpp"
#include "snaplabel/parallel.hpp"

namespace snaplabel {

RenderedView render(const PointCloud& cloud, const CameraModel& camera,
                    const RenderOptions& options, int view_id) {
  if (options.splat_radius_px < 0) throw DomainError("splat radius must be >= 0");
  validate(camera);
  RenderedView view;
  view.camera = camera;
  view.view_id = view_id;
  view.rgb = RgbImage(camera.width, camera.height, options.background);
  view.depth = DepthMap(camera.width, camera.height);

  const int r = options.splat_radius_px;
  const int W = camera.width;
  const int H = camera.height;
  float* depth = view.depth.data.data();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto hit = camera.project(cloud.points[i]);
    if (!hit) continue;
    const float z = static_cast<float>(hit->depth);
    const int y0 = std::max(0, hit->y - r);
    const int y1 = std::min(H - 1, hit->y + r);
    const int x0 = std::max(0, hit->x - r);
    const int x1 = std::min(W - 1, hit->x + r);
    for (int y = y0; y <= y1; ++y) {
      std::size_t p = static_cast<std::size_t>(y) * W + x0;
      for (int x = x0; x <= x1; ++x, ++p) {
        if (z < depth[p]) {
          depth[p] = z;
          view.rgb.set(p, cloud.colors[i]);
        }
      }
    }
  }
  return view;
}

std::vector<RenderedView> render_all(const PointCloud& cloud,
                                     const std::vector<CameraModel>& cameras,
                                     const RenderOptions& options, int workers) {
  std::vector<RenderedView> views(cameras.size());
  parallel_for(cameras.size(), workers, [&](std::size_t i) {
    views[i] = render(cloud, cameras[i], options, static_cast<int>(i));
  });
  return views;
}

}  // namespace snaplabel
