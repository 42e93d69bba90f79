#include "snaplabel/camera.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Geometry>

#include "snaplabel/error.hpp"

namespace snaplabel {

std::string_view to_string(SnapScale scale) {
  switch (scale) {
    case SnapScale::kGlobal:
      return "global";
    case SnapScale::kCorner:
      return "corner";
    case SnapScale::kWideAngle:
      return "wide_angle";
    case SnapScale::kExternal:
    default:
      return "external";
  }
}

std::optional<SnapScale> parse_snap_scale(std::string_view s) {
  if (s == "global") return SnapScale::kGlobal;
  if (s == "corner") return SnapScale::kCorner;
  if (s == "wide_angle") return SnapScale::kWideAngle;
  if (s == "external") return SnapScale::kExternal;
  return std::nullopt;
}

// Written out term by term so every consumer sees the same rounding.
Vec3 CameraModel::to_camera(const Vec3& p) const {
  const Mat4& T = pose;
  return Vec3(T(0, 0) * p.x() + T(0, 1) * p.y() + T(0, 2) * p.z() + T(0, 3),
              T(1, 0) * p.x() + T(1, 1) * p.y() + T(1, 2) * p.z() + T(1, 3),
              T(2, 0) * p.x() + T(2, 1) * p.y() + T(2, 2) * p.z() + T(2, 3));
}

Vec3 CameraModel::position() const {
  const Mat3 R = pose.topLeftCorner<3, 3>();
  return -R.transpose() * pose.topRightCorner<3, 1>();
}

Vec3 CameraModel::forward() const { return pose.block<1, 3>(2, 0).transpose(); }

std::optional<PixelHit> CameraModel::project(const Vec3& p) const {
  const Vec3 c = to_camera(p);
  if (!(c.z() > kZNear)) return std::nullopt;
  PixelHit hit;
  hit.depth = c.z();
  hit.u = intrinsics.fx * (c.x() / c.z()) + intrinsics.cx;
  hit.v = intrinsics.fy * (c.y() / c.z()) + intrinsics.cy;
  if (!(hit.u >= 0.0 && hit.u <= width && hit.v >= 0.0 && hit.v <= height))
    return std::nullopt;
  hit.x = std::min(static_cast<int>(hit.u), width - 1);
  hit.y = std::min(static_cast<int>(hit.v), height - 1);
  return hit;
}

void validate(const CameraModel& camera) {
  const Mat3 R = camera.pose.topLeftCorner<3, 3>();
  if (!camera.pose.allFinite()) throw DomainError("camera pose is not finite");
  if ((R * R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
    throw DomainError("camera rotation is not orthonormal");
  if (std::abs(R.determinant() - 1.0) > 1e-9)
    throw DomainError("camera rotation has determinant != +1");
  if (camera.pose.row(3) != Eigen::RowVector4d(0, 0, 0, 1))
    throw DomainError("camera pose bottom row must be [0 0 0 1]");
  if (!(camera.intrinsics.fx > 0.0 && camera.intrinsics.fy > 0.0))
    throw DomainError("focal lengths must be positive");
  if (camera.width <= 0 || camera.height <= 0)
    throw DomainError("image size must be positive");
}

Mat4 lookat(const Vec3& position, const Vec3& target, const Vec3& up) {
  const Vec3 delta = target - position;
  const double dist = delta.norm();
  if (!(dist > 0.0) || !std::isfinite(dist))
    throw DomainError("lookat: camera position coincides with target");
  const Vec3 forward = delta / dist;
  const Vec3 right_raw = forward.cross(up);
  const double rn = right_raw.norm();
  if (!(rn > 1e-12 * std::max(1.0, up.norm())))
    throw DomainError("lookat: up vector is parallel to the viewing direction");
  const Vec3 right = right_raw / rn;
  const Vec3 down = forward.cross(right);

  Mat4 pose = Mat4::Identity();
  pose.block<1, 3>(0, 0) = right.transpose();
  pose.block<1, 3>(1, 0) = down.transpose();
  pose.block<1, 3>(2, 0) = forward.transpose();
  pose.topRightCorner<3, 1>() = -(pose.topLeftCorner<3, 3>() * position);
  return pose;
}

Intrinsics calibrate_intrinsics(const Mat4& pose, std::span<const Vec3> points_of_interest,
                                int width, int height, double margin_px) {
  const double usable_x = width - 2.0 * margin_px;
  const double usable_y = height - 2.0 * margin_px;
  if (!(usable_x > 0.0 && usable_y > 0.0) || margin_px < 0.0)
    throw DomainError("calibration margin leaves no usable image area");

  CameraModel cam;
  cam.pose = pose;
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin;
  double ymin = xmin;
  double ymax = -xmin;
  std::size_t in_front = 0;
  for (const auto& p : points_of_interest) {
    const Vec3 c = cam.to_camera(p);
    if (!(c.z() > kZNear)) continue;
    const double x = c.x() / c.z();
    const double y = c.y() / c.z();
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
    ++in_front;
  }
  if (in_front == 0) throw DomainError("no point of interest lies in front of the camera");
  const double ext_x = xmax - xmin;
  const double ext_y = ymax - ymin;
  if (!(ext_x > 0.0) && !(ext_y > 0.0))
    throw DomainError("points of interest have zero projected extent");

  double scale = std::numeric_limits<double>::infinity();
  if (ext_x > 0.0) scale = std::min(scale, usable_x / ext_x);
  if (ext_y > 0.0) scale = std::min(scale, usable_y / ext_y);
  // Pull in by a few ulps so edge points cannot round past the margin.
  scale *= 1.0 - 1e-12;

  Intrinsics k;
  k.fx = scale;
  k.fy = scale;
  k.cx = 0.5 * width - scale * 0.5 * (xmin + xmax);
  k.cy = 0.5 * height - scale * 0.5 * (ymin + ymax);
  return k;
}

std::vector<PlannedPose> plan_poses(const SceneBounds& bounds, const SnapConfig& config) {
  if (config.global_count < 0 || config.corner_count < 0 || config.wide_angle_count < 0)
    throw DomainError("snap counts must be non-negative");
  if (config.corner_count > 4) throw DomainError("at most 4 corner snaps are defined");
  if (config.wide_angle_count > 4) throw DomainError("at most 4 wide-angle snaps are defined");

  const int up = axis_index(bounds.up_axis);
  const auto [a0, a1] = horizontal_axes(bounds.up_axis);
  const Vec3 lo = bounds.min_corner;
  const Vec3 hi = bounds.max_corner;
  const Vec3 center = bounds.center();
  const double offset = config.height_offset.value_or(0.3 * bounds.height());
  const double cam_height = bounds.top() + offset;

  auto footprint_point = [&](double f0, double f1, double h) {
    Vec3 p;
    p[a0] = lo[a0] + f0 * (hi[a0] - lo[a0]);
    p[a1] = lo[a1] + f1 * (hi[a1] - lo[a1]);
    p[up] = h;
    return p;
  };

  std::vector<PlannedPose> out;
  const double radius = 0.5 * std::hypot(hi[a0] - lo[a0], hi[a1] - lo[a1]);
  for (int i = 0; i < config.global_count; ++i) {
    const double theta = 2.0 * std::numbers::pi * i / config.global_count;
    Vec3 pos = center;
    pos[a0] += radius * std::cos(theta);
    pos[a1] += radius * std::sin(theta);
    pos[up] = cam_height;
    out.push_back({pos, center, SnapScale::kGlobal});
  }

  // Footprint corners at floor level, counter-clockwise from the minimum.
  static constexpr std::array<std::array<double, 2>, 4> kCorners = {
      {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}}};
  const double floor = lo[up];
  const Vec3 above_center = footprint_point(0.5, 0.5, cam_height);
  for (int i = 0; i < config.corner_count; ++i) {
    out.push_back({above_center, footprint_point(kCorners[i][0], kCorners[i][1], floor),
                   SnapScale::kCorner});
  }

  // Interior intersections of a 3×3 partition; each looks at the farthest corner.
  static constexpr std::array<std::array<double, 2>, 4> kGrid = {
      {{1.0 / 3, 1.0 / 3}, {2.0 / 3, 1.0 / 3}, {2.0 / 3, 2.0 / 3}, {1.0 / 3, 2.0 / 3}}};
  for (int i = 0; i < config.wide_angle_count; ++i) {
    const double f0 = kGrid[i][0];
    const double f1 = kGrid[i][1];
    out.push_back({footprint_point(f0, f1, cam_height),
                   footprint_point(f0 < 0.5 ? 1.0 : 0.0, f1 < 0.5 ? 1.0 : 0.0, floor),
                   SnapScale::kWideAngle});
  }
  return out;
}

SnapPlan plan_snaps(const SceneBounds& bounds, const PointCloud& cloud,
                    const SnapConfig& config) {
  const auto poses = plan_poses(bounds, config);
  const Vec3 up = up_vector(bounds.up_axis);
  const auto [a0, a1] = horizontal_axes(bounds.up_axis);

  SnapPlan plan;
  plan.global_count = config.global_count;
  plan.corner_count = config.corner_count;
  plan.wide_angle_count = config.wide_angle_count;
  for (const auto& pp : poses) {
    CameraModel cam;
    cam.pose = lookat(pp.position, pp.target, up);
    cam.width = config.width;
    cam.height = config.height;
    cam.scale = pp.scale;

    std::span<const Vec3> interest(cloud.points);
    std::vector<Vec3> facing;
    if (pp.scale == SnapScale::kWideAngle) {
      // Only the half of the footprint the camera faces.
      const double d0 = pp.target[a0] - pp.position[a0];
      const double d1 = pp.target[a1] - pp.position[a1];
      for (const auto& p : cloud.points) {
        if ((p[a0] - pp.position[a0]) * d0 + (p[a1] - pp.position[a1]) * d1 > 0.0)
          facing.push_back(p);
      }
      if (facing.size() >= 2) interest = facing;
    }
    cam.intrinsics =
        calibrate_intrinsics(cam.pose, interest, config.width, config.height, config.margin_px);
    plan.cameras.push_back(cam);
  }
  return plan;
}

}  // namespace snaplabel
