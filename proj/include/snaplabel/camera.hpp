#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "snaplabel/geometry.hpp"
#include "snaplabel/scene_io.hpp"

namespace snaplabel {

/// Points at or closer than this camera-frame depth are not imaged.
inline constexpr double kZNear = 1e-4;

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

enum class SnapScale { kGlobal, kCorner, kWideAngle, kExternal };

std::string_view to_string(SnapScale scale);
std::optional<SnapScale> parse_snap_scale(std::string_view s);

/// A projected point: continuous image coordinates, the pixel they fall in,
/// and camera-frame depth.
struct PixelHit {
  double u = 0.0;
  double v = 0.0;
  int x = 0;
  int y = 0;
  double depth = 0.0;
};

/// Pinhole camera. `pose` maps world to camera coordinates; the camera looks
/// down +z with x to the right and y down.
struct CameraModel {
  Mat4 pose = Mat4::Identity();
  Intrinsics intrinsics;
  int width = 0;
  int height = 0;
  SnapScale scale = SnapScale::kGlobal;

  Vec3 to_camera(const Vec3& p) const;
  Vec3 position() const;
  Vec3 forward() const;

  /// Projects `p`. Returns nothing for points within kZNear of the image
  /// plane, behind the camera, or outside the closed image rectangle
  /// [0,width]×[0,height]. Coordinates on the far edges fall in the last
  /// pixel row/column.
  std::optional<PixelHit> project(const Vec3& p) const;
};

/// Throws DomainError unless the rotation is orthonormal with det +1
/// (to 1e-9), focal lengths are positive and the image is non-empty.
void validate(const CameraModel& camera);

/// World-to-camera rigid transform for a camera at `position` looking at
/// `target`, with `up` mapping to image-up (−y).
Mat4 lookat(const Vec3& position, const Vec3& target, const Vec3& up);

/// Picks a single focal length and principal point so every point of
/// interest in front of the camera lands inside the margin box, with the
/// tighter axis spanning it exactly and the other axis centered.
Intrinsics calibrate_intrinsics(const Mat4& pose, std::span<const Vec3> points_of_interest,
                                int width, int height, double margin_px = 0.0);

struct SnapConfig {
  int global_count = 16;
  int corner_count = 4;
  int wide_angle_count = 4;
  int width = 1000;
  int height = 1000;
  /// Camera elevation above the scene top. Unset means 0.3 × scene height.
  std::optional<double> height_offset;
  double margin_px = 0.0;
};

struct SnapPlan {
  std::vector<CameraModel> cameras;
  int global_count = 0;
  int corner_count = 0;
  int wide_angle_count = 0;
};

/// Places global, corner and wide-angle cameras above the scene and
/// calibrates each one against `cloud`.
SnapPlan plan_snaps(const SceneBounds& bounds, const PointCloud& cloud,
                    const SnapConfig& config);

/// Camera poses only (intrinsics left at defaults), plus each camera's
/// target. Exposed for tests.
struct PlannedPose {
  Vec3 position;
  Vec3 target;
  SnapScale scale;
};
std::vector<PlannedPose> plan_poses(const SceneBounds& bounds, const SnapConfig& config);

}  // namespace snaplabel
