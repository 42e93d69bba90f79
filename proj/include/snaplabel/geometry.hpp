#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>

#include <Eigen/Core>

namespace snaplabel {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

using Rgb = std::array<std::uint8_t, 3>;

enum class UpAxis { kX = 0, kY = 1, kZ = 2 };

inline int axis_index(UpAxis axis) { return static_cast<int>(axis); }

/// The two footprint axes orthogonal to `up`, in ascending order.
inline std::pair<int, int> horizontal_axes(UpAxis up) {
  switch (up) {
    case UpAxis::kX:
      return {1, 2};
    case UpAxis::kY:
      return {0, 2};
    case UpAxis::kZ:
    default:
      return {0, 1};
  }
}

inline Vec3 up_vector(UpAxis up) {
  Vec3 v = Vec3::Zero();
  v[axis_index(up)] = 1.0;
  return v;
}

std::optional<UpAxis> parse_up_axis(std::string_view s);
std::string_view to_string(UpAxis axis);

/// Half-open integer pixel rectangle: columns [x0, x1), rows [y0, y1).
struct PixelBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  std::int64_t area() const {
    return empty() ? 0 : static_cast<std::int64_t>(width()) * height();
  }
  bool contains(int x, int y) const {
    return x >= x0 && x < x1 && y >= y0 && y < y1;
  }

  friend bool operator==(const PixelBox&, const PixelBox&) = default;
  friend auto operator<=>(const PixelBox&, const PixelBox&) = default;
};

PixelBox intersect(const PixelBox& a, const PixelBox& b);
double box_iou(const PixelBox& a, const PixelBox& b);

/// Scales `box` about its center by `scale`, rounding outward to whole
/// pixels, then clips to a `width`×`height` image.
PixelBox scale_box(const PixelBox& box, double scale, int width, int height);

}  // namespace snaplabel
