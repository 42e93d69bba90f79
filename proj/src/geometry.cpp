#include "snaplabel/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace snaplabel {

std::optional<UpAxis> parse_up_axis(std::string_view s) {
  if (s == "x" || s == "X") return UpAxis::kX;
  if (s == "y" || s == "Y") return UpAxis::kY;
  if (s == "z" || s == "Z") return UpAxis::kZ;
  return std::nullopt;
}

std::string_view to_string(UpAxis axis) {
  switch (axis) {
    case UpAxis::kX:
      return "x";
    case UpAxis::kY:
      return "y";
    case UpAxis::kZ:
    default:
      return "z";
  }
}

PixelBox intersect(const PixelBox& a, const PixelBox& b) {
  PixelBox r{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1),
             std::min(a.y1, b.y1)};
  if (r.empty()) return PixelBox{};
  return r;
}

double box_iou(const PixelBox& a, const PixelBox& b) {
  const std::int64_t inter = intersect(a, b).area();
  const std::int64_t uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

PixelBox scale_box(const PixelBox& box, double scale, int width, int height) {
  const double cx = 0.5 * (box.x0 + box.x1);
  const double cy = 0.5 * (box.y0 + box.y1);
  const double hw = 0.5 * box.width() * scale;
  const double hh = 0.5 * box.height() * scale;
  PixelBox out{static_cast<int>(std::floor(cx - hw)),
               static_cast<int>(std::floor(cy - hh)),
               static_cast<int>(std::ceil(cx + hw)),
               static_cast<int>(std::ceil(cy + hh))};
  return intersect(out, PixelBox{0, 0, width, height});
}

}  // namespace snaplabel
