#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "snaplabel/geometry.hpp"

namespace snaplabel {

using PointIndex = std::uint32_t;

/// Colored point cloud. Immutable once built; `points` and `colors` always
/// have the same length.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Rgb> colors;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Class-agnostic instance proposal. Indices are strictly increasing.
struct InstanceMask {
  std::vector<PointIndex> point_indices;
  std::optional<std::vector<double>> soft_values;
  std::optional<double> quality_score;

  std::size_t size() const { return point_indices.size(); }
  friend bool operator==(const InstanceMask&, const InstanceMask&) = default;
};

struct MaskSet {
  std::vector<InstanceMask> masks;
  std::string source;

  std::size_t size() const { return masks.size(); }
};

/// Ground-truth instance: a mask plus its category.
struct LabeledMask3D {
  InstanceMask mask;
  std::string label;
};

struct SceneBounds {
  Vec3 min_corner = Vec3::Zero();
  Vec3 max_corner = Vec3::Zero();
  UpAxis up_axis = UpAxis::kZ;

  Vec3 center() const { return 0.5 * (min_corner + max_corner); }
  double top() const { return max_corner[axis_index(up_axis)]; }
  double height() const {
    return max_corner[axis_index(up_axis)] - min_corner[axis_index(up_axis)];
  }
};

enum class CloudFormat { kPly, kXyzrgbText };
enum class PlyEncoding { kAscii, kBinaryLittleEndian };

std::optional<CloudFormat> parse_cloud_format(const std::string& s);

// Throws DomainError if the cloud breaks the PointCloud invariants.
void validate(const PointCloud& cloud);
// Throws DomainError if any mask breaks the InstanceMask invariants for a
// cloud of `num_points` points.
void validate(const MaskSet& masks, std::size_t num_points);

PointCloud load_point_cloud(const std::filesystem::path& path,
                            CloudFormat format);
void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                      CloudFormat format,
                      PlyEncoding encoding = PlyEncoding::kBinaryLittleEndian);

// In-memory parsers, used by the file loaders. `data` is the raw file body.
PointCloud parse_ply(const std::string& data);
PointCloud parse_xyzrgb(const std::string& data);

/// Mask sets are JSON-lines: {"indices":[...], "soft":[...]?, "score":x?}.
MaskSet load_masks(const std::filesystem::path& path);
void save_masks(const MaskSet& masks, const std::filesystem::path& path);
MaskSet parse_masks(const std::string& data);
std::string serialize_masks(const MaskSet& masks);

/// Ground truth uses the mask record plus a "label" string per line.
std::vector<LabeledMask3D> load_ground_truth(const std::filesystem::path& path);
void save_ground_truth(const std::vector<LabeledMask3D>& gt,
                       const std::filesystem::path& path);

SceneBounds compute_bounds(const PointCloud& cloud, UpAxis up_axis = UpAxis::kZ);

/// Old-to-new point index map. Removed points map to kDropped.
struct IndexRemap {
  static constexpr PointIndex kDropped = 0xFFFFFFFFu;
  std::vector<PointIndex> old_to_new;
};

struct CropResult {
  PointCloud cloud;
  MaskSet masks;
  IndexRemap remap;
  /// For each surviving mask, its index in the input set.
  std::vector<std::size_t> kept_masks;
};

/// Removes every point whose up-coordinate exceeds `bounds.top() - margin`.
CropResult crop_top(const PointCloud& cloud, const MaskSet& masks,
                    const SceneBounds& bounds, double margin);

struct Patch {
  PointCloud cloud;
  MaskSet masks;
  /// Patch-local point index -> index in the source cloud.
  std::vector<PointIndex> source_points;
  /// Patch-local mask index -> index in the source mask set.
  std::vector<std::size_t> source_masks;
};

/// Tiles the footprint into `patch_size`² squares anchored at the minimum
/// corner. Empty tiles are omitted. Each mask goes to the tile holding most
/// of its points (lowest tile on ties) and is clipped to it.
std::vector<Patch> split_patches(const PointCloud& cloud, const MaskSet& masks,
                                 double patch_size,
                                 UpAxis up_axis = UpAxis::kZ);

/// Reads a whole file into memory. Throws IoError.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& data);

}  // namespace snaplabel
