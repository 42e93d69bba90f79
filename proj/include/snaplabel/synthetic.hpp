#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "snaplabel/scene_io.hpp"

namespace snaplabel {

struct SyntheticOptions {
  std::uint64_t seed = 0;
  int n_objects = 10;
  /// Standard deviation of Gaussian position jitter, in meters.
  double noise = 0.0;
  /// Surface samples per square meter on objects.
  double object_density = 300.0;
  /// Grid spacing of floor and wall samples, in meters.
  double floor_spacing = 0.1;
  double wall_height = 0.6;
};

struct SyntheticScene {
  PointCloud cloud;
  /// One instance per object, partitioning the object points.
  std::vector<LabeledMask3D> ground_truth;
  std::vector<std::string> vocabulary;
};

/// The category names objects are drawn from.
const std::vector<std::string>& synthetic_classes();

/// A z-up room: gridded floor, low walls, and cuboids and cylinders standing
/// on the floor in separate cells of a square grid. Deterministic per seed.
SyntheticScene generate_synthetic(const SyntheticOptions& options);

/// Writes scene.ply, masks.jsonl (ground-truth masks without labels),
/// gt.jsonl and a config.ini that runs the oracle pipeline on them.
void write_synthetic(const SyntheticScene& scene, const std::filesystem::path& dir,
                     std::uint64_t seed);

}  // namespace snaplabel
