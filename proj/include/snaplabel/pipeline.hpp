#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "snaplabel/config.hpp"
#include "snaplabel/detection.hpp"
#include "snaplabel/lookup.hpp"
#include "snaplabel/projection.hpp"
#include "snaplabel/renderer.hpp"
#include "snaplabel/scene_io.hpp"

namespace snaplabel {

/// One view as seen by the lookup stages: camera and depth (rendered or
/// supplied), and where the detector reads the image from.
struct PipelineView {
  RenderedView view;
  ImageRef image;
};

/// What a provider factory gets to see. `source_points` maps every point of
/// `cloud` to its index in the input cloud.
struct ProviderContext {
  const PointCloud& cloud;
  const std::vector<PointIndex>& source_points;
  const std::vector<RenderedView>& views;
  const PipelineConfig& config;
};

using ProviderFactory = std::function<std::unique_ptr<DetectionProvider>(const ProviderContext&)>;

/// Factory for the configured provider kind. The oracle projects
/// `ground_truth` into the views it is handed.
ProviderFactory make_provider_factory(const PipelineConfig& config,
                                      std::vector<LabeledMask3D> ground_truth = {});

struct RunReport {
  std::size_t input = 0;
  std::size_t filtered_out = 0;
  std::size_t global_labeled = 0;
  std::size_t local_labeled = 0;
  std::size_t dropped = 0;
  std::size_t views = 0;
  std::size_t detections = 0;
  std::size_t crops_sent = 0;
  std::size_t crops_failed = 0;
  std::vector<std::string> warnings;

  bool balanced() const {
    return input == filtered_out + global_labeled + local_labeled + dropped;
  }
};

std::string report_to_json(const RunReport& report);

struct LookupRun {
  /// Mask ids refer to the input mask set.
  std::vector<LabeledMask> labeled;
  RunReport report;
};

/// Filter, crop, snap (or use `external_views`), project, detect, and run
/// both lookup stages. With a patch size, each patch runs independently.
LookupRun run_lookup(const PointCloud& cloud, const MaskSet& masks, const PipelineConfig& config,
                     const ProviderFactory& factory,
                     const std::vector<PipelineView>* external_views = nullptr);

/// Rendered snaps for a cloud under the config (after the top crop).
std::vector<RenderedView> snap_scene(const PointCloud& cloud, const PipelineConfig& config);

/// view_{id}.png, view_{id}.dpth and view_{id}.json per view.
void write_views(const std::vector<RenderedView>& views, const std::filesystem::path& dir);
std::string camera_to_json(const CameraModel& camera);
CameraModel camera_from_json(const std::string& text);

struct LoadedViews {
  std::vector<PipelineView> views;
  std::vector<std::string> warnings;
};

/// Reads externally supplied views. A view without a depth map is skipped
/// with a warning; an image whose size disagrees with its camera is a
/// ConfigError.
LoadedViews load_views(const std::filesystem::path& dir);

}  // namespace snaplabel
