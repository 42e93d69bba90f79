#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "snaplabel/camera.hpp"
#include "snaplabel/detection.hpp"
#include "snaplabel/lookup.hpp"
#include "snaplabel/mask_filter.hpp"
#include "snaplabel/projection.hpp"
#include "snaplabel/renderer.hpp"
#include "snaplabel/scene_io.hpp"

namespace snaplabel {

struct SceneConfig {
  std::filesystem::path cloud;
  std::filesystem::path masks;
  std::filesystem::path ground_truth;
  UpAxis up_axis = UpAxis::kZ;
  /// Height of the slab removed from the top of the scene (ceilings).
  double crop_margin = 0.0;
  /// Tile size for large outdoor scenes; unset processes the scene whole.
  std::optional<double> patch_size;
};

enum class ProviderKind { kOracle, kFile, kHttp };
std::optional<ProviderKind> parse_provider_kind(std::string_view s);
std::string_view to_string(ProviderKind kind);

struct DetectorConfig {
  ProviderKind provider = ProviderKind::kOracle;
  std::string endpoint;
  std::filesystem::path responses;
  std::vector<std::string> vocabulary;
  int retries = 2;
  double timeout_s = 60.0;
  int max_concurrency = 4;
  double drop_rate = 0.0;
  double perturb_rate = 0.0;
};

struct EvalConfig {
  std::filesystem::path predictions;
};

struct RunConfig {
  int workers = 4;
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";
  /// Directory of externally supplied views (view_{id}.png, .dpth, .json).
  /// When set, lookup uses these instead of rendering snaps.
  std::filesystem::path views;
};

struct PipelineConfig {
  SceneConfig scene;
  FilterConfig filter;
  double gamma = 0.1;
  SnapConfig snap;
  RenderOptions render;
  ProjectionOptions projection;
  LookupConfig lookup;
  DetectorConfig detector;
  EvalConfig eval;
  RunConfig run;
};

/// INI-style text: `[section]` headers and `key = value` lines, `#` or `;`
/// comments, lists comma-separated. Unknown sections or keys are errors.
/// Relative paths resolve against `base_dir`.
PipelineConfig parse_config(const std::string& text,
                            const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

/// Throws ConfigError for out-of-range values.
void validate(const PipelineConfig& config);

/// Round-trippable text for the given config.
std::string dump_config(const PipelineConfig& config);

}  // namespace snaplabel
