#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "snaplabel/geometry.hpp"
#include "snaplabel/image.hpp"
#include "snaplabel/projection.hpp"

namespace snaplabel {

/// Pixel set within a width×height image, as sorted row-major indices.
struct PixelMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> pixels;

  friend bool operator==(const PixelMask&, const PixelMask&) = default;
};

using Region = std::variant<PixelMask, PixelBox>;

struct Detection {
  std::string label;
  Region region;
  double confidence = 0.0;
  int view_id = 0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Uncompressed run-length encoding over row-major pixels. Runs alternate
/// between unset and set, starting with unset (possibly zero-length).
struct Rle {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;
};

Rle rle_encode(const PixelMask& mask);
PixelMask rle_decode(const Rle& rle);

/// Image handed to a detector: a file path, encoded PNG bytes, or an
/// in-memory image that is PNG-encoded on demand.
struct EncodedPng {
  std::string bytes;
  friend bool operator==(const EncodedPng&, const EncodedPng&) = default;
};
using ImageRef = std::variant<std::filesystem::path, EncodedPng, std::shared_ptr<const RgbImage>>;

struct DetectionRequest {
  ImageRef image;
  std::vector<std::string> vocabulary;
  std::optional<PixelBox> crop;
  // Local bookkeeping, not sent on the wire.
  int view_id = 0;
  int width = 0;
  int height = 0;
};

// ---- wire protocol ---------------------------------------------------------
//
// Request:  {"image_b64": "..." | "image_path": "...", "vocabulary": [...],
//            "crop": [x0, y0, x1, y1]?}
// Response: {"detections": [{"label": "...", "confidence": c,
//            "rle": {"size": [h, w], "counts": [...]}} | ..."box": [x0,y0,x1,y1]]}
// Boxes are half-open pixel rectangles in full-image coordinates.

/// `inline_paths` reads path images from disk and sends them as image_b64.
nlohmann::json request_to_json(const DetectionRequest& request, bool inline_paths = false);
DetectionRequest request_from_json(const nlohmann::json& j);
nlohmann::json detections_to_json(const std::vector<Detection>& detections);

/// Parses a response body. Every detection is checked against the
/// width×height image; failures raise ProtocolError quoting the payload.
std::vector<Detection> parse_response(const std::string& body, int view_id, int width, int height);

/// Throws ProtocolError unless the region is non-empty and inside the image.
void validate(const Detection& detection, int width, int height);

/// Restricts a detection to `crop`; nothing if the overlap is empty.
std::optional<Detection> clip_to_crop(const Detection& detection, const PixelBox& crop);

// ---- providers -------------------------------------------------------------

class DetectionProvider {
 public:
  virtual ~DetectionProvider() = default;
  /// Detections in full-image coordinates. May throw TransportError or
  /// ProtocolError. Must be safe to call concurrently.
  virtual std::vector<Detection> detect(const DetectionRequest& request) = 0;
  virtual int max_concurrency() const { return 1; }
};

struct OracleOptions {
  double drop_rate = 0.0;
  double perturb_rate = 0.0;
  std::uint64_t seed = 0;
};

/// Test detector that turns ground-truth Mask2Pixel footprints into
/// detections with confidence 1. Optional seeded degradation drops
/// detections or swaps their label for another vocabulary entry.
class OracleProvider : public DetectionProvider {
 public:
  OracleProvider(std::vector<Mask2PixelMap> gt_maps, std::vector<std::string> gt_labels,
                 OracleOptions options = {});

  std::vector<Detection> detect(const DetectionRequest& request) override;
  int max_concurrency() const override { return 8; }

 private:
  std::map<int, Mask2PixelMap> maps_;
  std::vector<std::string> labels_;
  OracleOptions options_;
};

/// Replays one pre-computed response file per view, `view_{id}.json`.
/// Crop requests get the view's detections clipped to the crop.
class FileProvider : public DetectionProvider {
 public:
  explicit FileProvider(std::filesystem::path directory);

  std::vector<Detection> detect(const DetectionRequest& request) override;
  int max_concurrency() const override { return 8; }

  static std::filesystem::path response_path(const std::filesystem::path& directory, int view_id);

 private:
  std::filesystem::path dir_;
};

struct HttpOptions {
  double timeout_s = 60.0;
  int max_concurrency = 4;
  bool inline_images = true;
};

/// POSTs requests as JSON to `endpoint` (http://host[:port]/path).
class HttpProvider : public DetectionProvider {
 public:
  explicit HttpProvider(const std::string& endpoint, HttpOptions options = {});

  std::vector<Detection> detect(const DetectionRequest& request) override;
  int max_concurrency() const override { return options_.max_concurrency; }

 private:
  std::string base_;
  std::string path_;
  HttpOptions options_;
};

struct QueryOptions {
  /// Extra attempts after a TransportError.
  int retries = 2;
};

struct QueryOutcome {
  std::vector<Detection> detections;
  std::optional<std::string> error;
  bool transport_failure = false;
  int attempts = 0;
};

/// Dispatches every request, honoring the provider's concurrency limit.
/// Failures are reported per request. Requests with an empty vocabulary
/// are rejected with DomainError before anything is sent.
std::vector<QueryOutcome> query_each(DetectionProvider& provider,
                                     const std::vector<DetectionRequest>& requests,
                                     const QueryOptions& options = {});

/// Like query_each but flattens results and rethrows the first failure.
std::vector<Detection> query_detector(DetectionProvider& provider,
                                      const std::vector<DetectionRequest>& requests,
                                      const QueryOptions& options = {});

/// Class Lookup Table: all detections grouped by view, each group ordered
/// by descending confidence (then label and region for a total order).
struct ClassLookupTable {
  std::vector<std::string> vocabulary;
  std::map<int, std::vector<Detection>> by_view;

  const std::vector<Detection>& view(int view_id) const;
  std::size_t size() const;
  friend bool operator==(const ClassLookupTable&, const ClassLookupTable&) = default;
};

/// Throws ProtocolError for detections whose view is not in `view_ids`.
ClassLookupTable build_clt(std::vector<Detection> detections, std::vector<std::string> vocabulary,
                           const std::vector<int>& view_ids);

}  // namespace snaplabel
