#include "snaplabel/detection.hpp"

#include <algorithm>
#include <set>

#include "snaplabel/error.hpp"
#include "snaplabel/parallel.hpp"
#include "snaplabel/scene_io.hpp"

namespace snaplabel {

namespace {

std::string excerpt(const std::string& payload) {
  constexpr std::size_t kMax = 200;
  if (payload.size() <= kMax) return payload;
  return payload.substr(0, kMax) + "...";
}

// splitmix64 finalizer.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double unit_hash(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  const std::uint64_t h = mix(mix(mix(mix(a) ^ b) ^ c) ^ d);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace

// ---- RLE ---------------------------------------------------------------------

Rle rle_encode(const PixelMask& mask) {
  Rle rle;
  rle.height = mask.height;
  rle.width = mask.width;
  const std::uint32_t total = static_cast<std::uint32_t>(mask.width) * mask.height;
  std::uint32_t cursor = 0;
  std::size_t i = 0;
  while (i < mask.pixels.size()) {
    const std::uint32_t start = mask.pixels[i];
    std::size_t j = i + 1;
    while (j < mask.pixels.size() && mask.pixels[j] == mask.pixels[j - 1] + 1) ++j;
    rle.counts.push_back(start - cursor);
    rle.counts.push_back(static_cast<std::uint32_t>(j - i));
    cursor = start + static_cast<std::uint32_t>(j - i);
    i = j;
  }
  if (cursor < total || rle.counts.empty()) rle.counts.push_back(total - cursor);
  return rle;
}

PixelMask rle_decode(const Rle& rle) {
  if (rle.width <= 0 || rle.height <= 0) throw ProtocolError("RLE size must be positive");
  PixelMask mask;
  mask.width = rle.width;
  mask.height = rle.height;
  const std::uint64_t total = static_cast<std::uint64_t>(rle.width) * rle.height;
  std::uint64_t cursor = 0;
  for (std::size_t r = 0; r < rle.counts.size(); ++r) {
    const std::uint64_t run = rle.counts[r];
    if (cursor + run > total) throw ProtocolError("RLE runs exceed image size");
    if (r % 2 == 1) {
      for (std::uint64_t p = cursor; p < cursor + run; ++p)
        mask.pixels.push_back(static_cast<std::uint32_t>(p));
    }
    cursor += run;
  }
  if (cursor != total) throw ProtocolError("RLE runs do not cover the image");
  return mask;
}

// ---- protocol ------------------------------------------------------------------

nlohmann::json request_to_json(const DetectionRequest& request, bool inline_paths) {
  nlohmann::json j;
  if (const auto* path = std::get_if<std::filesystem::path>(&request.image)) {
    if (inline_paths)
      j["image_b64"] = base64_encode(read_file(*path));
    else
      j["image_path"] = path->string();
  } else if (const auto* png = std::get_if<EncodedPng>(&request.image)) {
    j["image_b64"] = base64_encode(png->bytes);
  } else {
    const auto& img = std::get<std::shared_ptr<const RgbImage>>(request.image);
    if (!img) throw DomainError("detection request has no image");
    j["image_b64"] = base64_encode(encode_png(*img));
  }
  j["vocabulary"] = request.vocabulary;
  if (request.crop) {
    const auto& c = *request.crop;
    j["crop"] = {c.x0, c.y0, c.x1, c.y1};
  }
  return j;
}

namespace {

PixelBox box_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw ProtocolError("box must be [x0,y0,x1,y1]");
  for (const auto& v : j)
    if (!v.is_number_integer()) throw ProtocolError("box coordinates must be integers");
  return PixelBox{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

}  // namespace

DetectionRequest request_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ProtocolError("request must be a JSON object");
  DetectionRequest r;
  if (auto it = j.find("image_b64"); it != j.end()) {
    if (!it->is_string()) throw ProtocolError("image_b64 must be a string");
    r.image = EncodedPng{base64_decode(it->get<std::string>())};
  } else if (auto p = j.find("image_path"); p != j.end()) {
    if (!p->is_string()) throw ProtocolError("image_path must be a string");
    r.image = std::filesystem::path(p->get<std::string>());
  } else {
    throw ProtocolError("request needs image_b64 or image_path");
  }
  auto voc = j.find("vocabulary");
  if (voc == j.end() || !voc->is_array()) throw ProtocolError("request needs a vocabulary array");
  for (const auto& v : *voc) {
    if (!v.is_string()) throw ProtocolError("vocabulary entries must be strings");
    r.vocabulary.push_back(v.get<std::string>());
  }
  if (auto c = j.find("crop"); c != j.end() && !c->is_null()) r.crop = box_from_json(*c);
  return r;
}

nlohmann::json detections_to_json(const std::vector<Detection>& detections) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& d : detections) {
    nlohmann::json e;
    e["label"] = d.label;
    e["confidence"] = d.confidence;
    if (const auto* m = std::get_if<PixelMask>(&d.region)) {
      const Rle rle = rle_encode(*m);
      e["rle"] = {{"size", {rle.height, rle.width}}, {"counts", rle.counts}};
    } else {
      const auto& b = std::get<PixelBox>(d.region);
      e["box"] = {b.x0, b.y0, b.x1, b.y1};
    }
    arr.push_back(std::move(e));
  }
  return nlohmann::json{{"detections", std::move(arr)}};
}

void validate(const Detection& d, int width, int height) {
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0))
    throw ProtocolError("confidence outside [0,1] for '" + d.label + "'");
  if (const auto* m = std::get_if<PixelMask>(&d.region)) {
    if (m->width != width || m->height != height)
      throw ProtocolError("mask size " + std::to_string(m->width) + "x" +
                          std::to_string(m->height) + " does not match image " +
                          std::to_string(width) + "x" + std::to_string(height));
    if (m->pixels.empty()) throw ProtocolError("empty mask for '" + d.label + "'");
  } else {
    const auto& b = std::get<PixelBox>(d.region);
    if (b.empty()) throw ProtocolError("empty box for '" + d.label + "'");
    if (b.x0 < 0 || b.y0 < 0 || b.x1 > width || b.y1 > height)
      throw ProtocolError("box outside the image for '" + d.label + "'");
  }
}

std::vector<Detection> parse_response(const std::string& body, int view_id, int width, int height) {
  try {
    const auto j = nlohmann::json::parse(body);
    auto arr = j.find("detections");
    if (!j.is_object() || arr == j.end() || !arr->is_array())
      throw ProtocolError("response lacks a 'detections' array");
    std::vector<Detection> out;
    for (const auto& e : *arr) {
      Detection d;
      d.view_id = view_id;
      if (!e.is_object() || !e.contains("label") || !e["label"].is_string())
        throw ProtocolError("detection lacks a label");
      d.label = e["label"].get<std::string>();
      if (!e.contains("confidence") || !e["confidence"].is_number())
        throw ProtocolError("detection lacks a numeric confidence");
      d.confidence = e["confidence"].get<double>();
      if (auto r = e.find("rle"); r != e.end()) {
        const auto& size = r->at("size");
        if (!size.is_array() || size.size() != 2) throw ProtocolError("rle size must be [h,w]");
        Rle rle;
        rle.height = size[0].get<int>();
        rle.width = size[1].get<int>();
        for (const auto& c : r->at("counts")) {
          if (!c.is_number_unsigned()) throw ProtocolError("rle counts must be non-negative integers");
          rle.counts.push_back(c.get<std::uint32_t>());
        }
        d.region = rle_decode(rle);
      } else if (auto b = e.find("box"); b != e.end()) {
        d.region = box_from_json(*b);
      } else {
        throw ProtocolError("detection needs 'rle' or 'box'");
      }
      validate(d, width, height);
      out.push_back(std::move(d));
    }
    return out;
  } catch (const ProtocolError& e) {
    throw ProtocolError(std::string(e.what()) + "; payload: " + excerpt(body));
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed response: ") + e.what() + "; payload: " + excerpt(body));
  }
}

std::optional<Detection> clip_to_crop(const Detection& detection, const PixelBox& crop) {
  Detection out = detection;
  if (auto* m = std::get_if<PixelMask>(&out.region)) {
    std::erase_if(m->pixels, [&](std::uint32_t p) {
      return !crop.contains(static_cast<int>(p % m->width), static_cast<int>(p / m->width));
    });
    if (m->pixels.empty()) return std::nullopt;
  } else {
    auto& b = std::get<PixelBox>(out.region);
    b = intersect(b, crop);
    if (b.empty()) return std::nullopt;
  }
  return out;
}

// ---- providers -------------------------------------------------------------------

OracleProvider::OracleProvider(std::vector<Mask2PixelMap> gt_maps, std::vector<std::string> gt_labels,
                               OracleOptions options)
    : labels_(std::move(gt_labels)), options_(options) {
  for (auto& m : gt_maps) {
    if (m.masks.size() != labels_.size())
      throw DomainError("oracle maps and labels disagree on the number of masks");
    const int id = m.view_id;
    maps_.emplace(id, std::move(m));
  }
}

std::vector<Detection> OracleProvider::detect(const DetectionRequest& request) {
  std::vector<Detection> out;
  auto it = maps_.find(request.view_id);
  if (it == maps_.end()) return out;
  const Mask2PixelMap& map = it->second;
  const std::set<std::string> vocab(request.vocabulary.begin(), request.vocabulary.end());
  std::uint64_t crop_key = 0;
  if (request.crop) {
    const auto& c = *request.crop;
    crop_key = mix((static_cast<std::uint64_t>(c.x0) << 48) ^ (static_cast<std::uint64_t>(c.y0) << 32) ^
                   (static_cast<std::uint64_t>(c.x1) << 16) ^ static_cast<std::uint64_t>(c.y1)) | 1u;
  }
  for (std::size_t k = 0; k < map.masks.size(); ++k) {
    const auto& fp = map.masks[k];
    if (fp.pixels.empty()) continue;
    const auto view_key = static_cast<std::uint64_t>(request.view_id);
    if (options_.drop_rate > 0.0 && unit_hash(options_.seed, view_key, k, crop_key) < options_.drop_rate)
      continue;
    std::string label = labels_[k];
    if (options_.perturb_rate > 0.0 && request.vocabulary.size() > 1 &&
        unit_hash(options_.seed ^ 0x5bd1e995u, view_key, k, crop_key) < options_.perturb_rate) {
      const std::size_t shift =
          1 + static_cast<std::size_t>(unit_hash(options_.seed, k, view_key, 7) *
                                       static_cast<double>(request.vocabulary.size() - 1));
      auto pos = std::find(request.vocabulary.begin(), request.vocabulary.end(), label);
      const std::size_t base = pos == request.vocabulary.end() ? 0 : pos - request.vocabulary.begin();
      label = request.vocabulary[(base + shift) % request.vocabulary.size()];
    }
    if (!vocab.count(label)) continue;
    Detection d;
    d.label = std::move(label);
    d.region = PixelMask{map.width, map.height, fp.pixels};
    d.confidence = 1.0;
    d.view_id = request.view_id;
    if (request.crop) {
      auto clipped = clip_to_crop(d, *request.crop);
      if (!clipped) continue;
      d = std::move(*clipped);
    }
    out.push_back(std::move(d));
  }
  return out;
}

FileProvider::FileProvider(std::filesystem::path directory) : dir_(std::move(directory)) {
  if (!std::filesystem::is_directory(dir_))
    throw TransportError("response directory not found: " + dir_.string());
}

std::filesystem::path FileProvider::response_path(const std::filesystem::path& directory, int view_id) {
  return directory / ("view_" + std::to_string(view_id) + ".json");
}

std::vector<Detection> FileProvider::detect(const DetectionRequest& request) {
  const auto path = response_path(dir_, request.view_id);
  std::string body;
  try {
    body = read_file(path);
  } catch (const IoError& e) {
    throw TransportError(e.what());
  }
  auto dets = parse_response(body, request.view_id, request.width, request.height);
  if (!request.crop) return dets;
  std::vector<Detection> out;
  for (const auto& d : dets) {
    if (auto c = clip_to_crop(d, *request.crop)) out.push_back(std::move(*c));
  }
  return out;
}

// ---- dispatch ------------------------------------------------------------------

std::vector<QueryOutcome> query_each(DetectionProvider& provider,
                                     const std::vector<DetectionRequest>& requests,
                                     const QueryOptions& options) {
  for (const auto& r : requests) {
    if (r.vocabulary.empty()) throw DomainError("detection request has an empty vocabulary");
  }
  std::vector<QueryOutcome> out(requests.size());
  parallel_for(requests.size(), provider.max_concurrency(), [&](std::size_t i) {
    const auto& req = requests[i];
    QueryOutcome& o = out[i];
    for (;;) {
      ++o.attempts;
      try {
        o.detections = provider.detect(req);
        for (auto& d : o.detections) {
          d.view_id = req.view_id;
          validate(d, req.width, req.height);
        }
        o.error.reset();
        return;
      } catch (const TransportError& e) {
        o.error = std::string(e.what());
        o.transport_failure = true;
        if (o.attempts > options.retries) return;
      } catch (const ProtocolError& e) {
        o.error = std::string(e.what());
        o.transport_failure = false;
        return;
      }
    }
  });
  for (auto& o : out) {
    if (o.error) o.detections.clear();
  }
  return out;
}

std::vector<Detection> query_detector(DetectionProvider& provider,
                                      const std::vector<DetectionRequest>& requests,
                                      const QueryOptions& options) {
  auto outcomes = query_each(provider, requests, options);
  std::vector<Detection> all;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    auto& o = outcomes[i];
    if (o.error) {
      const std::string msg = "detector failed for view " + std::to_string(requests[i].view_id) +
                              " after " + std::to_string(o.attempts) + " attempt(s): " + *o.error;
      if (o.transport_failure) throw TransportError(msg, o.attempts);
      throw ProtocolError(msg);
    }
    std::move(o.detections.begin(), o.detections.end(), std::back_inserter(all));
  }
  return all;
}

// ---- CLT -----------------------------------------------------------------------

namespace {

bool region_less(const Region& a, const Region& b) {
  if (a.index() != b.index()) return a.index() < b.index();
  if (const auto* ma = std::get_if<PixelMask>(&a)) {
    const auto& mb = std::get<PixelMask>(b);
    return ma->pixels < mb.pixels;
  }
  return std::get<PixelBox>(a) < std::get<PixelBox>(b);
}

bool detection_less(const Detection& a, const Detection& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.label != b.label) return a.label < b.label;
  return region_less(a.region, b.region);
}

const std::vector<Detection> kNoDetections;

}  // namespace

const std::vector<Detection>& ClassLookupTable::view(int view_id) const {
  auto it = by_view.find(view_id);
  return it == by_view.end() ? kNoDetections : it->second;
}

std::size_t ClassLookupTable::size() const {
  std::size_t n = 0;
  for (const auto& [v, d] : by_view) n += d.size();
  return n;
}

ClassLookupTable build_clt(std::vector<Detection> detections, std::vector<std::string> vocabulary,
                           const std::vector<int>& view_ids) {
  const std::set<int> known(view_ids.begin(), view_ids.end());
  ClassLookupTable clt;
  clt.vocabulary = std::move(vocabulary);
  for (auto& d : detections) {
    if (!known.count(d.view_id))
      throw ProtocolError("detection references unknown view " + std::to_string(d.view_id));
    clt.by_view[d.view_id].push_back(std::move(d));
  }
  for (auto& [v, dets] : clt.by_view) std::stable_sort(dets.begin(), dets.end(), detection_less);
  return clt;
}

}  // namespace snaplabel
