#include "snaplabel/scene_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "snaplabel/error.hpp"

namespace snaplabel {

namespace {

using Unit = FormatError::Unit;

std::uint8_t clamp_channel(double v) {
  if (std::isnan(v)) return 0;
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

bool parse_double(std::string_view token, double& out) {
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])))
      ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])))
      ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

// ---- PLY ------------------------------------------------------------------

enum class PlyType { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

std::optional<PlyType> parse_ply_type(std::string_view s) {
  static const std::map<std::string_view, PlyType> kTypes = {
      {"char", PlyType::kInt8},     {"int8", PlyType::kInt8},
      {"uchar", PlyType::kUint8},   {"uint8", PlyType::kUint8},
      {"short", PlyType::kInt16},   {"int16", PlyType::kInt16},
      {"ushort", PlyType::kUint16}, {"uint16", PlyType::kUint16},
      {"int", PlyType::kInt32},     {"int32", PlyType::kInt32},
      {"uint", PlyType::kUint32},   {"uint32", PlyType::kUint32},
      {"float", PlyType::kFloat32}, {"float32", PlyType::kFloat32},
      {"double", PlyType::kFloat64}, {"float64", PlyType::kFloat64}};
  auto it = kTypes.find(s);
  if (it == kTypes.end()) return std::nullopt;
  return it->second;
}

std::size_t ply_type_size(PlyType t) {
  switch (t) {
    case PlyType::kInt8:
    case PlyType::kUint8:
      return 1;
    case PlyType::kInt16:
    case PlyType::kUint16:
      return 2;
    case PlyType::kInt32:
    case PlyType::kUint32:
    case PlyType::kFloat32:
      return 4;
    case PlyType::kFloat64:
    default:
      return 8;
  }
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::kFloat32;
  bool is_list = false;
  PlyType count_type = PlyType::kUint8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

enum class PlyFormat { kAscii, kBinaryLE, kBinaryBE };

template <typename T>
T load_scalar(const char* p, bool swap) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if (swap) {
    auto* bytes = reinterpret_cast<unsigned char*>(&v);
    std::reverse(bytes, bytes + sizeof(T));
  }
  return v;
}

double read_binary(PlyType t, const char* p, bool swap) {
  switch (t) {
    case PlyType::kInt8:
      return load_scalar<std::int8_t>(p, false);
    case PlyType::kUint8:
      return load_scalar<std::uint8_t>(p, false);
    case PlyType::kInt16:
      return load_scalar<std::int16_t>(p, swap);
    case PlyType::kUint16:
      return load_scalar<std::uint16_t>(p, swap);
    case PlyType::kInt32:
      return load_scalar<std::int32_t>(p, swap);
    case PlyType::kUint32:
      return load_scalar<std::uint32_t>(p, swap);
    case PlyType::kFloat32:
      return load_scalar<float>(p, swap);
    case PlyType::kFloat64:
    default:
      return load_scalar<double>(p, swap);
  }
}

struct VertexSlots {
  int x = -1, y = -1, z = -1, r = -1, g = -1, b = -1;
};

VertexSlots locate_vertex_slots(const PlyElement& el) {
  VertexSlots s;
  for (int i = 0; i < static_cast<int>(el.properties.size()); ++i) {
    const auto& n = el.properties[i].name;
    if (el.properties[i].is_list) continue;
    if (n == "x") s.x = i;
    else if (n == "y") s.y = i;
    else if (n == "z") s.z = i;
    else if (n == "red" || n == "r" || n == "diffuse_red") s.r = i;
    else if (n == "green" || n == "g" || n == "diffuse_green") s.g = i;
    else if (n == "blue" || n == "b" || n == "diffuse_blue") s.b = i;
  }
  return s;
}

void store_vertex(PointCloud& cloud, const VertexSlots& s,
                  const std::vector<double>& values) {
  cloud.points.emplace_back(values[s.x], values[s.y], values[s.z]);
  cloud.colors.push_back(Rgb{s.r >= 0 ? clamp_channel(values[s.r]) : std::uint8_t{0},
                             s.g >= 0 ? clamp_channel(values[s.g]) : std::uint8_t{0},
                             s.b >= 0 ? clamp_channel(values[s.b]) : std::uint8_t{0}});
}

}  // namespace

std::optional<CloudFormat> parse_cloud_format(const std::string& s) {
  if (s == "ply") return CloudFormat::kPly;
  if (s == "xyzrgb" || s == "xyzrgb-text" || s == "txt") return CloudFormat::kXyzrgbText;
  return std::nullopt;
}

void validate(const PointCloud& cloud) {
  if (cloud.points.empty()) throw DomainError("point cloud is empty");
  if (cloud.points.size() != cloud.colors.size())
    throw DomainError("point cloud has " + std::to_string(cloud.points.size()) +
                      " positions but " + std::to_string(cloud.colors.size()) +
                      " colors");
  if (cloud.points.size() > std::numeric_limits<PointIndex>::max() - 1)
    throw DomainError("point cloud too large for 32-bit indices");
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (!cloud.points[i].allFinite())
      throw DomainError("non-finite coordinate at point " + std::to_string(i));
  }
}

void validate(const MaskSet& masks, std::size_t num_points) {
  for (std::size_t m = 0; m < masks.masks.size(); ++m) {
    const auto& mask = masks.masks[m];
    const auto& idx = mask.point_indices;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= num_points)
        throw DomainError("mask " + std::to_string(m) + " references point " +
                          std::to_string(idx[i]) + " of " +
                          std::to_string(num_points));
      if (i > 0 && idx[i] <= idx[i - 1])
        throw DomainError("mask " + std::to_string(m) +
                          " indices not strictly increasing");
    }
    if (mask.soft_values && mask.soft_values->size() != idx.size())
      throw DomainError("mask " + std::to_string(m) +
                        " soft values length mismatch");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("short write to " + path.string());
}

PointCloud parse_ply(const std::string& data) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string_view& line) -> bool {
    if (pos >= data.size()) return false;
    std::size_t end = data.find('\n', pos);
    if (end == std::string::npos) end = data.size();
    line = std::string_view(data).substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = std::min(end + 1, data.size() + 1);
    ++line_no;
    return true;
  };

  std::string_view line;
  if (!next_line(line) || line != "ply")
    throw FormatError("missing 'ply' magic", Unit::kLine, 1);

  PlyFormat format = PlyFormat::kAscii;
  bool have_format = false;
  std::vector<PlyElement> elements;
  bool header_done = false;
  while (next_line(line)) {
    auto tok = split_ws(line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") {
      header_done = true;
      break;
    }
    if (tok[0] == "format") {
      if (tok.size() < 2) throw FormatError("bad format line", Unit::kLine, line_no);
      if (tok[1] == "ascii") format = PlyFormat::kAscii;
      else if (tok[1] == "binary_little_endian") format = PlyFormat::kBinaryLE;
      else if (tok[1] == "binary_big_endian") format = PlyFormat::kBinaryBE;
      else throw FormatError("unknown PLY format", Unit::kLine, line_no);
      have_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw FormatError("bad element line", Unit::kLine, line_no);
      PlyElement el;
      el.name = std::string(tok[1]);
      double count = 0;
      if (!parse_double(tok[2], count) || count < 0)
        throw FormatError("bad element count", Unit::kLine, line_no);
      el.count = static_cast<std::size_t>(count);
      elements.push_back(std::move(el));
    } else if (tok[0] == "property") {
      if (elements.empty())
        throw FormatError("property before element", Unit::kLine, line_no);
      PlyProperty prop;
      if (tok.size() == 5 && tok[1] == "list") {
        auto ct = parse_ply_type(tok[2]);
        auto it = parse_ply_type(tok[3]);
        if (!ct || !it) throw FormatError("unknown list type", Unit::kLine, line_no);
        prop.is_list = true;
        prop.count_type = *ct;
        prop.type = *it;
        prop.name = std::string(tok[4]);
      } else if (tok.size() == 3) {
        auto t = parse_ply_type(tok[1]);
        if (!t) throw FormatError("unknown property type", Unit::kLine, line_no);
        prop.type = *t;
        prop.name = std::string(tok[2]);
      } else {
        throw FormatError("bad property line", Unit::kLine, line_no);
      }
      elements.back().properties.push_back(std::move(prop));
    } else {
      throw FormatError("unexpected header keyword '" + std::string(tok[0]) + "'",
                        Unit::kLine, line_no);
    }
  }
  if (!header_done) throw FormatError("missing end_header", Unit::kLine, line_no);
  if (!have_format) throw FormatError("missing format line", Unit::kLine, line_no);

  auto vertex_it = std::find_if(elements.begin(), elements.end(),
                                [](const PlyElement& e) { return e.name == "vertex"; });
  if (vertex_it == elements.end())
    throw FormatError("no vertex element", Unit::kLine, line_no);
  const VertexSlots slots = locate_vertex_slots(*vertex_it);
  if (slots.x < 0 || slots.y < 0 || slots.z < 0)
    throw FormatError("vertex element lacks x/y/z", Unit::kLine, line_no);
  if (vertex_it->count == 0) throw DomainError("PLY has no vertices");

  PointCloud cloud;
  cloud.points.reserve(vertex_it->count);
  cloud.colors.reserve(vertex_it->count);
  std::vector<double> values(vertex_it->properties.size());

  if (format == PlyFormat::kAscii) {
    for (const auto& el : elements) {
      const bool is_vertex = &el == &*vertex_it;
      for (std::size_t n = 0; n < el.count; ++n) {
        if (!next_line(line))
          throw FormatError("unexpected end of data", Unit::kLine, line_no + 1);
        auto tok = split_ws(line);
        std::size_t t = 0;
        for (std::size_t p = 0; p < el.properties.size(); ++p) {
          const auto& prop = el.properties[p];
          std::size_t items = 1;
          if (prop.is_list) {
            double cnt = 0;
            if (t >= tok.size() || !parse_double(tok[t++], cnt) || cnt < 0)
              throw FormatError("bad list count", Unit::kLine, line_no);
            items = static_cast<std::size_t>(cnt);
          }
          for (std::size_t k = 0; k < items; ++k) {
            double v = 0;
            if (t >= tok.size() || !parse_double(tok[t++], v))
              throw FormatError("bad value for property '" + prop.name + "'",
                                Unit::kLine, line_no);
            if (!prop.is_list) values[p] = v;
          }
        }
        if (t != tok.size())
          throw FormatError("trailing tokens", Unit::kLine, line_no);
        if (is_vertex) store_vertex(cloud, slots, values);
      }
      if (is_vertex) break;
    }
  } else {
    const bool swap = (format == PlyFormat::kBinaryLE) !=
                      (std::endian::native == std::endian::little);
    std::size_t off = pos;
    auto need = [&](std::size_t n) {
      if (off + n > data.size())
        throw FormatError("unexpected end of binary data", Unit::kByte, off);
    };
    for (const auto& el : elements) {
      const bool is_vertex = &el == &*vertex_it;
      for (std::size_t n = 0; n < el.count; ++n) {
        for (std::size_t p = 0; p < el.properties.size(); ++p) {
          const auto& prop = el.properties[p];
          if (prop.is_list) {
            const std::size_t cs = ply_type_size(prop.count_type);
            need(cs);
            const double cnt = read_binary(prop.count_type, data.data() + off, swap);
            if (cnt < 0) throw FormatError("negative list count", Unit::kByte, off);
            off += cs;
            const std::size_t bytes =
                static_cast<std::size_t>(cnt) * ply_type_size(prop.type);
            need(bytes);
            off += bytes;
          } else {
            const std::size_t sz = ply_type_size(prop.type);
            need(sz);
            values[p] = read_binary(prop.type, data.data() + off, swap);
            off += sz;
          }
        }
        if (is_vertex) store_vertex(cloud, slots, values);
      }
      if (is_vertex) break;
    }
  }
  validate(cloud);
  return cloud;
}

PointCloud parse_xyzrgb(const std::string& data) {
  PointCloud cloud;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < data.size()) {
    std::size_t end = data.find('\n', pos);
    if (end == std::string::npos) end = data.size();
    std::string_view line = std::string_view(data).substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    auto tok = split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    if (tok.size() != 6)
      throw FormatError("expected 6 values, got " + std::to_string(tok.size()),
                        Unit::kLine, line_no);
    double v[6];
    for (int i = 0; i < 6; ++i) {
      if (!parse_double(tok[i], v[i]))
        throw FormatError("bad number '" + std::string(tok[i]) + "'", Unit::kLine,
                          line_no);
    }
    cloud.points.emplace_back(v[0], v[1], v[2]);
    cloud.colors.push_back(Rgb{clamp_channel(v[3]), clamp_channel(v[4]), clamp_channel(v[5])});
  }
  validate(cloud);
  return cloud;
}

PointCloud load_point_cloud(const std::filesystem::path& path, CloudFormat format) {
  const std::string data = read_file(path);
  try {
    return format == CloudFormat::kPly ? parse_ply(data) : parse_xyzrgb(data);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.unit(), e.offset());
  }
}

void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                      CloudFormat format, PlyEncoding encoding) {
  validate(cloud);
  std::string out;
  char buf[128];
  if (format == CloudFormat::kXyzrgbText) {
    out.reserve(cloud.size() * 64);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto& p = cloud.points[i];
      const auto& c = cloud.colors[i];
      int n = std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %u %u %u\n", p.x(),
                            p.y(), p.z(), c[0], c[1], c[2]);
      out.append(buf, static_cast<std::size_t>(n));
    }
    write_file(path, out);
    return;
  }
  const bool binary = encoding == PlyEncoding::kBinaryLittleEndian;
  out += "ply\n";
  out += binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n";
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  out +=
      "property double x\nproperty double y\nproperty double z\n"
      "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      "end_header\n";
  if (binary) {
    static_assert(std::endian::native == std::endian::little,
                  "binary PLY writer assumes a little-endian host");
    const std::size_t header = out.size();
    out.resize(header + cloud.size() * (3 * sizeof(double) + 3));
    char* dst = out.data() + header;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const double xyz[3] = {cloud.points[i].x(), cloud.points[i].y(), cloud.points[i].z()};
      std::memcpy(dst, xyz, sizeof(xyz));
      dst += sizeof(xyz);
      std::memcpy(dst, cloud.colors[i].data(), 3);
      dst += 3;
    }
  } else {
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto& p = cloud.points[i];
      const auto& c = cloud.colors[i];
      int n = std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %u %u %u\n", p.x(),
                            p.y(), p.z(), c[0], c[1], c[2]);
      out.append(buf, static_cast<std::size_t>(n));
    }
  }
  write_file(path, out);
}

// ---- masks ----------------------------------------------------------------

namespace {

InstanceMask mask_from_json(const nlohmann::json& j, std::size_t line_no) {
  if (!j.is_object()) throw FormatError("mask record is not an object", Unit::kLine, line_no);
  auto it = j.find("indices");
  if (it == j.end() || !it->is_array())
    throw FormatError("mask record lacks 'indices' array", Unit::kLine, line_no);
  InstanceMask mask;
  mask.point_indices.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_number_unsigned() || v.get<std::uint64_t>() >= IndexRemap::kDropped)
      throw FormatError("index is not a valid point index", Unit::kLine, line_no);
    const auto idx = v.get<PointIndex>();
    if (!mask.point_indices.empty() && idx <= mask.point_indices.back())
      throw FormatError("indices not strictly increasing", Unit::kLine, line_no);
    mask.point_indices.push_back(idx);
  }
  if (auto s = j.find("soft"); s != j.end() && !s->is_null()) {
    if (!s->is_array() || s->size() != mask.point_indices.size())
      throw FormatError("'soft' must be an array matching 'indices'", Unit::kLine, line_no);
    std::vector<double> soft;
    soft.reserve(s->size());
    for (const auto& v : *s) {
      if (!v.is_number()) throw FormatError("soft value not numeric", Unit::kLine, line_no);
      const double x = v.get<double>();
      if (!(x >= 0.0 && x <= 1.0))
        throw FormatError("soft value outside [0,1]", Unit::kLine, line_no);
      soft.push_back(x);
    }
    mask.soft_values = std::move(soft);
  }
  if (auto s = j.find("score"); s != j.end() && !s->is_null()) {
    if (!s->is_number()) throw FormatError("score not numeric", Unit::kLine, line_no);
    const double x = s->get<double>();
    if (!(x >= 0.0 && x <= 1.0)) throw FormatError("score outside [0,1]", Unit::kLine, line_no);
    mask.quality_score = x;
  }
  return mask;
}

nlohmann::ordered_json mask_to_json(const InstanceMask& mask) {
  nlohmann::ordered_json j;
  j["indices"] = mask.point_indices;
  if (mask.soft_values) j["soft"] = *mask.soft_values;
  if (mask.quality_score) j["score"] = *mask.quality_score;
  return j;
}

template <typename Fn>
void for_each_json_line(const std::string& data, Fn&& fn) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < data.size()) {
    std::size_t end = data.find('\n', pos);
    if (end == std::string::npos) end = data.size();
    std::string_view line = std::string_view(data).substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (split_ws(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(std::string("invalid JSON: ") + e.what(), Unit::kLine, line_no);
    }
    fn(j, line_no);
  }
}

}  // namespace

MaskSet parse_masks(const std::string& data) {
  MaskSet set;
  for_each_json_line(data, [&](const nlohmann::json& j, std::size_t line_no) {
    set.masks.push_back(mask_from_json(j, line_no));
  });
  return set;
}

std::string serialize_masks(const MaskSet& masks) {
  std::string out;
  for (const auto& m : masks.masks) {
    out += mask_to_json(m).dump();
    out += '\n';
  }
  return out;
}

MaskSet load_masks(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  try {
    MaskSet set = parse_masks(data);
    set.source = path.string();
    return set;
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.unit(), e.offset());
  }
}

void save_masks(const MaskSet& masks, const std::filesystem::path& path) {
  write_file(path, serialize_masks(masks));
}

std::vector<LabeledMask3D> load_ground_truth(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  std::vector<LabeledMask3D> gt;
  try {
    for_each_json_line(data, [&](const nlohmann::json& j, std::size_t line_no) {
      LabeledMask3D inst;
      inst.mask = mask_from_json(j, line_no);
      auto it = j.find("label");
      if (it == j.end() || !it->is_string())
        throw FormatError("ground-truth record lacks 'label'", Unit::kLine, line_no);
      inst.label = it->get<std::string>();
      gt.push_back(std::move(inst));
    });
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.unit(), e.offset());
  }
  return gt;
}

void save_ground_truth(const std::vector<LabeledMask3D>& gt,
                       const std::filesystem::path& path) {
  std::string out;
  for (const auto& inst : gt) {
    auto j = mask_to_json(inst.mask);
    j["label"] = inst.label;
    out += j.dump();
    out += '\n';
  }
  write_file(path, out);
}

// ---- scene operations -------------------------------------------------------

SceneBounds compute_bounds(const PointCloud& cloud, UpAxis up_axis) {
  if (cloud.empty()) throw DomainError("cannot compute bounds of an empty cloud");
  SceneBounds b;
  b.up_axis = up_axis;
  b.min_corner = cloud.points.front();
  b.max_corner = cloud.points.front();
  for (const auto& p : cloud.points) {
    b.min_corner = b.min_corner.cwiseMin(p);
    b.max_corner = b.max_corner.cwiseMax(p);
  }
  return b;
}

namespace {

// Re-indexes `mask` through `remap`, dropping points that did not survive.
InstanceMask remap_mask(const InstanceMask& mask, const std::vector<PointIndex>& remap) {
  InstanceMask out;
  out.quality_score = mask.quality_score;
  if (mask.soft_values) out.soft_values.emplace();
  for (std::size_t i = 0; i < mask.point_indices.size(); ++i) {
    const PointIndex n = remap[mask.point_indices[i]];
    if (n == IndexRemap::kDropped) continue;
    out.point_indices.push_back(n);
    if (mask.soft_values) out.soft_values->push_back((*mask.soft_values)[i]);
  }
  return out;
}

}  // namespace

CropResult crop_top(const PointCloud& cloud, const MaskSet& masks,
                    const SceneBounds& bounds, double margin) {
  if (!(margin >= 0.0)) throw DomainError("crop margin must be >= 0");
  if (margin > 0.0 && margin >= bounds.height())
    throw DomainError("crop margin " + std::to_string(margin) +
                      " would remove the whole scene (height " +
                      std::to_string(bounds.height()) + ")");
  const int up = axis_index(bounds.up_axis);
  const double limit = bounds.top() - margin;

  CropResult r;
  r.remap.old_to_new.assign(cloud.size(), IndexRemap::kDropped);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (margin > 0.0 && cloud.points[i][up] > limit) continue;
    r.remap.old_to_new[i] = static_cast<PointIndex>(r.cloud.points.size());
    r.cloud.points.push_back(cloud.points[i]);
    r.cloud.colors.push_back(cloud.colors[i]);
  }
  r.masks.source = masks.source;
  for (std::size_t m = 0; m < masks.masks.size(); ++m) {
    InstanceMask out = remap_mask(masks.masks[m], r.remap.old_to_new);
    if (out.point_indices.empty()) continue;
    r.masks.masks.push_back(std::move(out));
    r.kept_masks.push_back(m);
  }
  return r;
}

std::vector<Patch> split_patches(const PointCloud& cloud, const MaskSet& masks,
                                 double patch_size, UpAxis up_axis) {
  if (!(patch_size > 0.0)) throw DomainError("patch size must be > 0");
  const SceneBounds b = compute_bounds(cloud, up_axis);
  const auto [a0, a1] = horizontal_axes(up_axis);
  auto tiles_along = [&](int axis) {
    const double extent = b.max_corner[axis] - b.min_corner[axis];
    return std::max<long>(1, static_cast<long>(std::ceil(extent / patch_size)));
  };
  const long nx = tiles_along(a0);
  const long ny = tiles_along(a1);
  auto tile_of = [&](const Vec3& p) {
    const long ix = std::min(nx - 1, static_cast<long>(std::floor((p[a0] - b.min_corner[a0]) / patch_size)));
    const long iy = std::min(ny - 1, static_cast<long>(std::floor((p[a1] - b.min_corner[a1]) / patch_size)));
    return iy * nx + ix;
  };

  std::vector<long> point_tile(cloud.size());
  std::map<long, std::size_t> tile_to_patch;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    point_tile[i] = tile_of(cloud.points[i]);
    tile_to_patch.emplace(point_tile[i], 0);
  }
  std::vector<Patch> patches(tile_to_patch.size());
  {
    std::size_t k = 0;
    for (auto& [tile, idx] : tile_to_patch) idx = k++;
  }
  std::vector<PointIndex> local(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Patch& p = patches[tile_to_patch[point_tile[i]]];
    local[i] = static_cast<PointIndex>(p.cloud.points.size());
    p.cloud.points.push_back(cloud.points[i]);
    p.cloud.colors.push_back(cloud.colors[i]);
    p.source_points.push_back(static_cast<PointIndex>(i));
  }
  for (auto& p : patches) p.masks.source = masks.source;

  for (std::size_t m = 0; m < masks.masks.size(); ++m) {
    const auto& mask = masks.masks[m];
    if (mask.point_indices.empty()) continue;
    std::map<long, std::size_t> votes;
    for (PointIndex i : mask.point_indices) ++votes[point_tile[i]];
    long best_tile = votes.begin()->first;
    std::size_t best = 0;
    for (const auto& [tile, count] : votes) {
      if (count > best) {
        best = count;
        best_tile = tile;
      }
    }
    InstanceMask clipped;
    clipped.quality_score = mask.quality_score;
    if (mask.soft_values) clipped.soft_values.emplace();
    for (std::size_t k = 0; k < mask.point_indices.size(); ++k) {
      const PointIndex i = mask.point_indices[k];
      if (point_tile[i] != best_tile) continue;
      clipped.point_indices.push_back(local[i]);
      if (mask.soft_values) clipped.soft_values->push_back((*mask.soft_values)[k]);
    }
    Patch& p = patches[tile_to_patch[best_tile]];
    p.masks.masks.push_back(std::move(clipped));
    p.source_masks.push_back(m);
  }
  return patches;
}

}  // namespace snaplabel
