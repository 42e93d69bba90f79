#include "snaplabel/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "snaplabel/error.hpp"
#include "snaplabel/scene_io.hpp"

namespace snaplabel {

std::optional<ProviderKind> parse_provider_kind(std::string_view s) {
  if (s == "oracle") return ProviderKind::kOracle;
  if (s == "file") return ProviderKind::kFile;
  if (s == "http") return ProviderKind::kHttp;
  return std::nullopt;
}

std::string_view to_string(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::kFile:
      return "file";
    case ProviderKind::kHttp:
      return "http";
    case ProviderKind::kOracle:
    default:
      return "oracle";
  }
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\"");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last)
    throw ConfigError("bad value for " + key + ": '" + value + "'");
  return out;
}

using Setter = std::function<void(PipelineConfig&, const std::string&)>;

std::map<std::string, std::map<std::string, Setter>> setters(const std::filesystem::path& base) {
  const auto path_of = [base](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_relative() && !base.empty() ? base / p : p;
  };
  using C = PipelineConfig;
  using S = std::string;
  std::map<std::string, std::map<std::string, Setter>> t;

  t["scene"]["cloud"] = [=](C& c, const S& v) { c.scene.cloud = path_of(v); };
  t["scene"]["masks"] = [=](C& c, const S& v) { c.scene.masks = path_of(v); };
  t["scene"]["ground_truth"] = [=](C& c, const S& v) { c.scene.ground_truth = path_of(v); };
  t["scene"]["up_axis"] = [](C& c, const S& v) {
    auto a = parse_up_axis(v);
    if (!a) throw ConfigError("scene.up_axis must be x, y or z");
    c.scene.up_axis = *a;
  };
  t["scene"]["crop_margin"] = [](C& c, const S& v) {
    c.scene.crop_margin = parse_number<double>("scene.crop_margin", v);
  };
  t["scene"]["patch_size"] = [](C& c, const S& v) {
    c.scene.patch_size = parse_number<double>("scene.patch_size", v);
  };

  t["filter"]["beta"] = [](C& c, const S& v) { c.filter.beta = parse_number<double>("filter.beta", v); };
  t["filter"]["alpha"] = [](C& c, const S& v) { c.filter.alpha = parse_number<double>("filter.alpha", v); };
  t["filter"]["tau"] = [](C& c, const S& v) { c.filter.tau = parse_number<double>("filter.tau", v); };
  t["filter"]["stability_iou"] = [](C& c, const S& v) {
    c.filter.stability_iou = parse_number<double>("filter.stability_iou", v);
  };
  t["filter"]["n_min"] = [](C& c, const S& v) {
    c.filter.n_min = parse_number<std::size_t>("filter.n_min", v);
  };
  t["filter"]["gamma"] = [](C& c, const S& v) { c.gamma = parse_number<double>("filter.gamma", v); };

  t["snap"]["global_count"] = [](C& c, const S& v) {
    c.snap.global_count = parse_number<int>("snap.global_count", v);
  };
  t["snap"]["corner_count"] = [](C& c, const S& v) {
    c.snap.corner_count = parse_number<int>("snap.corner_count", v);
  };
  t["snap"]["wide_angle_count"] = [](C& c, const S& v) {
    c.snap.wide_angle_count = parse_number<int>("snap.wide_angle_count", v);
  };
  t["snap"]["width"] = [](C& c, const S& v) { c.snap.width = parse_number<int>("snap.width", v); };
  t["snap"]["height"] = [](C& c, const S& v) { c.snap.height = parse_number<int>("snap.height", v); };
  t["snap"]["height_offset"] = [](C& c, const S& v) {
    c.snap.height_offset = parse_number<double>("snap.height_offset", v);
  };
  t["snap"]["margin_px"] = [](C& c, const S& v) {
    c.snap.margin_px = parse_number<double>("snap.margin_px", v);
  };
  t["snap"]["splat_radius_px"] = [](C& c, const S& v) {
    c.render.splat_radius_px = parse_number<int>("snap.splat_radius_px", v);
  };
  t["snap"]["background"] = [](C& c, const S& v) {
    const auto parts = split_list(v);
    if (parts.size() != 3) throw ConfigError("snap.background needs three components");
    for (int i = 0; i < 3; ++i) {
      const int x = parse_number<int>("snap.background", parts[i]);
      if (x < 0 || x > 255) throw ConfigError("snap.background components must be 0..255");
      c.render.background[i] = static_cast<std::uint8_t>(x);
    }
  };

  t["projection"]["depth_tol"] = [](C& c, const S& v) {
    c.projection.depth_tol = parse_number<double>("projection.depth_tol", v);
  };
  t["projection"]["splat_radius_px"] = [](C& c, const S& v) {
    c.projection.splat_radius_px = parse_number<int>("projection.splat_radius_px", v);
  };

  t["lookup"]["iou_gate"] = [](C& c, const S& v) {
    c.lookup.iou_gate = parse_number<double>("lookup.iou_gate", v);
  };
  t["lookup"]["min_views"] = [](C& c, const S& v) {
    c.lookup.min_views = parse_number<int>("lookup.min_views", v);
  };
  t["lookup"]["lel_top_k"] = [](C& c, const S& v) {
    c.lookup.lel_top_k = parse_number<int>("lookup.lel_top_k", v);
  };
  t["lookup"]["crop_scale"] = [](C& c, const S& v) {
    c.lookup.crop_scale = parse_number<double>("lookup.crop_scale", v);
  };
  t["lookup"]["lel_iou_gate"] = [](C& c, const S& v) {
    c.lookup.lel_iou_gate = parse_number<double>("lookup.lel_iou_gate", v);
  };
  t["lookup"]["lel_min_views"] = [](C& c, const S& v) {
    c.lookup.lel_min_views = parse_number<int>("lookup.lel_min_views", v);
  };

  t["detector"]["provider"] = [](C& c, const S& v) {
    auto k = parse_provider_kind(v);
    if (!k) throw ConfigError("detector.provider must be oracle, file or http");
    c.detector.provider = *k;
  };
  t["detector"]["endpoint"] = [](C& c, const S& v) { c.detector.endpoint = v; };
  t["detector"]["responses"] = [=](C& c, const S& v) { c.detector.responses = path_of(v); };
  t["detector"]["vocabulary"] = [](C& c, const S& v) { c.detector.vocabulary = split_list(v); };
  t["detector"]["retries"] = [](C& c, const S& v) {
    c.detector.retries = parse_number<int>("detector.retries", v);
  };
  t["detector"]["timeout_s"] = [](C& c, const S& v) {
    c.detector.timeout_s = parse_number<double>("detector.timeout_s", v);
  };
  t["detector"]["max_concurrency"] = [](C& c, const S& v) {
    c.detector.max_concurrency = parse_number<int>("detector.max_concurrency", v);
  };
  t["detector"]["drop_rate"] = [](C& c, const S& v) {
    c.detector.drop_rate = parse_number<double>("detector.drop_rate", v);
  };
  t["detector"]["perturb_rate"] = [](C& c, const S& v) {
    c.detector.perturb_rate = parse_number<double>("detector.perturb_rate", v);
  };

  t["eval"]["predictions"] = [=](C& c, const S& v) { c.eval.predictions = path_of(v); };

  t["run"]["workers"] = [](C& c, const S& v) { c.run.workers = parse_number<int>("run.workers", v); };
  t["run"]["seed"] = [](C& c, const S& v) { c.run.seed = parse_number<std::uint64_t>("run.seed", v); };
  t["run"]["out"] = [=](C& c, const S& v) { c.run.out = path_of(v); };
  t["run"]["views"] = [=](C& c, const S& v) { c.run.views = path_of(v); };
  return t;
}

}  // namespace

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }

  PipelineConfig config;
  const auto table = setters(base_dir);
  for (const auto& [section, body] : tree) {
    auto s = table.find(section);
    if (s == table.end()) {
      if (!body.data().empty()) throw ConfigError("config key '" + section + "' is outside any section");
      throw ConfigError("unknown config section [" + section + "]");
    }
    for (const auto& [key, node] : body) {
      auto k = s->second.find(key);
      if (k == s->second.end())
        throw ConfigError("unknown config key " + section + "." + key);
      k->second(config, trim(node.data()));
    }
  }
  validate(config);
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  try {
    return parse_config(text, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void validate(const PipelineConfig& c) {
  try {
    validate(c.filter);
    validate(c.lookup);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (!(c.gamma >= 0.0)) throw ConfigError("filter.gamma must be >= 0");
  if (!(c.scene.crop_margin >= 0.0)) throw ConfigError("scene.crop_margin must be >= 0");
  if (c.scene.patch_size && !(*c.scene.patch_size > 0.0))
    throw ConfigError("scene.patch_size must be > 0");
  if (c.snap.global_count < 0 || c.snap.corner_count < 0 || c.snap.wide_angle_count < 0)
    throw ConfigError("snap counts must be >= 0");
  if (c.snap.corner_count > 4 || c.snap.wide_angle_count > 4)
    throw ConfigError("snap.corner_count and snap.wide_angle_count are at most 4");
  if (c.snap.width <= 0 || c.snap.height <= 0) throw ConfigError("snap image size must be > 0");
  if (c.snap.width > 65535 || c.snap.height > 65535)
    throw ConfigError("snap image size must be below 65536");
  if (!(c.snap.margin_px >= 0.0) || 2.0 * c.snap.margin_px >= std::min(c.snap.width, c.snap.height))
    throw ConfigError("snap.margin_px leaves no usable image area");
  if (c.render.splat_radius_px < 0 || c.projection.splat_radius_px < 0)
    throw ConfigError("splat_radius_px must be >= 0");
  if (!(c.projection.depth_tol >= 0.0)) throw ConfigError("projection.depth_tol must be >= 0");
  if (c.detector.retries < 0) throw ConfigError("detector.retries must be >= 0");
  if (!(c.detector.timeout_s > 0.0)) throw ConfigError("detector.timeout_s must be > 0");
  if (c.detector.max_concurrency < 1) throw ConfigError("detector.max_concurrency must be >= 1");
  if (!(c.detector.drop_rate >= 0.0 && c.detector.drop_rate <= 1.0) ||
      !(c.detector.perturb_rate >= 0.0 && c.detector.perturb_rate <= 1.0))
    throw ConfigError("detector drop/perturb rates must be in [0,1]");
  if (c.run.workers < 1) throw ConfigError("run.workers must be >= 1");
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string dump_config(const PipelineConfig& c) {
  std::ostringstream os;
  os << "[scene]\n";
  if (!c.scene.cloud.empty()) os << "cloud = " << c.scene.cloud.string() << "\n";
  if (!c.scene.masks.empty()) os << "masks = " << c.scene.masks.string() << "\n";
  if (!c.scene.ground_truth.empty()) os << "ground_truth = " << c.scene.ground_truth.string() << "\n";
  os << "up_axis = " << to_string(c.scene.up_axis) << "\n";
  os << "crop_margin = " << num(c.scene.crop_margin) << "\n";
  if (c.scene.patch_size) os << "patch_size = " << num(*c.scene.patch_size) << "\n";

  os << "\n[filter]\n";
  os << "beta = " << num(c.filter.beta) << "\n";
  os << "alpha = " << num(c.filter.alpha) << "\n";
  os << "tau = " << num(c.filter.tau) << "\n";
  os << "stability_iou = " << num(c.filter.stability_iou) << "\n";
  os << "n_min = " << c.filter.n_min << "\n";
  os << "gamma = " << num(c.gamma) << "\n";

  os << "\n[snap]\n";
  os << "global_count = " << c.snap.global_count << "\n";
  os << "corner_count = " << c.snap.corner_count << "\n";
  os << "wide_angle_count = " << c.snap.wide_angle_count << "\n";
  os << "width = " << c.snap.width << "\n";
  os << "height = " << c.snap.height << "\n";
  if (c.snap.height_offset) os << "height_offset = " << num(*c.snap.height_offset) << "\n";
  os << "margin_px = " << num(c.snap.margin_px) << "\n";
  os << "splat_radius_px = " << c.render.splat_radius_px << "\n";
  os << "background = " << int(c.render.background[0]) << ", " << int(c.render.background[1])
     << ", " << int(c.render.background[2]) << "\n";

  os << "\n[projection]\n";
  os << "depth_tol = " << num(c.projection.depth_tol) << "\n";
  os << "splat_radius_px = " << c.projection.splat_radius_px << "\n";

  os << "\n[lookup]\n";
  os << "iou_gate = " << num(c.lookup.iou_gate) << "\n";
  os << "min_views = " << c.lookup.min_views << "\n";
  os << "lel_top_k = " << c.lookup.lel_top_k << "\n";
  os << "crop_scale = " << num(c.lookup.crop_scale) << "\n";
  os << "lel_iou_gate = " << num(c.lookup.lel_iou_gate) << "\n";
  os << "lel_min_views = " << c.lookup.lel_min_views << "\n";

  os << "\n[detector]\n";
  os << "provider = " << to_string(c.detector.provider) << "\n";
  if (!c.detector.endpoint.empty()) os << "endpoint = " << c.detector.endpoint << "\n";
  if (!c.detector.responses.empty()) os << "responses = " << c.detector.responses.string() << "\n";
  if (!c.detector.vocabulary.empty()) {
    os << "vocabulary = ";
    for (std::size_t i = 0; i < c.detector.vocabulary.size(); ++i)
      os << (i ? ", " : "") << c.detector.vocabulary[i];
    os << "\n";
  }
  os << "retries = " << c.detector.retries << "\n";
  os << "timeout_s = " << num(c.detector.timeout_s) << "\n";
  os << "max_concurrency = " << c.detector.max_concurrency << "\n";
  os << "drop_rate = " << num(c.detector.drop_rate) << "\n";
  os << "perturb_rate = " << num(c.detector.perturb_rate) << "\n";

  if (!c.eval.predictions.empty()) {
    os << "\n[eval]\n";
    os << "predictions = " << c.eval.predictions.string() << "\n";
  }

  os << "\n[run]\n";
  os << "workers = " << c.run.workers << "\n";
  os << "seed = " << c.run.seed << "\n";
  os << "out = " << c.run.out.string() << "\n";
  if (!c.run.views.empty()) os << "views = " << c.run.views.string() << "\n";
  return os.str();
}

}  // namespace snaplabel
