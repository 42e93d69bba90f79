#include "snaplabel/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "snaplabel/error.hpp"

namespace snaplabel {

const std::vector<std::string>& synthetic_classes() {
  static const std::vector<std::string> kClasses = {
      "bed", "bookshelf", "cabinet", "chair", "desk", "lamp", "sofa", "table", "toilet", "tv"};
  return kClasses;
}

namespace {

Rgb class_color(std::size_t cls) {
  // Spread hues around the wheel, avoiding the floor and wall greys.
  const double h = 6.0 * static_cast<double>(cls) / static_cast<double>(synthetic_classes().size());
  const double f = h - std::floor(h);
  const int sector = static_cast<int>(h) % 6;
  const double hi = 220, lo = 40;
  const double up = lo + f * (hi - lo), down = hi - f * (hi - lo);
  double r = 0, g = 0, b = 0;
  switch (sector) {
    case 0: r = hi; g = up; b = lo; break;
    case 1: r = down; g = hi; b = lo; break;
    case 2: r = lo; g = hi; b = up; break;
    case 3: r = lo; g = down; b = hi; break;
    case 4: r = up; g = lo; b = hi; break;
    default: r = hi; g = lo; b = down; break;
  }
  return {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
}

class Builder {
 public:
  Builder(std::mt19937_64& rng, double noise) : rng_(rng), noise_(noise) {}

  void add(Vec3 p, Rgb c) {
    if (noise_ > 0.0) {
      std::normal_distribution<double> n(0.0, noise_);
      p += Vec3(n(rng_), n(rng_), n(rng_));
    }
    cloud.points.push_back(p);
    cloud.colors.push_back(c);
  }

  PointCloud cloud;

 private:
  std::mt19937_64& rng_;
  double noise_;
};

Rgb jitter(std::mt19937_64& rng, Rgb base) {
  std::uniform_int_distribution<int> d(-15, 15);
  Rgb out;
  for (int i = 0; i < 3; ++i) out[i] = static_cast<std::uint8_t>(std::clamp(base[i] + d(rng), 0, 255));
  return out;
}

}  // namespace

SyntheticScene generate_synthetic(const SyntheticOptions& o) {
  if (o.n_objects < 0) throw DomainError("n_objects must be >= 0");
  if (!(o.noise >= 0.0)) throw DomainError("noise must be >= 0");
  if (!(o.object_density > 0.0) || !(o.floor_spacing > 0.0) || !(o.wall_height >= 0.0))
    throw DomainError("synthetic densities must be positive");

  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto uniform = [&](double a, double b) { return a + (b - a) * unit(rng); };

  const int side = std::max(4, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(o.n_objects)))));
  const double cell = 2.0;
  const double room = side * cell;

  SyntheticScene scene;
  Builder b(rng, o.noise);

  const int steps = static_cast<int>(std::lround(room / o.floor_spacing));
  for (int i = 0; i <= steps; ++i)
    for (int j = 0; j <= steps; ++j)
      b.add(Vec3(i * o.floor_spacing, j * o.floor_spacing, 0.0), jitter(rng, {150, 140, 130}));

  // An empty room is just its floor.
  const int wall_steps =
      o.n_objects == 0 ? 0 : static_cast<int>(std::lround(o.wall_height / o.floor_spacing));
  for (int k = 1; k <= wall_steps; ++k) {
    const double z = k * o.floor_spacing;
    for (int i = 0; i <= steps; ++i) {
      const double t = i * o.floor_spacing;
      b.add(Vec3(t, 0.0, z), jitter(rng, {200, 200, 200}));
      b.add(Vec3(t, room, z), jitter(rng, {200, 200, 200}));
      if (i > 0 && i < steps) {
        b.add(Vec3(0.0, t, z), jitter(rng, {200, 200, 200}));
        b.add(Vec3(room, t, z), jitter(rng, {200, 200, 200}));
      }
    }
  }

  std::vector<int> slots(static_cast<std::size_t>(side * side));
  std::iota(slots.begin(), slots.end(), 0);
  std::shuffle(slots.begin(), slots.end(), rng);

  const auto& classes = synthetic_classes();
  for (int obj = 0; obj < o.n_objects; ++obj) {
    const std::size_t cls = static_cast<std::size_t>(rng() % classes.size());
    const Rgb base = class_color(cls);
    const double cx = (slots[obj] % side + 0.5) * cell + uniform(-0.2, 0.2);
    const double cy = (slots[obj] / side + 0.5) * cell + uniform(-0.2, 0.2);
    const double h = uniform(0.4, 1.4);
    const bool cylinder = unit(rng) < 0.4;

    LabeledMask3D gt;
    gt.label = classes[cls];
    const auto first = static_cast<PointIndex>(b.cloud.size());

    if (cylinder) {
      const double r = uniform(0.25, 0.6);
      const double area = 2.0 * std::numbers::pi * r * h + std::numbers::pi * r * r;
      const int n = std::max(150, static_cast<int>(area * o.object_density));
      const double p_top = std::numbers::pi * r * r / area;
      for (int i = 0; i < n; ++i) {
        const double theta = uniform(0.0, 2.0 * std::numbers::pi);
        if (unit(rng) < p_top) {
          const double rr = r * std::sqrt(unit(rng));
          b.add(Vec3(cx + rr * std::cos(theta), cy + rr * std::sin(theta), h), jitter(rng, base));
        } else {
          b.add(Vec3(cx + r * std::cos(theta), cy + r * std::sin(theta), uniform(0.0, h)),
                jitter(rng, base));
        }
      }
    } else {
      const double w = uniform(0.5, 1.2);
      const double d = uniform(0.5, 1.2);
      const double faces[5] = {w * d, w * h, w * h, d * h, d * h};
      const double area = faces[0] + faces[1] + faces[2] + faces[3] + faces[4];
      const int n = std::max(150, static_cast<int>(area * o.object_density));
      std::discrete_distribution<int> face(std::begin(faces), std::end(faces));
      const double x0 = cx - w / 2, x1 = cx + w / 2, y0 = cy - d / 2, y1 = cy + d / 2;
      for (int i = 0; i < n; ++i) {
        Vec3 p;
        switch (face(rng)) {
          case 0: p = Vec3(uniform(x0, x1), uniform(y0, y1), h); break;
          case 1: p = Vec3(uniform(x0, x1), y0, uniform(0.0, h)); break;
          case 2: p = Vec3(uniform(x0, x1), y1, uniform(0.0, h)); break;
          case 3: p = Vec3(x0, uniform(y0, y1), uniform(0.0, h)); break;
          default: p = Vec3(x1, uniform(y0, y1), uniform(0.0, h)); break;
        }
        b.add(p, jitter(rng, base));
      }
    }
    const auto last = static_cast<PointIndex>(b.cloud.size());
    gt.mask.point_indices.resize(last - first);
    std::iota(gt.mask.point_indices.begin(), gt.mask.point_indices.end(), first);
    scene.ground_truth.push_back(std::move(gt));
  }

  scene.cloud = std::move(b.cloud);
  for (const auto& g : scene.ground_truth) {
    if (std::find(scene.vocabulary.begin(), scene.vocabulary.end(), g.label) ==
        scene.vocabulary.end())
      scene.vocabulary.push_back(g.label);
  }
  std::sort(scene.vocabulary.begin(), scene.vocabulary.end());
  return scene;
}

void write_synthetic(const SyntheticScene& scene, const std::filesystem::path& dir,
                     std::uint64_t seed) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  save_point_cloud(scene.cloud, dir / "scene.ply", CloudFormat::kPly);
  MaskSet masks;
  masks.source = "synthetic";
  for (const auto& g : scene.ground_truth) masks.masks.push_back(g.mask);
  save_masks(masks, dir / "masks.jsonl");
  save_ground_truth(scene.ground_truth, dir / "gt.jsonl");

  std::string vocab;
  for (std::size_t i = 0; i < scene.vocabulary.size(); ++i)
    vocab += (i ? ", " : "") + scene.vocabulary[i];
  std::string cfg;
  cfg += "[scene]\ncloud = scene.ply\nmasks = masks.jsonl\nground_truth = gt.jsonl\n\n";
  cfg += "[detector]\nprovider = oracle\n";
  if (!vocab.empty()) cfg += "vocabulary = " + vocab + "\n";
  cfg += "\n[eval]\npredictions = out/labeled.jsonl\n";
  cfg += "\n[run]\nseed = " + std::to_string(seed) + "\nout = out\n";
  write_file(dir / "config.ini", cfg);
}

}  // namespace snaplabel
