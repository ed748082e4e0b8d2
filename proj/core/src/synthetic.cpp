#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include <json.hpp>

#include "mantra/datasets.hpp"
#include "mantra/errors.hpp"

namespace mantra {
namespace {

constexpr std::array<std::pair<Archetype, std::string_view>, 7> kArchetypeNames{{
    {Archetype::Floor, "floor"},
    {Archetype::Wall, "wall"},
    {Archetype::Chair, "chair"},
    {Archetype::Table, "table"},
    {Archetype::Sofa, "sofa"},
    {Archetype::Bookcase, "bookcase"},
    {Archetype::Board, "board"},
}};

// Fraction of a room's points spent on furniture (the rest goes to floor
// and walls), so small objects are not drowned out by structure.
constexpr double kFurnitureShare = 0.6;

struct Box {
  Eigen::Vector3d center;
  Eigen::Vector3d half;

  double area() const { return 8.0 * (half.x() * half.y() + half.y() * half.z() + half.x() * half.z()); }
};

struct Part {
  Archetype kind;
  std::vector<Box> boxes;
  Eigen::Vector3d color;
};

struct Room {
  double width = 0, depth = 0, height = 0;
  std::vector<Part> parts;
};

Eigen::Vector3d jitter_color(const Eigen::Vector3d& base, double spread, Rng& rng) {
  Eigen::Vector3d c;
  for (int i = 0; i < 3; ++i) c(i) = std::clamp(base(i) + rng.uniform(-spread, spread), 0.0, 1.0);
  return c;
}

Eigen::Vector3d archetype_color(Archetype a, Rng& rng) {
  switch (a) {
    case Archetype::Floor: return jitter_color({0.45, 0.38, 0.30}, 0.10, rng);
    case Archetype::Wall: return jitter_color({0.82, 0.80, 0.76}, 0.08, rng);
    case Archetype::Chair: return jitter_color({0.60, 0.30, 0.22}, 0.20, rng);
    case Archetype::Table: return jitter_color({0.55, 0.45, 0.30}, 0.20, rng);
    case Archetype::Sofa: return jitter_color({0.30, 0.35, 0.60}, 0.20, rng);
    case Archetype::Bookcase: return jitter_color({0.45, 0.30, 0.18}, 0.20, rng);
    case Archetype::Board: return jitter_color({0.95, 0.95, 0.95}, 0.04, rng);
  }
  return {0.5, 0.5, 0.5};
}

Box box_from_corner(double x, double y, double z, double sx, double sy, double sz) {
  return Box{{x + sx / 2, y + sy / 2, z + sz / 2}, {sx / 2, sy / 2, sz / 2}};
}

void add_legs(std::vector<Box>& boxes, double x, double y, double sx, double sy, double height) {
  const double t = 0.04;
  for (double lx : {x, x + sx - t})
    for (double ly : {y, y + sy - t}) boxes.push_back(box_from_corner(lx, ly, 0.0, t, t, height));
}

// Footprint placement inside the room with a margin; no overlap resolution.
std::pair<double, double> place(const Room& room, double sx, double sy, Rng& rng) {
  const double margin = 0.2;
  const double x = rng.uniform(margin, std::max(margin, room.width - sx - margin));
  const double y = rng.uniform(margin, std::max(margin, room.depth - sy - margin));
  return {x, y};
}

// Position against a random wall: returns (x, y, sx, sy) for a footprint with
// length `len` along the wall and `thick` into the room.
std::array<double, 4> against_wall(const Room& room, double len, double thick, Rng& rng) {
  const auto wall = rng.index(4);
  if (wall < 2) {
    const double x = rng.uniform(0.2, std::max(0.2, room.width - len - 0.2));
    const double y = wall == 0 ? 0.0 : room.depth - thick;
    return {x, y, len, thick};
  }
  const double y = rng.uniform(0.2, std::max(0.2, room.depth - len - 0.2));
  const double x = wall == 2 ? 0.0 : room.width - thick;
  return {x, y, thick, len};
}

Part make_part(Archetype kind, const Room& room, Rng& rng) {
  Part part{kind, {}, archetype_color(kind, rng)};
  auto& b = part.boxes;
  const bool rotate = rng.uniform() < 0.5;
  switch (kind) {
    case Archetype::Chair: {
      const double w = rng.uniform(0.40, 0.50), seat_h = rng.uniform(0.42, 0.48), back_h = rng.uniform(0.35, 0.50);
      auto [x, y] = place(room, w, w, rng);
      add_legs(b, x, y, w, w, seat_h - 0.05);
      b.push_back(box_from_corner(x, y, seat_h - 0.05, w, w, 0.05));
      if (rotate)
        b.push_back(box_from_corner(x, y, seat_h, 0.05, w, back_h));
      else
        b.push_back(box_from_corner(x, y, seat_h, w, 0.05, back_h));
      break;
    }
    case Archetype::Table: {
      double sx = rng.uniform(1.1, 1.8), sy = rng.uniform(0.65, 0.95);
      if (rotate) std::swap(sx, sy);
      const double h = rng.uniform(0.72, 0.78);
      auto [x, y] = place(room, sx, sy, rng);
      add_legs(b, x, y, sx, sy, h - 0.04);
      b.push_back(box_from_corner(x, y, h - 0.04, sx, sy, 0.04));
      break;
    }
    case Archetype::Sofa: {
      const double len = rng.uniform(1.6, 2.2), deep = rng.uniform(0.8, 0.95);
      const double sx = rotate ? deep : len, sy = rotate ? len : deep;
      auto [x, y] = place(room, sx, sy, rng);
      b.push_back(box_from_corner(x, y, 0.0, sx, sy, 0.42));
      if (rotate) {
        b.push_back(box_from_corner(x, y, 0.42, 0.2, sy, 0.40));
        b.push_back(box_from_corner(x, y, 0.42, sx, 0.2, 0.2));
        b.push_back(box_from_corner(x, y + sy - 0.2, 0.42, sx, 0.2, 0.2));
      } else {
        b.push_back(box_from_corner(x, y, 0.42, sx, 0.2, 0.40));
        b.push_back(box_from_corner(x, y, 0.42, 0.2, sy, 0.2));
        b.push_back(box_from_corner(x + sx - 0.2, y, 0.42, 0.2, sy, 0.2));
      }
      break;
    }
    case Archetype::Bookcase: {
      const auto [x, y, sx, sy] = against_wall(room, rng.uniform(0.8, 1.2), rng.uniform(0.30, 0.40), rng);
      const double h = rng.uniform(1.8, 2.2);
      b.push_back(box_from_corner(x, y, 0.0, sx, sy, h));
      break;
    }
    case Archetype::Board: {
      const auto [x, y, sx, sy] = against_wall(room, rng.uniform(1.2, 2.0), 0.02, rng);
      const double z = rng.uniform(0.85, 1.0), h = rng.uniform(0.9, 1.2);
      b.push_back(box_from_corner(x, y, z, sx, sy, h));
      break;
    }
    case Archetype::Floor:
      b.push_back(box_from_corner(0.0, 0.0, -0.001, room.width, room.depth, 0.0));
      break;
    case Archetype::Wall: {
      const double t = 0.0;
      b.push_back(box_from_corner(0.0, 0.0, 0.0, room.width, t, room.height));
      b.push_back(box_from_corner(0.0, room.depth, 0.0, room.width, t, room.height));
      b.push_back(box_from_corner(0.0, 0.0, 0.0, t, room.depth, room.height));
      b.push_back(box_from_corner(room.width, 0.0, 0.0, t, room.depth, room.height));
      break;
    }
  }
  return part;
}

// Uniform point on the surface of a box; degenerate (flat) boxes work too.
Eigen::Vector3d sample_box_surface(const Box& box, Rng& rng) {
  const auto& h = box.half;
  const std::array<double, 3> face_area{h.y() * h.z(), h.x() * h.z(), h.x() * h.y()};
  const double total = face_area[0] + face_area[1] + face_area[2];
  double pick = rng.uniform() * total;
  int axis = 2;
  if (pick < face_area[0])
    axis = 0;
  else if (pick < face_area[0] + face_area[1])
    axis = 1;
  Eigen::Vector3d p;
  for (int i = 0; i < 3; ++i) p(i) = box.center(i) + rng.uniform(-h(i), h(i));
  p(axis) = box.center(axis) + (rng.uniform() < 0.5 ? -h(axis) : h(axis));
  return p;
}

double part_area(const Part& p) {
  double a = 0.0;
  for (const auto& b : p.boxes) a += b.area();
  return a;
}

// Largest-remainder split of `total` proportional to `weights`.
std::vector<int> allocate(int total, const std::vector<double>& weights) {
  std::vector<int> out(weights.size(), 0);
  double sum = 0.0;
  for (double w : weights) sum += w;
  if (sum <= 0.0 || total <= 0) return out;
  std::vector<std::pair<double, std::size_t>> rema;
  int used = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = total * weights[i] / sum;
    out[i] = static_cast<int>(std::floor(exact));
    used += out[i];
    rema.emplace_back(exact - out[i], i);
  }
  std::stable_sort(rema.begin(), rema.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; used < total; ++k, ++used) ++out[rema[k % rema.size()].second];
  return out;
}

int local_id_of(const SourceConfig& config, const LabelSet& set, Archetype a) {
  for (const auto& [kind, name] : config.names) {
    if (kind != a) continue;
    const LabelName label(name);
    for (std::size_t i = 0; i < set.labels.size(); ++i)
      if (set.labels[i] == label) return static_cast<int>(i);
  }
  return -1;
}

Scene generate_room(const SourceConfig& config, const LabelSet& set, int index, Rng& rng) {
  Room room;
  room.width = rng.uniform(4.0, 7.0);
  room.depth = rng.uniform(3.5, 6.0);
  room.height = rng.uniform(2.6, 3.2);

  std::vector<Part> structure, furniture;
  for (const auto& [kind, name] : config.names) {
    (void)name;
    if (kind == Archetype::Floor || kind == Archetype::Wall) {
      structure.push_back(make_part(kind, room, rng));
      continue;
    }
    // Every named archetype appears at least once per room.
    int count = 1;
    if (kind == Archetype::Chair) count += static_cast<int>(rng.index(3));
    if (kind == Archetype::Table || kind == Archetype::Bookcase) count += static_cast<int>(rng.index(2));
    for (int i = 0; i < count; ++i) furniture.push_back(make_part(kind, room, rng));
  }

  const int total = std::max(1, static_cast<int>(std::lround(config.points_per_room * config.density_scale)));
  double share = furniture.empty() ? 0.0 : (structure.empty() ? 1.0 : kFurnitureShare);
  const int furniture_points = static_cast<int>(std::lround(total * share));
  std::vector<double> sw, fw;
  for (const auto& p : structure) sw.push_back(part_area(p));
  for (const auto& p : furniture) fw.push_back(part_area(p));
  const auto s_alloc = allocate(total - furniture_points, sw);
  const auto f_alloc = allocate(furniture_points, fw);

  std::vector<Eigen::Matrix<double, 1, 6>> rows;
  std::vector<int> labels;
  rows.reserve(static_cast<std::size_t>(total));
  auto emit = [&](const Part& part, int n) {
    std::vector<double> bw;
    for (const auto& b : part.boxes) bw.push_back(b.area());
    const auto per_box = allocate(n, bw);
    const int label = local_id_of(config, set, part.kind);
    for (std::size_t bi = 0; bi < part.boxes.size(); ++bi) {
      for (int k = 0; k < per_box[bi]; ++k) {
        Eigen::Matrix<double, 1, 6> r;
        r.head<3>() = sample_box_surface(part.boxes[bi], rng).transpose();
        const Eigen::Vector3d c = jitter_color(part.color, 0.02, rng);
        r.tail<3>() = c.transpose();
        rows.push_back(r);
        labels.push_back(label);
      }
    }
  };
  for (std::size_t i = 0; i < structure.size(); ++i) emit(structure[i], s_alloc[i]);
  for (std::size_t i = 0; i < furniture.size(); ++i) emit(furniture[i], f_alloc[i]);

  // Covariate shift: sensor noise, color jitter, occluded sector.
  for (auto& r : rows) {
    if (config.noise_sigma > 0.0)
      for (int i = 0; i < 3; ++i) r(i) += config.noise_sigma * rng.normal();
    if (config.color_jitter > 0.0)
      for (int i = 3; i < 6; ++i) r(i) = std::clamp(r(i) + rng.uniform(-config.color_jitter, config.color_jitter), 0.0, 1.0);
  }
  std::vector<std::size_t> keep;
  keep.reserve(rows.size());
  if (config.dropout_rate > 0.0) {
    const double start = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double span = 2.0 * std::numbers::pi * config.dropout_rate;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double angle = std::atan2(rows[i](1) - room.depth / 2, rows[i](0) - room.width / 2);
      double rel = angle - start;
      while (rel < 0) rel += 2.0 * std::numbers::pi;
      if (rel >= span) keep.push_back(i);
    }
    if (keep.empty()) keep.push_back(0);
  } else {
    for (std::size_t i = 0; i < rows.size(); ++i) keep.push_back(i);
  }

  Scene scene;
  scene.source_id = config.source_id;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s-%03d", config.source_id.c_str(), index);
  scene.scene_id = buf;
  scene.points.resize(static_cast<Eigen::Index>(keep.size()), 6);
  scene.labels.reserve(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    scene.points.row(static_cast<Eigen::Index>(i)) = rows[keep[i]];
    scene.labels.push_back(labels[keep[i]]);
  }
  return scene;
}

}  // namespace

std::string_view to_string(Archetype a) {
  for (const auto& [kind, name] : kArchetypeNames)
    if (kind == a) return name;
  return "unknown";
}

Archetype archetype_from_string(std::string_view text) {
  for (const auto& [kind, name] : kArchetypeNames)
    if (name == text) return kind;
  fail(ErrorCode::ConfigInvalid, "unknown archetype '" + std::string(text) + "'");
}

LabelSet SourceConfig::label_set() const {
  std::vector<std::string> distinct;
  for (const auto& [kind, name] : names) {
    (void)kind;
    const std::string n = normalize_label(name);
    if (std::find(distinct.begin(), distinct.end(), n) == distinct.end()) distinct.push_back(n);
  }
  return register_source(source_id, distinct);
}

void SourceConfig::validate() const {
  auto bad = [&](const std::string& why) { fail(ErrorCode::ConfigInvalid, "source '" + source_id + "': " + why); };
  if (source_id.empty()) bad("empty source id");
  if (names.empty()) bad("no archetype names");
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t j = i + 1; j < names.size(); ++j)
      if (names[i].first == names[j].first) bad("archetype named twice");
  if (rooms < 1) bad("rooms must be >= 1");
  if (points_per_room < 64) bad("points_per_room must be >= 64");
  if (!(noise_sigma >= 0.0)) bad("noise_sigma must be >= 0");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) bad("dropout_rate must be in [0, 1)");
  if (!(density_scale > 0.0)) bad("density_scale must be positive");
  if (!(color_jitter >= 0.0 && color_jitter < 1.0)) bad("color_jitter must be in [0, 1)");
  if (val_rooms < 0 || test_rooms < 0 || val_rooms + test_rooms > rooms) bad("val/test rooms exceed rooms");
}

std::string SourceConfig::to_json() const {
  nlohmann::json j;
  j["id"] = source_id;
  j["names"] = nlohmann::json::object();
  nlohmann::json names_arr = nlohmann::json::array();
  for (const auto& [kind, name] : names) names_arr.push_back({std::string(mantra::to_string(kind)), name});
  j["names"] = names_arr;
  j["rooms"] = rooms;
  j["points_per_room"] = points_per_room;
  j["noise_sigma"] = noise_sigma;
  j["dropout_rate"] = dropout_rate;
  j["density_scale"] = density_scale;
  j["color_jitter"] = color_jitter;
  j["seed"] = seed;
  j["val_rooms"] = val_rooms;
  j["test_rooms"] = test_rooms;
  return j.dump();
}

SourceConfig SourceConfig::from_json(std::string_view text) {
  SourceConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.contains("preset")) c = preset_source(j["preset"].get<std::string>(), j.value("seed", std::uint64_t{0}));
    c.source_id = j.value("id", c.source_id);
    if (j.contains("names")) {
      c.names.clear();
      for (const auto& pair : j["names"])
        c.names.emplace_back(archetype_from_string(pair.at(0).get<std::string>()), pair.at(1).get<std::string>());
    }
    c.rooms = j.value("rooms", c.rooms);
    c.points_per_room = j.value("points_per_room", c.points_per_room);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.density_scale = j.value("density_scale", c.density_scale);
    c.color_jitter = j.value("color_jitter", c.color_jitter);
    if (!j.contains("preset")) c.seed = j.value("seed", c.seed);
    c.val_rooms = j.value("val_rooms", c.val_rooms);
    c.test_rooms = j.value("test_rooms", c.test_rooms);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("source config: ") + e.what());
  }
  c.validate();
  return c;
}

SourceConfig preset_source(std::string_view preset, std::uint64_t seed) {
  SourceConfig c;
  c.seed = seed;
  if (preset == "synth-clean") {
    c.source_id = "synth-clean";
    c.names = {{Archetype::Wall, "wall"},   {Archetype::Floor, "floor"},       {Archetype::Chair, "chair"},
               {Archetype::Table, "table"}, {Archetype::Sofa, "sofa"},         {Archetype::Bookcase, "bookcase"},
               {Archetype::Board, "board"}};
  } else if (preset == "synth-noisy-a") {
    c.source_id = "synth-noisy-a";
    c.names = {{Archetype::Wall, "wall"},   {Archetype::Floor, "floor"}, {Archetype::Chair, "seat"},
               {Archetype::Table, "table"}, {Archetype::Sofa, "couch"},  {Archetype::Bookcase, "bookshelf"}};
    c.noise_sigma = 0.01;
    c.dropout_rate = 0.1;
    c.color_jitter = 0.05;
    c.density_scale = 0.8;
    c.seed = seed + 1;
  } else if (preset == "synth-noisy-b") {
    c.source_id = "synth-noisy-b";
    c.names = {{Archetype::Wall, "wall"},      {Archetype::Floor, "floor"},
               {Archetype::Chair, "chair"},    {Archetype::Table, "table"},
               {Archetype::Sofa, "furniture"}, {Archetype::Bookcase, "furniture"},
               {Archetype::Board, "board"}};
    c.noise_sigma = 0.005;
    c.dropout_rate = 0.05;
    c.color_jitter = 0.03;
    c.seed = seed + 2;
  } else {
    fail(ErrorCode::ConfigInvalid, "unknown preset '" + std::string(preset) + "'");
  }
  return c;
}

std::vector<SourceConfig> default_sources(std::uint64_t seed) {
  return {preset_source("synth-clean", seed), preset_source("synth-noisy-a", seed),
          preset_source("synth-noisy-b", seed)};
}

std::vector<Scene> generate_source(const SourceConfig& config) {
  config.validate();
  const LabelSet set = config.label_set();
  Rng rng(config.seed * 0x100000001b3ULL + stable_hash(config.source_id));
  std::vector<Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(config.rooms));
  for (int r = 0; r < config.rooms; ++r) scenes.push_back(generate_room(config, set, r, rng));
  return scenes;
}

}  // namespace mantra
