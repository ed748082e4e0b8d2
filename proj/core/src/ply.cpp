#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "mantra/datasets.hpp"
#include "mantra/errors.hpp"

namespace mantra {
namespace {

constexpr std::string_view kSceneComment = "mantra scene ";
constexpr std::string_view kSourceComment = "mantra source ";
constexpr std::string_view kLabelsComment = "mantra labels ";

struct PlyHeader {
  std::size_t vertices = 0;
  std::vector<std::string> properties;
  std::vector<bool> is_float;
  std::string scene_id;
  std::string source_id;
  std::vector<std::string> label_names;
};

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) out.push_back(item);
  return out;
}

PlyHeader read_header(std::istream& in, const std::filesystem::path& path) {
  PlyHeader h;
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) fail(ErrorCode::ParseError, path.string() + ": not a PLY file");
  bool in_vertex = false, have_format = false, have_vertex = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "end_header") {
      if (!have_format) fail(ErrorCode::ParseError, path.string() + ": missing format line");
      if (!have_vertex) fail(ErrorCode::ParseError, path.string() + ": missing vertex element");
      return h;
    }
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") fail(ErrorCode::ParseError, path.string() + ": only ASCII PLY is supported");
      have_format = true;
    } else if (key == "comment") {
      const std::string rest = line.size() > 8 ? line.substr(8) : std::string();
      if (rest.rfind(kSceneComment, 0) == 0) h.scene_id = rest.substr(kSceneComment.size());
      if (rest.rfind(kSourceComment, 0) == 0) h.source_id = rest.substr(kSourceComment.size());
      if (rest.rfind(kLabelsComment, 0) == 0) h.label_names = split_commas(rest.substr(kLabelsComment.size()));
    } else if (key == "element") {
      std::string name;
      long count = -1;
      ls >> name >> count;
      in_vertex = name == "vertex";
      if (in_vertex) {
        if (!ls || count < 0) fail(ErrorCode::ParseError, path.string() + ": bad vertex count");
        h.vertices = static_cast<std::size_t>(count);
        have_vertex = true;
      } else if (count != 0) {
        fail(ErrorCode::ParseError, path.string() + ": unsupported element '" + name + "'");
      }
    } else if (key == "property") {
      std::string type, name;
      ls >> type >> name;
      if (type == "list") fail(ErrorCode::ParseError, path.string() + ": list properties are not supported");
      if (in_vertex) {
        h.properties.push_back(name);
        h.is_float.push_back(type == "float" || type == "double" || type == "float32" || type == "float64");
      }
    } else if (key != "obj_info" && !key.empty()) {
      fail(ErrorCode::ParseError, path.string() + ": unexpected header line '" + line + "'");
    }
  }
  fail(ErrorCode::ParseError, path.string() + ": missing end_header");
}

}  // namespace

void write_ply(const Scene& scene, const std::filesystem::path& path, const std::vector<std::string>& label_names) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << "ply\nformat ascii 1.0\n";
  if (!scene.scene_id.empty()) out << "comment " << kSceneComment << scene.scene_id << '\n';
  if (!scene.source_id.empty()) out << "comment " << kSourceComment << scene.source_id << '\n';
  if (!label_names.empty()) {
    out << "comment " << kLabelsComment;
    for (std::size_t i = 0; i < label_names.size(); ++i) out << (i ? "," : "") << label_names[i];
    out << '\n';
  }
  out << "element vertex " << scene.size() << '\n'
      << "property double x\nproperty double y\nproperty double z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "property int label\nproperty int source\nend_header\n";
  char buf[160];
  for (Eigen::Index i = 0; i < scene.points.rows(); ++i) {
    const auto& p = scene.points;
    auto channel = [&](Eigen::Index c) { return static_cast<int>(std::lround(std::clamp(p(i, c), 0.0, 1.0) * 255.0)); };
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %d %d %d %d 0\n", p(i, 0), p(i, 1), p(i, 2), channel(3),
                  channel(4), channel(5), scene.labels[static_cast<std::size_t>(i)]);
    out << buf;
  }
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

Scene read_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  const PlyHeader h = read_header(in, path);

  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < h.properties.size(); ++i) column[h.properties[i]] = i;
  for (const char* required : {"x", "y", "z", "red", "green", "blue", "label"})
    if (!column.contains(required))
      fail(ErrorCode::MissingProperty, path.string() + ": vertex property '" + required + "' missing");
  const std::size_t cx = column["x"], cy = column["y"], cz = column["z"];
  const std::size_t cr = column["red"], cg = column["green"], cb = column["blue"], cl = column["label"];

  Scene scene;
  scene.scene_id = h.scene_id.empty() ? path.stem().string() : h.scene_id;
  scene.source_id = h.source_id;
  scene.points.resize(static_cast<Eigen::Index>(h.vertices), 6);
  scene.labels.resize(h.vertices);
  std::vector<double> values(h.properties.size());
  std::string line;
  for (std::size_t v = 0; v < h.vertices; ++v) {
    if (!std::getline(in, line)) fail(ErrorCode::ParseError, path.string() + ": truncated vertex list");
    std::istringstream ls(line);
    for (auto& value : values)
      if (!(ls >> value)) fail(ErrorCode::ParseError, path.string() + ": bad vertex line " + std::to_string(v));
    const auto r = static_cast<Eigen::Index>(v);
    scene.points(r, 0) = values[cx];
    scene.points(r, 1) = values[cy];
    scene.points(r, 2) = values[cz];
    // Integer color channels are 0..255; float channels are already 0..1.
    auto color = [&](std::size_t c) { return h.is_float[c] ? values[c] : values[c] / 255.0; };
    scene.points(r, 3) = color(cr);
    scene.points(r, 4) = color(cg);
    scene.points(r, 5) = color(cb);
    scene.labels[v] = static_cast<int>(values[cl]);
  }
  return scene;
}

std::vector<std::string> read_ply_label_names(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  return read_header(in, path).label_names;
}

}  // namespace mantra
