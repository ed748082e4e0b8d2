#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mantra/datasets.hpp"
#include "mantra/errors.hpp"

namespace mantra {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split split_from_string(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  fail(ErrorCode::ParseError, "unknown split '" + std::string(text) + "'");
}

std::filesystem::path SceneManifest::resolve(const ManifestEntry& e) const {
  return e.path.is_absolute() ? e.path : base_dir / e.path;
}

std::vector<std::string> SceneManifest::source_ids() const {
  std::vector<std::string> ids;
  for (const auto& e : entries)
    if (std::find(ids.begin(), ids.end(), e.source_id) == ids.end()) ids.push_back(e.source_id);
  return ids;
}

SceneManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, path.string() + ": " + e.what());
  }

  SceneManifest m;
  m.base_dir = path.parent_path();
  m.vocabulary = UnifiedVocabulary::from_json(ss.str());
  if (!j.contains("scenes") || !j["scenes"].is_array() || j["scenes"].empty())
    fail(ErrorCode::EmptyManifest, path.string() + " lists no scenes");

  std::set<std::string> seen;
  try {
    for (const auto& s : j["scenes"]) {
      ManifestEntry e;
      e.scene_id = s.at("scene_id").get<std::string>();
      e.source_id = s.at("source_id").get<std::string>();
      e.path = s.at("path").get<std::string>();
      e.split = split_from_string(s.value("split", std::string("train")));
      if (!seen.insert(e.scene_id).second) fail(ErrorCode::DuplicateScene, "scene '" + e.scene_id + "' listed twice");
      if (!m.vocabulary.has_source(e.source_id))
        fail(ErrorCode::UnknownSource, "scene '" + e.scene_id + "' uses unknown source '" + e.source_id + "'");
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  for (const auto& e : m.entries)
    if (!std::filesystem::exists(m.resolve(e)))
      fail(ErrorCode::IoError, "scene file " + m.resolve(e).string() + " does not exist");
  return m;
}

void save_manifest(const SceneManifest& manifest, const std::filesystem::path& path) {
  nlohmann::json j = nlohmann::json::parse(manifest.vocabulary.to_json());
  j["scenes"] = nlohmann::json::array();
  for (const auto& e : manifest.entries)
    j["scenes"].push_back({{"scene_id", e.scene_id},
                           {"source_id", e.source_id},
                           {"path", e.path.generic_string()},
                           {"split", std::string(to_string(e.split))}});
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<SourceConfig> dataset_config_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("dataset config: ") + e.what());
  }
  const nlohmann::json& list = j.is_array() ? j : j.value("sources", nlohmann::json::array());
  if (!list.is_array() || list.empty()) fail(ErrorCode::ConfigInvalid, "dataset config lists no sources");
  std::vector<SourceConfig> out;
  for (const auto& s : list) out.push_back(SourceConfig::from_json(s.dump()));
  return out;
}

SceneManifest write_dataset(const std::vector<SourceConfig>& sources, const std::filesystem::path& dir) {
  std::vector<LabelSet> sets;
  for (const auto& s : sources) sets.push_back(s.label_set());
  SceneManifest m;
  m.vocabulary = build_union(sets);
  m.base_dir = dir;
  std::filesystem::create_directories(dir);
  for (const auto& s : sources) {
    const auto scenes = generate_source(s);
    const LabelSet set = s.label_set();
    std::vector<std::string> names;
    for (const auto& l : set.labels) names.push_back(l.text());
    std::filesystem::create_directories(dir / s.source_id);
    const int n = static_cast<int>(scenes.size());
    for (int i = 0; i < n; ++i) {
      ManifestEntry e;
      e.scene_id = scenes[static_cast<std::size_t>(i)].scene_id;
      e.source_id = s.source_id;
      e.path = std::filesystem::path(s.source_id) / (e.scene_id + ".ply");
      e.split = i >= n - s.test_rooms                  ? Split::Test
                : i >= n - s.test_rooms - s.val_rooms ? Split::Val
                                                      : Split::Train;
      write_ply(scenes[static_cast<std::size_t>(i)], m.resolve(e), names);
      m.entries.push_back(std::move(e));
    }
  }
  save_manifest(m, dir / "manifest.json");
  return m;
}

Scene to_global(Scene scene, const UnifiedVocabulary& vocab) {
  const auto& map = vocab.source_map(scene.source_id);
  for (int& l : scene.labels) {
    if (l < 0) continue;
    if (l >= static_cast<int>(map.size()))
      fail(ErrorCode::LocalIdOutOfRange, "label " + std::to_string(l) + " in scene '" + scene.scene_id + "'");
    l = map[static_cast<std::size_t>(l)];
  }
  return scene;
}

std::vector<Scene> load_scenes(const SceneManifest& manifest, const std::vector<Split>& splits) {
  std::vector<Scene> out;
  for (const auto& e : manifest.entries) {
    if (!splits.empty() && std::find(splits.begin(), splits.end(), e.split) == splits.end()) continue;
    Scene s = read_ply(manifest.resolve(e));
    s.scene_id = e.scene_id;
    s.source_id = e.source_id;
    out.push_back(to_global(std::move(s), manifest.vocabulary));
  }
  return out;
}

}  // namespace mantra
