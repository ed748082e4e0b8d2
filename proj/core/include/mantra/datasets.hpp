#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mantra/label_space.hpp"
#include "mantra/scene.hpp"

namespace mantra {

/// Object kinds the synthetic generator knows how to build.
enum class Archetype { Floor, Wall, Chair, Table, Sofa, Bookcase, Board };

std::string_view to_string(Archetype a);
Archetype archetype_from_string(std::string_view text);

/// One synthetic data source. `names` maps each generated archetype to the
/// label this source uses for it; archetypes absent from `names` are not
/// generated. Several archetypes may share a (coarse) name.
struct SourceConfig {
  std::string source_id;
  std::vector<std::pair<Archetype, std::string>> names;
  int rooms = 8;
  int points_per_room = 2048;
  double noise_sigma = 0.0;   // meters
  double dropout_rate = 0.0;  // fraction of the azimuth removed as an occluded sector
  double density_scale = 1.0;
  double color_jitter = 0.0;
  std::uint64_t seed = 0;
  int val_rooms = 0;
  int test_rooms = 0;

  /// Distinct names in first-appearance order.
  LabelSet label_set() const;
  void validate() const;

  std::string to_json() const;
  static SourceConfig from_json(std::string_view text);
};

/// "synth-clean" (no noise or dropout), "synth-noisy-a" (sigma 1 cm, 10 %
/// dropout, synonym names), "synth-noisy-b" (sigma 5 mm, 5 % dropout, coarse
/// "furniture" label).
SourceConfig preset_source(std::string_view preset, std::uint64_t seed = 0);
std::vector<SourceConfig> default_sources(std::uint64_t seed = 0);

/// Deterministic given the config. Scene labels are local ids of the
/// source's label set.
std::vector<Scene> generate_source(const SourceConfig& config);

/// ASCII PLY with vertex properties x y z red green blue label source.
/// `label_names`, when given, is recorded as a header comment.
void write_ply(const Scene& scene, const std::filesystem::path& path,
               const std::vector<std::string>& label_names = {});
Scene read_ply(const std::filesystem::path& path);
/// Label names recorded in a PLY header comment, if any.
std::vector<std::string> read_ply_label_names(const std::filesystem::path& path);

enum class Split { Train, Val, Test };
std::string_view to_string(Split s);
Split split_from_string(std::string_view text);

struct ManifestEntry {
  std::string scene_id;
  std::string source_id;
  std::filesystem::path path;  // relative paths resolve against the manifest
  Split split = Split::Train;
};

struct SceneManifest {
  std::vector<ManifestEntry> entries;
  UnifiedVocabulary vocabulary;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const ManifestEntry& e) const;
  std::vector<std::string> source_ids() const;
};

/// JSON: {"sources":[{"id","labels"}], "scenes":[{"scene_id","source_id","path","split"}]}
SceneManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const SceneManifest& manifest, const std::filesystem::path& path);

/// {"sources":[...]} where each entry is a source config, optionally
/// starting from a "preset".
std::vector<SourceConfig> dataset_config_from_json(std::string_view text);

/// Generates every source into dir/<source>/<scene>.ply and writes
/// dir/manifest.json. Of each source's rooms, the last val_rooms + test_rooms
/// go to the val and test splits (in that order).
SceneManifest write_dataset(const std::vector<SourceConfig>& sources, const std::filesystem::path& dir);

/// Rewrites local label ids to global ids of `vocab`.
Scene to_global(Scene scene, const UnifiedVocabulary& vocab);

/// Reads every scene of a split (all splits when `split` is empty), with
/// global label ids.
std::vector<Scene> load_scenes(const SceneManifest& manifest, const std::vector<Split>& splits);

}  // namespace mantra
