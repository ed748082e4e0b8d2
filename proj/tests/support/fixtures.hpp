#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mantra/datasets.hpp"
#include "mantra/training.hpp"

namespace mantra::testing {

/// Random scene with `n` points and labels drawn from `local_ids`.
inline Scene random_scene(std::size_t n, const std::vector<int>& local_ids, Rng& rng, std::string source = "s") {
  Scene s;
  s.points.resize(static_cast<Eigen::Index>(n), 6);
  for (Eigen::Index i = 0; i < s.points.rows(); ++i) {
    for (int c = 0; c < 3; ++c) s.points(i, c) = rng.uniform(-2.0, 2.0);
    for (int c = 3; c < 6; ++c) s.points(i, c) = rng.uniform();
    s.labels.push_back(local_ids[rng.index(local_ids.size())]);
  }
  s.source_id = std::move(source);
  s.scene_id = s.source_id + "-rand";
  return s;
}

/// Small model dimensions: fast enough for exhaustive finite differences.
inline TrainConfig tiny_config(int prompt_length = 2) {
  TrainConfig c;
  c.model.backbone = {8, 6, 3};
  c.model.anchor_dim = 5;
  c.model.pln = {prompt_length, 6};
  c.model.encoder = {EncoderKind::Random, 3, 4, 5, 16};
  c.points_per_scene = 0;
  return c;
}

/// Generated source with global label ids in `vocab`.
inline std::vector<Scene> generated(const SourceConfig& cfg, const UnifiedVocabulary& vocab) {
  std::vector<Scene> out;
  for (auto& s : generate_source(cfg)) out.push_back(to_global(std::move(s), vocab));
  return out;
}

}  // namespace mantra::testing
