#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mantra/tensor.hpp"

namespace mantra {

/// One point cloud: N x 6 rows of (x, y, z, r, g, b), xyz in meters, rgb in
/// [0, 1]. `labels` holds one id per point, -1 for unlabeled. Whether the ids
/// are source-local or global depends on where the scene came from; scenes
/// handed to the model carry global ids.
struct Scene {
  Matrix points;
  std::vector<int> labels;
  std::string source_id;
  std::string scene_id;

  std::size_t size() const noexcept { return static_cast<std::size_t>(points.rows()); }

  /// Throws on broken invariants. `label_count` bounds label ids when > 0.
  void validate(std::size_t label_count = 0) const;
};

/// Rows `indices` of `scene`, in that order.
Scene select_points(const Scene& scene, const std::vector<std::size_t>& indices);

}  // namespace mantra
