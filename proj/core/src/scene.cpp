#include "mantra/scene.hpp"

#include "mantra/errors.hpp"

namespace mantra {

void Scene::validate(std::size_t label_count) const {
  if (points.rows() < 1) fail(ErrorCode::EmptyScene, "scene '" + scene_id + "' has no points");
  if (points.cols() != 6) fail(ErrorCode::DimensionMismatch, "scene points must have 6 columns");
  if (labels.size() != size()) fail(ErrorCode::DimensionMismatch, "label count differs from point count");
  if (!points.leftCols(3).allFinite()) fail(ErrorCode::ConfigInvalid, "non-finite coordinates");
  if ((points.rightCols(3).array() < 0.0).any() || (points.rightCols(3).array() > 1.0).any())
    fail(ErrorCode::ConfigInvalid, "colors outside [0, 1]");
  for (int l : labels) {
    if (l < -1 || (label_count > 0 && l >= static_cast<int>(label_count)))
      fail(ErrorCode::IdOutOfRange, "label id " + std::to_string(l) + " in scene '" + scene_id + "'");
  }
}

Scene select_points(const Scene& scene, const std::vector<std::size_t>& indices) {
  Scene out;
  out.source_id = scene.source_id;
  out.scene_id = scene.scene_id;
  out.points.resize(static_cast<Eigen::Index>(indices.size()), scene.points.cols());
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.points.row(static_cast<Eigen::Index>(i)) = scene.points.row(static_cast<Eigen::Index>(indices[i]));
    out.labels.push_back(scene.labels[indices[i]]);
  }
  return out;
}

}  // namespace mantra
