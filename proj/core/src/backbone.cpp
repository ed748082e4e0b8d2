#include "mantra/backbone.hpp"

#include <algorithm>
#include <utility>

#include "mantra/errors.hpp"

namespace mantra {

BackboneParams BackboneParams::init(const BackboneConfig& config, Rng& rng) {
  if (config.hidden <= 0 || config.feature_dim <= 0 || config.neighbors < 0)
    fail(ErrorCode::ConfigInvalid, "backbone dims must be positive");
  BackboneParams p;
  p.input = Dense::fan_in(6, config.hidden, rng);
  p.hidden = Dense::fan_in(config.hidden, config.feature_dim, rng);
  p.fuse = Dense::fan_in(2 * config.feature_dim, config.feature_dim, rng);
  p.neighbors = config.neighbors;
  return p;
}

BackboneParams BackboneParams::zeros_like() const {
  BackboneParams z;
  z.input = Dense(input.in_dim(), input.out_dim());
  z.hidden = Dense(hidden.in_dim(), hidden.out_dim());
  z.fuse = Dense(fuse.in_dim(), fuse.out_dim());
  z.neighbors = neighbors;
  return z;
}

void BackboneParams::visit(const std::string& prefix, const TensorVisitor& fn) {
  fn(prefix + "input.weight", input.weight);
  fn(prefix + "input.bias", input.bias);
  fn(prefix + "hidden.weight", hidden.weight);
  fn(prefix + "hidden.bias", hidden.bias);
  fn(prefix + "fuse.weight", fuse.weight);
  fn(prefix + "fuse.bias", fuse.bias);
}

void BackboneParams::visit(const std::string& prefix, const ConstTensorVisitor& fn) const {
  const_cast<BackboneParams*>(this)->visit(prefix, TensorVisitor([&](const std::string& n, Matrix& m) { fn(n, m); }));
}

ProjectionParams ProjectionParams::init(int feature_dim, int anchor_dim, Rng& rng) {
  if (feature_dim <= 0 || anchor_dim <= 0) fail(ErrorCode::ConfigInvalid, "projection dims must be positive");
  return ProjectionParams{Dense::fan_in(feature_dim, anchor_dim, rng)};
}

ProjectionParams ProjectionParams::zeros_like() const {
  return ProjectionParams{Dense(linear.in_dim(), linear.out_dim())};
}

void ProjectionParams::visit(const std::string& prefix, const TensorVisitor& fn) {
  fn(prefix + "weight", linear.weight);
  fn(prefix + "bias", linear.bias);
}

void ProjectionParams::visit(const std::string& prefix, const ConstTensorVisitor& fn) const {
  const_cast<ProjectionParams*>(this)->visit(prefix,
                                             TensorVisitor([&](const std::string& n, Matrix& m) { fn(n, m); }));
}

Matrix normalize_points(const Matrix& points) {
  if (points.cols() != 6) fail(ErrorCode::DimensionMismatch, "points must be N x 6");
  Matrix out = points;
  if (points.rows() == 0) return out;
  const RowVector centroid = points.leftCols(3).colwise().mean();
  out.leftCols(3).rowwise() -= centroid;
  const double extent = out.leftCols(3).cwiseAbs().maxCoeff();
  if (extent > 0.0) out.leftCols(3) /= extent;
  return out;
}

NeighborTable nearest_neighbors(const Matrix& xyz, int k) {
  const Eigen::Index n = xyz.rows();
  const int kk = static_cast<int>(std::min<Eigen::Index>(std::max(k, 0), std::max<Eigen::Index>(n - 1, 0)));
  if (n == 1 || kk == 0) {
    NeighborTable self(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) self(i, 0) = static_cast<int>(i);
    return self;
  }
  NeighborTable table(n, kk);
  std::vector<std::pair<double, int>> dist(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      dist[m++] = {(xyz.row(j).head<3>() - xyz.row(i).head<3>()).squaredNorm(), static_cast<int>(j)};
    }
    std::nth_element(dist.begin(), dist.begin() + (kk - 1), dist.end());
    std::sort(dist.begin(), dist.begin() + kk);
    for (int c = 0; c < kk; ++c) table(i, c) = dist[static_cast<std::size_t>(c)].second;
  }
  return table;
}

namespace {

Matrix neighbor_mean(const Matrix& local, const NeighborTable& neighbors) {
  Matrix out = Matrix::Zero(local.rows(), local.cols());
  const double inv = 1.0 / static_cast<double>(neighbors.cols());
  for (Eigen::Index i = 0; i < local.rows(); ++i) {
    for (Eigen::Index c = 0; c < neighbors.cols(); ++c) out.row(i) += local.row(neighbors(i, c));
    out.row(i) *= inv;
  }
  return out;
}

}  // namespace

PointFeatures extract_features(const Matrix& normalized, const NeighborTable& neighbors,
                               const BackboneParams& params, BackboneTrace* trace) {
  if (normalized.rows() < 1) fail(ErrorCode::EmptyScene, "cannot extract features from an empty scene");
  if (normalized.cols() != params.input.in_dim() || neighbors.rows() != normalized.rows())
    fail(ErrorCode::DimensionMismatch, "backbone input shape mismatch");
  const Eigen::Index d = params.hidden.out_dim();

  Matrix input_pre = params.input.forward(normalized);
  Matrix hidden_pre = params.hidden.forward(relu(input_pre));
  Matrix local = relu(hidden_pre);
  Matrix fused_in(local.rows(), 2 * d);
  fused_in.leftCols(d) = local;
  fused_in.rightCols(d) = neighbor_mean(local, neighbors);
  Matrix fuse_pre = params.fuse.forward(fused_in);
  PointFeatures out{relu(fuse_pre)};

  if (trace) {
    trace->input = normalized;
    trace->input_pre = std::move(input_pre);
    trace->hidden_pre = std::move(hidden_pre);
    trace->local = std::move(local);
    trace->fused_in = std::move(fused_in);
    trace->fuse_pre = std::move(fuse_pre);
    trace->neighbors = neighbors;
  }
  return out;
}

PointFeatures extract_features(const Scene& scene, const BackboneParams& params, BackboneTrace* trace) {
  if (scene.points.rows() < 1) fail(ErrorCode::EmptyScene, "scene '" + scene.scene_id + "' has no points");
  Matrix normalized = normalize_points(scene.points);
  NeighborTable neighbors = nearest_neighbors(normalized, params.neighbors);
  return extract_features(normalized, neighbors, params, trace);
}

void backbone_backward(const BackboneTrace& trace, const BackboneParams& params, const Matrix& d_features,
                       BackboneParams& grad) {
  const Eigen::Index d = params.hidden.out_dim();
  Matrix d_fuse_pre = relu_backward(trace.fuse_pre, d_features);
  Matrix d_fused_in = params.fuse.backward(trace.fused_in, d_fuse_pre, grad.fuse);

  Matrix d_local = d_fused_in.leftCols(d);
  const double inv = 1.0 / static_cast<double>(trace.neighbors.cols());
  for (Eigen::Index i = 0; i < d_local.rows(); ++i)
    for (Eigen::Index c = 0; c < trace.neighbors.cols(); ++c)
      d_local.row(trace.neighbors(i, c)) += inv * d_fused_in.row(i).tail(d);

  Matrix d_hidden_pre = relu_backward(trace.hidden_pre, d_local);
  Matrix d_input_act = params.hidden.backward(relu(trace.input_pre), d_hidden_pre, grad.hidden);
  Matrix d_input_pre = relu_backward(trace.input_pre, d_input_act);
  params.input.backward(trace.input, d_input_pre, grad.input);
}

PointEmbeddings project(const PointFeatures& features, const ProjectionParams& params) {
  if (features.values.cols() != params.linear.in_dim())
    fail(ErrorCode::DimensionMismatch, "feature dim " + std::to_string(features.values.cols()) +
                                           " != projector input " + std::to_string(params.linear.in_dim()));
  return PointEmbeddings{params.linear.forward(features.values)};
}

Matrix project_backward(const PointFeatures& features, const ProjectionParams& params, const Matrix& d_embeddings,
                        ProjectionParams& grad) {
  return params.linear.backward(features.values, d_embeddings, grad.linear);
}

}  // namespace mantra
