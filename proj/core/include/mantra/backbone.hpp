#pragma once

#include "mantra/scene.hpp"
#include "mantra/tensor.hpp"

namespace mantra {

struct BackboneConfig {
  int hidden = 64;
  int feature_dim = 64;
  int neighbors = 16;
};

/// Per-point MLP (6 -> hidden -> d), k-NN mean aggregation, fuse MLP (2d -> d).
struct BackboneParams {
  Dense input;   // 6 x hidden
  Dense hidden;  // hidden x d
  Dense fuse;    // 2d x d
  int neighbors = 16;

  int feature_dim() const { return static_cast<int>(hidden.out_dim()); }

  static BackboneParams init(const BackboneConfig& config, Rng& rng);
  /// Same shapes, all zeros. Used as a gradient accumulator.
  BackboneParams zeros_like() const;

  void visit(const std::string& prefix, const TensorVisitor& fn);
  void visit(const std::string& prefix, const ConstTensorVisitor& fn) const;
};

struct ProjectionParams {
  Dense linear;  // d x D

  static ProjectionParams init(int feature_dim, int anchor_dim, Rng& rng);
  ProjectionParams zeros_like() const;

  void visit(const std::string& prefix, const TensorVisitor& fn);
  void visit(const std::string& prefix, const ConstTensorVisitor& fn) const;
};

struct PointFeatures {
  Matrix values;  // N x d
};

struct PointEmbeddings {
  Matrix values;  // N x D
};

/// Per-point neighbor ids, N x k (k may be 0 only when N == 1, in which case
/// the point is its own neighbor).
using NeighborTable = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// xyz centered on the centroid and divided by the largest absolute
/// coordinate; rgb untouched.
Matrix normalize_points(const Matrix& points);

/// Brute-force Euclidean k nearest neighbors on the first three columns,
/// excluding the point itself; k is clamped to N - 1. Ties go to the lower id.
NeighborTable nearest_neighbors(const Matrix& xyz, int k);

/// Intermediate activations kept for the backward pass.
struct BackboneTrace {
  Matrix input;        // normalized N x 6
  Matrix input_pre;    // N x hidden
  Matrix hidden_pre;   // N x d
  Matrix local;        // relu(hidden_pre)
  Matrix fused_in;     // N x 2d  [local, neighbor mean]
  Matrix fuse_pre;     // N x d
  NeighborTable neighbors;
};

PointFeatures extract_features(const Scene& scene, const BackboneParams& params, BackboneTrace* trace = nullptr);

/// Same as above with precomputed normalized input and neighbors.
PointFeatures extract_features(const Matrix& normalized, const NeighborTable& neighbors,
                               const BackboneParams& params, BackboneTrace* trace = nullptr);

void backbone_backward(const BackboneTrace& trace, const BackboneParams& params, const Matrix& d_features,
                       BackboneParams& grad);

PointEmbeddings project(const PointFeatures& features, const ProjectionParams& params);

/// Accumulates into `grad`; returns d(loss)/d(features).
Matrix project_backward(const PointFeatures& features, const ProjectionParams& params, const Matrix& d_embeddings,
                        ProjectionParams& grad);

}  // namespace mantra
