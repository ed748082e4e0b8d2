#pragma once

#include "mantra/backbone.hpp"
#include "mantra/tensor.hpp"

namespace mantra {

/// Added to the variance half of the descriptor before it reaches the MLP.
inline constexpr double kVarianceFloor = 1e-8;

struct SceneDescriptor {
  RowVector mean;
  RowVector variance;  // population variance

  /// [mean, variance + floor] as a 1 x 2d row.
  Matrix packed() const;
};

struct PlnConfig {
  int prompt_length = 8;
  int hidden = 128;
};

/// Two-layer MLP 2d -> hidden -> K * token_dim. With K == 0 the network is
/// empty and no prompt is produced.
struct PlnParams {
  Dense hidden;
  Dense out;
  int prompt_length = 0;
  int token_dim = 0;

  bool active() const { return prompt_length > 0; }

  static PlnParams init(const PlnConfig& config, int feature_dim, int token_dim, Rng& rng);
  PlnParams zeros_like() const;

  void visit(const std::string& prefix, const TensorVisitor& fn);
  void visit(const std::string& prefix, const ConstTensorVisitor& fn) const;
};

struct PromptTokens {
  Matrix tokens;  // K x token_dim
};

/// Column means and population variances. The result is a constant in the
/// computation graph: nothing flows back from it into the features.
SceneDescriptor summarize(const PointFeatures& features);

/// Gradient that *would* reach the features if the descriptor were not
/// detached. Only used to show the stop-gradient matters.
Matrix summarize_backward(const PointFeatures& features, const SceneDescriptor& desc, const Matrix& d_packed);

struct PlnTrace {
  Matrix input;       // packed descriptor
  Matrix hidden_pre;
};

PromptTokens generate_prompt(const SceneDescriptor& desc, const PlnParams& params, PlnTrace* trace = nullptr);

/// Accumulates into `grad`; returns d(loss)/d(packed descriptor).
Matrix pln_backward(const PlnTrace& trace, const PlnParams& params, const Matrix& d_tokens, PlnParams& grad);

}  // namespace mantra
