#pragma once

#include <span>
#include <string>
#include <vector>

#include "mantra/alignment.hpp"
#include "mantra/backbone.hpp"
#include "mantra/pln.hpp"
#include "mantra/scene.hpp"
#include "mantra/text_encoder.hpp"

namespace mantra {

struct ModelConfig {
  BackboneConfig backbone;
  int anchor_dim = 128;
  PlnConfig pln;
  EncoderSpec encoder;
  double temperature = kDefaultTemperature;
};

/// Trainable parameters. The text encoder is held separately and never
/// updated.
struct Model {
  BackboneParams backbone;
  ProjectionParams projection;
  PlnParams pln;

  static Model init(const ModelConfig& config, int token_dim, Rng& rng);
  Model zeros_like() const;

  void visit(const TensorVisitor& fn);
  void visit(const ConstTensorVisitor& fn) const;
  std::size_t parameter_count() const;
};

/// Normalized coordinates and neighbor table are independent of the
/// parameters, so they are computed once per (subsampled) scene.
struct PreparedScene {
  Matrix normalized;
  NeighborTable neighbors;
  std::vector<int> labels;
  std::string source_id;
  std::string scene_id;
};

PreparedScene prepare_scene(const Scene& scene, int neighbors);

struct LossOptions {
  /// When false the descriptor is differentiated through (ablation only).
  bool stop_gradient = true;
  /// Replaces the live descriptor with a caller-provided copy.
  const SceneDescriptor* descriptor_override = nullptr;
};

/// Alignment loss of one scene. `labels` are ids into `anchor_tokens`,
/// `mask` restricts the softmax to the scene's source label set. Gradients
/// are accumulated into `grad` (scaled by `grad_scale`) when it is non-null.
double scene_loss(const Model& model, const TextEncoder& encoder, const PreparedScene& scene,
                  const std::vector<TokenSequence>& anchor_tokens, const LabelMask& mask, double temperature,
                  Model* grad = nullptr, double grad_scale = 1.0, const LossOptions& options = {});

/// Prompt tokens the model produces for a scene (K x token_dim, K may be 0).
PromptTokens scene_prompt(const Model& model, const PreparedScene& scene);

struct Segmentation {
  std::vector<int> assignments;
  AnchorMatrix anchors;
  SimilarityMatrix similarity;
};

/// Open-vocabulary inference: every point goes to its most similar label.
Segmentation segment(const Model& model, const TextEncoder& encoder, const Scene& scene,
                     const std::vector<LabelName>& labels, double temperature = kDefaultTemperature);

/// Inference against imported anchors; the prompt network is bypassed.
Segmentation segment_with_anchors(const Model& model, const Scene& scene, const AnchorMatrix& anchors,
                                  double temperature = kDefaultTemperature);

}  // namespace mantra
