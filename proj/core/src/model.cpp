#include "mantra/model.hpp"

#include "mantra/errors.hpp"

namespace mantra {

Model Model::init(const ModelConfig& config, int token_dim, Rng& rng) {
  Model m;
  m.backbone = BackboneParams::init(config.backbone, rng);
  m.projection = ProjectionParams::init(config.backbone.feature_dim, config.anchor_dim, rng);
  m.pln = PlnParams::init(config.pln, config.backbone.feature_dim, token_dim, rng);
  return m;
}

Model Model::zeros_like() const {
  return Model{backbone.zeros_like(), projection.zeros_like(), pln.zeros_like()};
}

void Model::visit(const TensorVisitor& fn) {
  backbone.visit("backbone.", fn);
  projection.visit("projection.", fn);
  pln.visit("pln.", fn);
}

void Model::visit(const ConstTensorVisitor& fn) const {
  backbone.visit("backbone.", fn);
  projection.visit("projection.", fn);
  pln.visit("pln.", fn);
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  visit(ConstTensorVisitor([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); }));
  return n;
}

PreparedScene prepare_scene(const Scene& scene, int neighbors) {
  if (scene.points.rows() < 1) fail(ErrorCode::EmptyScene, "scene '" + scene.scene_id + "' has no points");
  PreparedScene p;
  p.normalized = normalize_points(scene.points);
  p.neighbors = nearest_neighbors(p.normalized, neighbors);
  p.labels = scene.labels;
  p.source_id = scene.source_id;
  p.scene_id = scene.scene_id;
  return p;
}

double scene_loss(const Model& model, const TextEncoder& encoder, const PreparedScene& scene,
                  const std::vector<TokenSequence>& anchor_tokens, const LabelMask& mask, double temperature,
                  Model* grad, double grad_scale, const LossOptions& options) {
  BackboneTrace btrace;
  const PointFeatures features = extract_features(scene.normalized, scene.neighbors, model.backbone, &btrace);
  const PointEmbeddings embeddings = project(features, model.projection);

  PlnTrace ptrace;
  SceneDescriptor descriptor;
  PromptTokens prompt{Matrix(0, encoder.token_dim())};
  if (model.pln.active()) {
    descriptor = options.descriptor_override ? *options.descriptor_override : summarize(features);
    prompt = generate_prompt(descriptor, model.pln, &ptrace);
  }
  const Matrix anchors = encoder.encode_tokens(anchor_tokens, &prompt.tokens);
  const SimilarityMatrix sim = similarity(embeddings.values, anchors, temperature);

  Matrix d_sim;
  const double loss = ce_loss(sim, scene.labels, mask, grad ? &d_sim : nullptr);
  if (!grad) return loss;

  d_sim *= grad_scale;
  const SimilarityGradient sg = similarity_backward(embeddings.values, anchors, d_sim);
  Matrix d_features = project_backward(features, model.projection, sg.d_points, grad->projection);

  if (model.pln.active()) {
    const Matrix d_prompt = encoder.prompt_gradient(anchor_tokens, prompt.tokens.rows(), sg.d_anchors);
    const Matrix d_packed = pln_backward(ptrace, model.pln, d_prompt, grad->pln);
    if (!options.stop_gradient) d_features += summarize_backward(features, descriptor, d_packed);
  }
  backbone_backward(btrace, model.backbone, d_features, grad->backbone);
  return loss;
}

PromptTokens scene_prompt(const Model& model, const PreparedScene& scene) {
  if (!model.pln.active()) return PromptTokens{Matrix(0, model.pln.token_dim)};
  const PointFeatures features = extract_features(scene.normalized, scene.neighbors, model.backbone);
  return generate_prompt(summarize(features), model.pln);
}

Segmentation segment(const Model& model, const TextEncoder& encoder, const Scene& scene,
                     const std::vector<LabelName>& labels, double temperature) {
  if (labels.empty()) fail(ErrorCode::EmptyLabelSet, "query needs at least one label");
  const PreparedScene prepared = prepare_scene(scene, model.backbone.neighbors);
  const PointFeatures features = extract_features(prepared.normalized, prepared.neighbors, model.backbone);
  const PointEmbeddings embeddings = project(features, model.projection);

  Segmentation out;
  if (model.pln.active()) {
    const PromptTokens prompt = generate_prompt(summarize(features), model.pln);
    out.anchors = encoder.encode(labels, &prompt.tokens);
  } else {
    out.anchors = encoder.encode(labels);
  }
  out.similarity = similarity(embeddings.values, out.anchors.vectors, temperature);
  out.assignments = predict(out.similarity, LabelMask::all(labels.size()));
  return out;
}

Segmentation segment_with_anchors(const Model& model, const Scene& scene, const AnchorMatrix& anchors,
                                  double temperature) {
  if (anchors.size() == 0) fail(ErrorCode::EmptyLabelSet, "no anchors");
  const PreparedScene prepared = prepare_scene(scene, model.backbone.neighbors);
  const PointFeatures features = extract_features(prepared.normalized, prepared.neighbors, model.backbone);
  const PointEmbeddings embeddings = project(features, model.projection);
  Segmentation out;
  out.anchors = anchors;
  out.similarity = similarity(embeddings.values, anchors.vectors, temperature);
  out.assignments = predict(out.similarity, LabelMask::all(anchors.size()));
  return out;
}

}  // namespace mantra
