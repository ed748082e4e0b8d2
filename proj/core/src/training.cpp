#include "mantra/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <json.hpp>

#include "mantra/errors.hpp"

namespace mantra {
namespace {

std::vector<Matrix*> tensors_of(Model& m) {
  std::vector<Matrix*> out;
  m.visit(TensorVisitor([&](const std::string&, Matrix& t) { out.push_back(&t); }));
  return out;
}

std::vector<const Matrix*> tensors_of(const Model& m) {
  std::vector<const Matrix*> out;
  m.visit(ConstTensorVisitor([&](const std::string&, const Matrix& t) { out.push_back(&t); }));
  return out;
}

Scene subsample(const Scene& scene, int cap, Rng& rng) {
  const std::size_t n = scene.size();
  if (cap <= 0 || n <= static_cast<std::size_t>(cap)) return scene;
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < static_cast<std::size_t>(cap); ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
  idx.resize(static_cast<std::size_t>(cap));
  std::sort(idx.begin(), idx.end());
  return select_points(scene, idx);
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

}  // namespace

void TrainConfig::validate() const {
  auto bad = [](const std::string& why) { fail(ErrorCode::ConfigInvalid, why); };
  if (!(lr > 0.0)) bad("lr must be positive");
  if (epochs < 0) bad("epochs must be >= 0");
  for (std::size_t i = 0; i < milestones.size(); ++i) {
    if (milestones[i] <= 0) bad("milestones must be positive");
    if (i > 0 && milestones[i] <= milestones[i - 1]) bad("milestones must be strictly ascending");
  }
  if (!(decay > 0.0)) bad("decay must be positive");
  if (per_source_batch < 1) bad("per_source_batch must be >= 1");
  if (!(model.temperature > 0.0)) bad("temperature must be positive");
  if (weight_decay < 0.0) bad("weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) bad("betas must be in [0, 1)");
  if (model.pln.prompt_length < 0) bad("prompt_length must be >= 0");
  if (model.anchor_dim != model.encoder.anchor_dim) bad("anchor_dim differs from encoder anchor_dim");
}

std::string TrainConfig::to_json() const {
  nlohmann::json j;
  j["lr"] = lr;
  j["milestones"] = milestones;
  j["decay"] = decay;
  j["epochs"] = epochs;
  j["per_source_batch"] = per_source_batch;
  j["points_per_scene"] = points_per_scene;
  j["weight_decay"] = weight_decay;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["eps"] = eps;
  j["seed"] = seed;
  j["temperature"] = model.temperature;
  j["prompt_length"] = model.pln.prompt_length;
  j["pln_hidden"] = model.pln.hidden;
  j["hidden"] = model.backbone.hidden;
  j["feature_dim"] = model.backbone.feature_dim;
  j["neighbors"] = model.backbone.neighbors;
  j["anchor_dim"] = model.anchor_dim;
  j["encoder"] = {{"kind", to_string(model.encoder.kind)},
                  {"seed", model.encoder.seed},
                  {"token_dim", model.encoder.token_dim},
                  {"buckets", model.encoder.buckets}};
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(std::string_view text) {
  TrainConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) fail(ErrorCode::ParseError, "train config must be a JSON object");
    c.lr = j.value("lr", c.lr);
    c.milestones = j.value("milestones", c.milestones);
    c.decay = j.value("decay", c.decay);
    c.epochs = j.value("epochs", c.epochs);
    c.per_source_batch = j.value("per_source_batch", c.per_source_batch);
    c.points_per_scene = j.value("points_per_scene", c.points_per_scene);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.seed = j.value("seed", c.seed);
    c.model.temperature = j.value("temperature", c.model.temperature);
    c.model.pln.prompt_length = j.value("prompt_length", c.model.pln.prompt_length);
    c.model.pln.hidden = j.value("pln_hidden", c.model.pln.hidden);
    c.model.backbone.hidden = j.value("hidden", c.model.backbone.hidden);
    c.model.backbone.feature_dim = j.value("feature_dim", c.model.backbone.feature_dim);
    c.model.backbone.neighbors = j.value("neighbors", c.model.backbone.neighbors);
    c.model.anchor_dim = j.value("anchor_dim", c.model.anchor_dim);
    c.model.encoder.anchor_dim = c.model.anchor_dim;
    if (j.contains("encoder")) {
      const auto& e = j["encoder"];
      c.model.encoder.kind = encoder_kind_from_string(e.value("kind", std::string("random")));
      c.model.encoder.seed = e.value("seed", c.model.encoder.seed);
      c.model.encoder.token_dim = e.value("token_dim", c.model.encoder.token_dim);
      c.model.encoder.buckets = e.value("buckets", c.model.encoder.buckets);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

double lr_at_epoch(const TrainConfig& config, int epoch) {
  double lr = config.lr;
  for (int m : config.milestones)
    if (epoch >= m) lr *= config.decay;
  return lr;
}

AdamW::AdamW(const Model& shape, double beta1, double beta2, double eps, double weight_decay)
    : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay), m_(shape.zeros_like()),
      v_(shape.zeros_like()) {}

void AdamW::step(Model& params, const Model& grad, double lr) {
  ++steps_;
  auto p = tensors_of(params);
  auto g = tensors_of(grad);
  auto m = tensors_of(m_);
  auto v = tensors_of(v_);
  if (p.size() != g.size() || p.size() != m.size()) fail(ErrorCode::DimensionMismatch, "optimizer state shape");
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t i = 0; i < p.size(); ++i) {
    *m[i] = beta1_ * *m[i] + (1.0 - beta1_) * *g[i];
    *v[i] = beta2_ * *v[i] + (1.0 - beta2_) * g[i]->cwiseProduct(*g[i]);
    if (lr == 0.0) continue;
    *p[i] *= (1.0 - lr * weight_decay_);
    *p[i] -= lr * ((*m[i] / bc1).array() / ((*v[i] / bc2).array().sqrt() + eps_)).matrix();
  }
}

ModelState ModelState::init(const TrainConfig& config, UnifiedVocabulary vocab) {
  config.validate();
  ModelState s;
  s.config = config;
  s.encoder = std::make_shared<const TextEncoder>(config.model.encoder);
  Rng rng(config.seed);
  s.model = Model::init(config.model, s.encoder->token_dim(), rng);
  s.vocabulary = std::move(vocab);
  return s;
}

TrainingContext::TrainingContext(const ModelState& state) : tokens_(state.encoder->tokenize_all(state.vocabulary.entries())) {
  for (const auto& src : state.vocabulary.sources())
    masks_.emplace_back(src.source_id,
                        LabelMask::only(state.vocabulary.size(), state.vocabulary.source_map(src.source_id)));
}

const LabelMask& TrainingContext::mask(const std::string& source_id) const {
  for (const auto& [id, m] : masks_)
    if (id == source_id) return m;
  fail(ErrorCode::UnknownSource, "no label set for source '" + source_id + "'");
}

double batch_loss(std::span<const PreparedScene> batch, const ModelState& state, const TrainingContext& context,
                  Model* grad, const LossOptions& options) {
  if (batch.empty()) fail(ErrorCode::ConfigInvalid, "empty batch");
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& scene : batch)
    total += scene_loss(state.model, *state.encoder, scene, context.tokens(), context.mask(scene.source_id),
                        state.config.model.temperature, grad, scale, options);
  return total * scale;
}

double train_step(std::span<const PreparedScene> batch, ModelState& state, AdamW& optimizer, double lr,
                  const TrainingContext& context) {
  Model grad = state.model.zeros_like();
  const double loss = batch_loss(batch, state, context, &grad);
  optimizer.step(state.model, grad, lr);
  return loss;
}

double train_step(std::span<const Scene> batch, ModelState& state, AdamW& optimizer, double lr) {
  std::vector<PreparedScene> prepared;
  prepared.reserve(batch.size());
  for (const auto& s : batch) {
    s.validate(state.vocabulary.size());
    prepared.push_back(prepare_scene(s, state.model.backbone.neighbors));
  }
  const TrainingContext context(state);
  return train_step(prepared, state, optimizer, lr, context);
}

ConfusionMatrix evaluate_confusion(const ModelState& state, std::span<const Scene> scenes,
                                   const std::vector<LabelName>& eval_labels) {
  if (eval_labels.empty()) fail(ErrorCode::EmptyLabelSet, "evaluation needs at least one label");
  // Global id -> evaluation class (or unmatched).
  std::vector<int> remap(state.vocabulary.size(), kUnmatchedLabel);
  for (std::size_t g = 0; g < state.vocabulary.size(); ++g)
    for (std::size_t c = 0; c < eval_labels.size(); ++c)
      if (state.vocabulary.entries()[g] == eval_labels[c]) remap[g] = static_cast<int>(c);

  ConfusionMatrix cm(eval_labels.size());
  for (const auto& scene : scenes) {
    scene.validate(state.vocabulary.size());
    const Segmentation seg = segment(state.model, *state.encoder, scene, eval_labels, state.config.model.temperature);
    std::vector<int> gt(scene.labels.size());
    for (std::size_t i = 0; i < gt.size(); ++i)
      gt[i] = scene.labels[i] < 0 ? kIgnoreLabel : remap[static_cast<std::size_t>(scene.labels[i])];
    cm.accumulate(gt, seg.assignments);
  }
  return cm;
}

MetricsReport evaluate(const ModelState& state, std::span<const Scene> scenes, const std::vector<LabelName>& eval_labels) {
  return make_report(evaluate_confusion(state, scenes, eval_labels), eval_labels);
}

double validation_miou(const ModelState& state, std::span<const Scene> scenes) {
  std::map<std::string, std::vector<Scene>> by_source;
  for (const auto& s : scenes) by_source[s.source_id].push_back(s);
  if (by_source.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [source, group] : by_source) {
    const auto cm = evaluate_confusion(state, group, state.vocabulary.source(source).labels);
    sum += cm.total() > 0 ? miou(cm) : 0.0;
  }
  return sum / static_cast<double>(by_source.size());
}

Checkpoint fit(const UnifiedVocabulary& vocab, const std::vector<Scene>& train, const std::vector<Scene>& val,
               const TrainConfig& config, FitTrace* trace, const FitOptions& options) {
  config.validate();
  ModelState state = ModelState::init(config, vocab);
  AdamW optimizer(state.model, config.beta1, config.beta2, config.eps, config.weight_decay);
  Rng rng(config.seed ^ 0x5851f42d4c957f2dULL);

  // Round-robin over sources in vocabulary order.
  std::vector<std::vector<std::size_t>> by_source;
  for (const auto& src : vocab.sources()) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < train.size(); ++i)
      if (train[i].source_id == src.source_id) idx.push_back(i);
    if (!idx.empty()) by_source.push_back(std::move(idx));
  }
  for (const auto& s : train) {
    if (!vocab.has_source(s.source_id)) fail(ErrorCode::UnknownSource, "training scene from '" + s.source_id + "'");
    s.validate(vocab.size());
  }
  if (config.epochs > 0 && by_source.empty()) fail(ErrorCode::ConfigInvalid, "no training scenes");

  const TrainingContext context(state);
  Checkpoint best{state, optimizer, rng.state()};
  double best_val = -std::numeric_limits<double>::infinity();
  const auto batch = static_cast<std::size_t>(config.per_source_batch);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at_epoch(config, epoch);
    std::size_t steps = std::numeric_limits<std::size_t>::max();
    for (auto& idx : by_source) {
      shuffle(idx, rng);
      steps = std::min(steps, idx.size() / batch);
    }
    steps = std::max<std::size_t>(steps, 1);

    double epoch_total = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      std::vector<PreparedScene> prepared;
      for (const auto& idx : by_source) {
        for (std::size_t j = 0; j < std::min(batch, idx.size()); ++j) {
          const Scene& scene = train[idx[(step * batch + j) % idx.size()]];
          prepared.push_back(prepare_scene(subsample(scene, config.points_per_scene, rng), config.model.backbone.neighbors));
        }
      }
      const double loss = train_step(prepared, state, optimizer, lr, context);
      epoch_total += loss;
      if (trace) trace->step_loss.push_back(loss);
    }
    state.epoch = epoch + 1;
    const double mean_loss = epoch_total / static_cast<double>(steps);
    const double val_score = val.empty() ? -1.0 : validation_miou(state, val);
    if (trace) {
      trace->epoch_loss.push_back(mean_loss);
      trace->lr.push_back(lr);
      if (!val.empty()) trace->val_miou.push_back(val_score);
    }
    if (!val.empty() && val_score > best_val) {
      best_val = val_score;
      best = Checkpoint{state, optimizer, rng.state()};
      if (trace) trace->best_epoch = epoch;
    }
    if (options.on_epoch) options.on_epoch(epoch, mean_loss, val_score);
  }
  if (val.empty() || config.epochs == 0) {
    best = Checkpoint{state, optimizer, rng.state()};
    if (trace) trace->best_epoch = config.epochs - 1;
  }
  return best;
}

}  // namespace mantra
