#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mantra/datasets.hpp"
#include "mantra/label_space.hpp"
#include "mantra/metrics.hpp"
#include "mantra/model.hpp"

namespace mantra {

struct TrainConfig {
  double lr = 0.001;
  std::vector<int> milestones{70, 90};
  double decay = 0.1;
  int epochs = 100;
  int per_source_batch = 3;
  int points_per_scene = 4096;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  ModelConfig model;

  void validate() const;
  std::string to_json() const;
  /// Missing keys keep their defaults.
  static TrainConfig from_json(std::string_view text);
};

/// Learning rate in effect during `epoch` (0-based): lr times decay for
/// every milestone already reached.
double lr_at_epoch(const TrainConfig& config, int epoch);

/// Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW() = default;
  AdamW(const Model& shape, double beta1, double beta2, double eps, double weight_decay);

  void step(Model& params, const Model& grad, double lr);

  std::int64_t steps() const noexcept { return steps_; }
  Model& first_moment() { return m_; }
  Model& second_moment() { return v_; }
  const Model& first_moment() const { return m_; }
  const Model& second_moment() const { return v_; }
  void set_steps(std::int64_t s) { steps_ = s; }

 private:
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8, weight_decay_ = 0.0;
  std::int64_t steps_ = 0;
  Model m_, v_;
};

struct ModelState {
  TrainConfig config;
  Model model;
  std::shared_ptr<const TextEncoder> encoder;
  UnifiedVocabulary vocabulary;
  int epoch = 0;

  /// Fresh parameters for `vocab`, seeded from config.seed.
  static ModelState init(const TrainConfig& config, UnifiedVocabulary vocab);
};

struct Checkpoint {
  ModelState state;
  AdamW optimizer;
  std::string rng_state;
};

/// Training-time view of the vocabulary: tokenized labels and per-source masks.
class TrainingContext {
 public:
  explicit TrainingContext(const ModelState& state);

  const std::vector<TokenSequence>& tokens() const noexcept { return tokens_; }
  const LabelMask& mask(const std::string& source_id) const;

 private:
  std::vector<TokenSequence> tokens_;
  std::vector<std::pair<std::string, LabelMask>> masks_;
};

/// One optimizer update over a batch of scenes (global label ids). Returns the
/// mean scene loss before the update.
double train_step(std::span<const PreparedScene> batch, ModelState& state, AdamW& optimizer, double lr,
                  const TrainingContext& context);
double train_step(std::span<const Scene> batch, ModelState& state, AdamW& optimizer, double lr);

/// Mean loss and gradient over a batch without updating anything.
double batch_loss(std::span<const PreparedScene> batch, const ModelState& state, const TrainingContext& context,
                  Model* grad, const LossOptions& options = {});

struct FitTrace {
  std::vector<double> epoch_loss;
  std::vector<double> step_loss;
  std::vector<double> lr;        // per epoch
  std::vector<double> val_miou;  // per epoch, empty without validation scenes
  int best_epoch = -1;
};

struct FitOptions {
  /// Called after every epoch with (epoch, mean loss, val mIoU or -1).
  std::function<void(int, double, double)> on_epoch;
};

/// Multi-source training. Scenes carry global ids of `vocab`. Returns the
/// checkpoint with the best validation mIoU (the last one without validation).
Checkpoint fit(const UnifiedVocabulary& vocab, const std::vector<Scene>& train, const std::vector<Scene>& val,
               const TrainConfig& config, FitTrace* trace = nullptr, const FitOptions& options = {});

/// Segments each scene with `eval_labels` (prompted per scene) and scores it.
/// Ground-truth classes missing from `eval_labels` count as unmatched points.
MetricsReport evaluate(const ModelState& state, std::span<const Scene> scenes,
                       const std::vector<LabelName>& eval_labels);
ConfusionMatrix evaluate_confusion(const ModelState& state, std::span<const Scene> scenes,
                                   const std::vector<LabelName>& eval_labels);

/// Mean over sources of mIoU on each source's own label set.
double validation_miou(const ModelState& state, std::span<const Scene> scenes);

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class TensorPrecision { F32, F64 };

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path,
                     TensorPrecision precision = TensorPrecision::F64);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mantra
