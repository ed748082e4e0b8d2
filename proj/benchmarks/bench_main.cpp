#include <benchmark/benchmark.h>

#include "mantra/datasets.hpp"
#include "mantra/training.hpp"

using namespace mantra;

namespace {

Scene room(int points) {
  SourceConfig cfg = preset_source("synth-clean", 1);
  cfg.rooms = 1;
  cfg.points_per_room = points;
  return generate_source(cfg).front();
}

void BM_NearestNeighbors(benchmark::State& st) {
  const Matrix xyz = normalize_points(room(static_cast<int>(st.range(0))).points);
  for (auto _ : st) benchmark::DoNotOptimize(nearest_neighbors(xyz, 16));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_NearestNeighbors)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_Segment(benchmark::State& st) {
  const Scene scene = room(static_cast<int>(st.range(0)));
  TrainConfig cfg;
  const ModelState state = ModelState::init(cfg, build_union({preset_source("synth-clean").label_set()}));
  const auto labels = state.vocabulary.entries();
  for (auto _ : st) benchmark::DoNotOptimize(segment(state.model, *state.encoder, scene, labels));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_Segment)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& st) {
  const SourceConfig src = preset_source("synth-clean", 2);
  const UnifiedVocabulary vocab = build_union({src.label_set()});
  TrainConfig cfg;
  ModelState state = ModelState::init(cfg, vocab);
  AdamW opt(state.model, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay);
  const TrainingContext ctx(state);
  std::vector<PreparedScene> batch;
  for (int i = 0; i < 3; ++i) {
    Scene s = room(static_cast<int>(st.range(0)));
    batch.push_back(prepare_scene(to_global(std::move(s), vocab), cfg.model.backbone.neighbors));
  }
  for (auto _ : st) benchmark::DoNotOptimize(train_step(batch, state, opt, cfg.lr, ctx));
}
BENCHMARK(BM_TrainStep)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_SimilarityLoss(benchmark::State& st) {
  Rng rng(1);
  const auto n = st.range(0);
  Matrix p(n, 128), a(20, 128);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  std::vector<int> gt(static_cast<std::size_t>(n));
  for (auto& g : gt) g = static_cast<int>(rng.index(20));
  const LabelMask mask = LabelMask::all(20);
  for (auto _ : st) {
    const SimilarityMatrix sim = similarity(p, a);
    Matrix d;
    benchmark::DoNotOptimize(ce_loss(sim, gt, mask, &d));
    benchmark::DoNotOptimize(similarity_backward(p, a, d));
  }
  st.SetItemsProcessed(st.iterations() * n);
}
BENCHMARK(BM_SimilarityLoss)->Arg(4096)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
