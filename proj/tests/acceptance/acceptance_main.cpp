// Acceptance suite: one line per criterion, nonzero exit if any fails.
// `--only NAME` runs a single criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "mantra/errors.hpp"
#include "mantra/training.hpp"

using namespace mantra;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<Matrix*> tensors(Model& m, std::vector<std::string>* names = nullptr) {
  std::vector<Matrix*> out;
  m.visit(TensorVisitor([&](const std::string& n, Matrix& t) {
    out.push_back(&t);
    if (names) names->push_back(n);
  }));
  return out;
}

// ---------------------------------------------------------------------------

Outcome gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  const UnifiedVocabulary vocab =
      build_union({register_source("a", {"wall", "chair"}), register_source("b", {"chair", "sofa"})});
  TrainConfig cfg = testing::tiny_config(2);
  cfg.seed = 11;
  ModelState state = ModelState::init(cfg, vocab);
  const TrainingContext ctx(state);

  Rng rng(5);
  std::vector<PreparedScene> scenes;
  scenes.push_back(prepare_scene(to_global(testing::random_scene(8, {0, 1}, rng, "a"), vocab), 3));
  scenes.push_back(prepare_scene(to_global(testing::random_scene(8, {0, 1}, rng, "b"), vocab), 3));

  // Descriptors at the unperturbed parameters: the stop-gradient loss is
  // the loss with these held constant.
  std::vector<SceneDescriptor> frozen;
  for (const auto& s : scenes)
    frozen.push_back(summarize(extract_features(s.normalized, s.neighbors, state.model.backbone)));

  auto loss = [&](const Model& m, bool detached, Model* grad) {
    double total = 0.0;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      LossOptions opt;
      opt.stop_gradient = detached;
      if (detached && !grad) opt.descriptor_override = &frozen[i];
      total += scene_loss(m, *state.encoder, scenes[i], ctx.tokens(), ctx.mask(scenes[i].source_id),
                          cfg.model.temperature, grad, 0.5, opt);
    }
    return total * 0.5;
  };

  double worst = 0.0;
  std::string worst_name;
  for (bool detached : {true, false}) {
    Model grad = state.model.zeros_like();
    loss(state.model, detached, &grad);
    Model probe = state.model;
    std::vector<std::string> names;
    auto params = tensors(probe, &names);
    auto grads = tensors(grad);
    for (std::size_t t = 0; t < params.size(); ++t) {
      Matrix fd(params[t]->rows(), params[t]->cols());
      for (Eigen::Index i = 0; i < params[t]->size(); ++i) {
        double& w = params[t]->data()[i];
        const double orig = w;
        const double h = 1e-6 * std::max(1.0, std::fabs(orig));
        w = orig + h;
        const double up = loss(probe, detached, nullptr);
        w = orig - h;
        const double down = loss(probe, detached, nullptr);
        w = orig;
        fd.data()[i] = (up - down) / (2 * h);
      }
      const double denom = std::max({grads[t]->norm(), fd.norm(), 1e-12});
      const double rel = (*grads[t] - fd).norm() / denom;
      if (rel > worst) {
        worst = rel;
        worst_name = names[t] + (detached ? " (detached)" : " (attached)");
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          "max per-tensor rel err " + fmt("%.2e", worst) + " at " + worst_name + ", " + fmt("%.2f s", secs)};
}

Outcome loss_identities() {
  std::ostringstream detail;
  bool ok = true;
  // A composition with zero weight maps every label to the bias vector, so
  // every point is equally similar to every anchor.
  std::vector<std::string> names;
  for (int i = 0; i < 20; ++i) names.push_back("label" + std::to_string(i));
  const UnifiedVocabulary vocab = build_union({register_source("all", names)});
  TrainConfig cfg = testing::tiny_config(2);
  ModelState state = ModelState::init(cfg, vocab);
  CompositionParams zero = state.encoder->composition();
  zero.weight.setZero();
  const TextEncoder flat(state.encoder->table(), zero, state.encoder->spec());
  const auto tokens = flat.tokenize_all(vocab.entries());

  Rng rng(9);
  std::vector<int> all_ids(20);
  for (int i = 0; i < 20; ++i) all_ids[static_cast<std::size_t>(i)] = i;
  const PreparedScene scene = prepare_scene(testing::random_scene(32, all_ids, rng, "all"), 3);
  for (int nk : {2, 11, 20}) {
    std::vector<int> allowed(all_ids.begin(), all_ids.begin() + nk);
    PreparedScene s = scene;
    for (auto& l : s.labels) l = allowed[static_cast<std::size_t>(l) % allowed.size()];
    const double l = scene_loss(state.model, flat, s, tokens, LabelMask::only(20, allowed), cfg.model.temperature);
    const double err = std::fabs(l - std::log(static_cast<double>(nk)));
    ok = ok && err <= 1e-6;
    detail << "n_k=" << nk << " |L-ln n_k|=" << fmt("%.1e", err) << "; ";
  }

  double worst_sum = 0.0;
  bool masked_zero = true;
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + rng.index(16));
    const auto c = 2 + rng.index(20);
    SimilarityMatrix sim{Matrix(n, static_cast<Eigen::Index>(c)), rng.uniform(0.01, 1.0)};
    for (Eigen::Index i = 0; i < sim.values.size(); ++i) sim.values.data()[i] = rng.uniform(-1.0, 1.0);
    std::vector<int> allowed;
    for (std::size_t k = 0; k < c; ++k)
      if (rng.uniform() < 0.5) allowed.push_back(static_cast<int>(k));
    if (allowed.empty()) allowed.push_back(0);
    const LabelMask mask = LabelMask::only(c, allowed);
    const Matrix p = probabilities(sim, mask);
    for (Eigen::Index i = 0; i < n; ++i) {
      worst_sum = std::max(worst_sum, std::fabs(p.row(i).sum() - 1.0));
      for (std::size_t k = 0; k < c; ++k)
        if (!mask.allowed(k) && p(i, static_cast<Eigen::Index>(k)) != 0.0) masked_zero = false;
    }
  }
  ok = ok && worst_sum <= 1e-9 && masked_zero;
  detail << "max |row sum-1|=" << fmt("%.1e", worst_sum) << ", masked entries " << (masked_zero ? "exactly 0" : "NONZERO");
  return {ok, detail.str()};
}

// Standalone cross-entropy over the allowed columns only.
double brute_force_ce(const SimilarityMatrix& sim, const std::vector<int>& gt,
                      const std::vector<std::vector<int>>& allowed_per_row) {
  double total = 0.0;
  int labeled = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] < 0) continue;
    const auto& allowed = allowed_per_row[i];
    std::vector<double> logits;
    int target = -1;
    for (std::size_t j = 0; j < allowed.size(); ++j) {
      logits.push_back(sim.values(static_cast<Eigen::Index>(i), allowed[j]) / sim.temperature);
      if (allowed[j] == gt[i]) target = static_cast<int>(j);
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - m);
    total += -(logits[static_cast<std::size_t>(target)] - m - std::log(z));
    ++labeled;
  }
  return labeled ? total / labeled : 0.0;
}

Outcome masking_oracle() {
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t classes = 2 + rng.index(24);
    const std::size_t n = 1 + rng.index(40);
    const std::size_t sources = 1 + rng.index(3);
    std::vector<LabelMask> masks;
    std::vector<std::vector<int>> allowed_sets;
    for (std::size_t s = 0; s < sources; ++s) {
      std::vector<int> allowed;
      for (std::size_t c = 0; c < classes; ++c)
        if (rng.uniform() < 0.5) allowed.push_back(static_cast<int>(c));
      if (allowed.empty()) allowed.push_back(static_cast<int>(rng.index(classes)));
      masks.push_back(LabelMask::only(classes, allowed));
      allowed_sets.push_back(allowed);
    }
    SimilarityMatrix sim{Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(classes)),
                         rng.uniform(0.02, 1.0)};
    for (Eigen::Index i = 0; i < sim.values.size(); ++i) sim.values.data()[i] = rng.uniform(-1.0, 1.0);
    std::vector<LabelMask> row_masks;
    std::vector<std::vector<int>> row_allowed;
    std::vector<int> gt;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t s = rng.index(sources);
      row_masks.push_back(masks[s]);
      row_allowed.push_back(allowed_sets[s]);
      gt.push_back(rng.uniform() < 0.1 ? -1 : allowed_sets[s][rng.index(allowed_sets[s].size())]);
    }
    const double ours = ce_loss(sim, gt, row_masks);
    worst = std::max(worst, std::fabs(ours - brute_force_ce(sim, gt, row_allowed)));
  }
  return {worst < 1e-12, "200 instances, max diff " + fmt("%.2e", worst)};
}

Outcome stop_gradient() {
  const UnifiedVocabulary vocab =
      build_union({register_source("a", {"wall", "floor", "chair"}), register_source("b", {"chair", "table"})});
  TrainConfig cfg = testing::tiny_config(3);
  cfg.seed = 4;
  const ModelState state = ModelState::init(cfg, vocab);
  const TrainingContext ctx(state);
  Rng rng(77);
  const PreparedScene scene = prepare_scene(to_global(testing::random_scene(24, {0, 1, 2}, rng, "a"), vocab), 3);
  const SceneDescriptor copy = summarize(extract_features(scene.normalized, scene.neighbors, state.model.backbone));

  Model live = state.model.zeros_like(), detached = state.model.zeros_like();
  scene_loss(state.model, *state.encoder, scene, ctx.tokens(), ctx.mask("a"), cfg.model.temperature, &live);
  LossOptions opt;
  opt.descriptor_override = &copy;
  scene_loss(state.model, *state.encoder, scene, ctx.tokens(), ctx.mask("a"), cfg.model.temperature, &detached, 1.0,
             opt);

  bool bitwise = true;
  auto a = tensors(live), b = tensors(detached);
  std::vector<std::string> names;
  tensors(live, &names);
  double pln_norm = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (names[t].rfind("backbone.", 0) == 0)
      bitwise = bitwise && a[t]->size() == b[t]->size() &&
                std::memcmp(a[t]->data(), b[t]->data(), sizeof(double) * static_cast<std::size_t>(a[t]->size())) == 0;
    if (names[t].rfind("pln.", 0) == 0) pln_norm += a[t]->squaredNorm();
  }
  pln_norm = std::sqrt(pln_norm);

  // Contrast: without the stop-gradient the backbone gradient changes.
  Model attached = state.model.zeros_like();
  opt = {};
  opt.stop_gradient = false;
  scene_loss(state.model, *state.encoder, scene, ctx.tokens(), ctx.mask("a"), cfg.model.temperature, &attached, 1.0,
             opt);
  double diff = 0.0;
  auto c = tensors(attached);
  for (std::size_t t = 0; t < a.size(); ++t)
    if (names[t].rfind("backbone.", 0) == 0) diff += (*a[t] - *c[t]).squaredNorm();

  return {bitwise && pln_norm > 0.0,
          std::string("backbone grads ") + (bitwise ? "bitwise identical" : "DIFFER") + ", |grad pln|=" +
              fmt("%.3e", pln_norm) + ", |live - undetached backbone grad|=" + fmt("%.3e", std::sqrt(diff))};
}

// Metrics straight from the definitions, no confusion matrix.
struct BruteMetrics {
  double oa, macc, miou;
};
BruteMetrics brute_metrics(const std::vector<int>& gt, const std::vector<int>& pred, int classes) {
  double correct = 0, counted = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == kIgnoreLabel) continue;
    counted += 1;
    if (gt[i] == pred[i]) correct += 1;
  }
  double recall_sum = 0, recall_n = 0, iou_sum = 0, iou_n = 0;
  for (int c = 0; c < classes; ++c) {
    double tp = 0, in_gt = 0, in_pred = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (gt[i] == kIgnoreLabel) continue;
      const bool g = gt[i] == c, p = pred[i] == c;
      tp += g && p;
      in_gt += g;
      in_pred += p;
    }
    if (in_gt > 0) {
      recall_sum += tp / in_gt;
      recall_n += 1;
    }
    if (in_gt + in_pred > 0) {
      iou_sum += tp / (in_gt + in_pred - tp);
      iou_n += 1;
    }
  }
  return {correct / counted, recall_n > 0 ? recall_sum / recall_n : 0.0, iou_sum / iou_n};
}

Outcome metrics_oracle() {
  Rng rng(31337);
  double worst = 0.0;
  int checked = 0;
  while (checked < 1000) {
    const int classes = 1 + static_cast<int>(rng.index(8));
    const std::size_t n = 1 + rng.index(60);
    std::vector<int> gt(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = rng.uniform();
      gt[i] = u < 0.1 ? kIgnoreLabel : u < 0.15 ? kUnmatchedLabel : static_cast<int>(rng.index(classes));
      pred[i] = static_cast<int>(rng.index(classes));
    }
    if (std::all_of(gt.begin(), gt.end(), [](int g) { return g == kIgnoreLabel; })) continue;
    ConfusionMatrix cm(static_cast<std::size_t>(classes));
    cm.accumulate(gt, pred);
    const BruteMetrics b = brute_metrics(gt, pred, classes);
    worst = std::max({worst, std::fabs(oa(cm) - b.oa), std::fabs(macc(cm) - b.macc), std::fabs(miou(cm) - b.miou)});
    ++checked;
  }
  ConfusionMatrix worked(2);
  const std::vector<int> gt{0, 0, 1, 1}, pred{0, 1, 1, 1};
  worked.accumulate(gt, pred);
  const double example = miou(worked);
  const bool ok = worst < 1e-12 && std::fabs(example - 0.583333) <= 1e-6 &&
                  std::fabs(example - 7.0 / 12.0) <= 1e-9;
  return {ok, "1000 instances, max diff " + fmt("%.2e", worst) + "; worked example mIoU " + fmt("%.9f", example)};
}

Outcome overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  SourceConfig src;
  src.source_id = "overfit";
  src.names = {{Archetype::Wall, "wall"}, {Archetype::Floor, "floor"}, {Archetype::Chair, "chair"},
               {Archetype::Table, "table"}, {Archetype::Sofa, "sofa"}};
  src.rooms = 4;
  src.points_per_room = 1024;
  src.seed = 21;
  const UnifiedVocabulary vocab = build_union({src.label_set()});
  const auto scenes = testing::generated(src, vocab);

  TrainConfig cfg;
  cfg.seed = 3;
  cfg.lr = 0.005;
  ModelState state = ModelState::init(cfg, vocab);
  AdamW opt(state.model, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay);
  const TrainingContext ctx(state);
  std::vector<PreparedScene> prepared;
  for (const auto& s : scenes) prepared.push_back(prepare_scene(s, cfg.model.backbone.neighbors));

  int steps = 0;
  double acc = 0.0, loss = 0.0;
  while (steps < 300) {
    loss = train_step(prepared, state, opt, cfg.lr, ctx);
    ++steps;
    if (steps % 25 == 0) {
      acc = evaluate(state, scenes, vocab.entries()).overall_accuracy;
      if (acc >= 0.95) break;
    }
  }
  acc = evaluate(state, scenes, vocab.entries()).overall_accuracy;
  const double secs = seconds_since(t0);
  return {acc >= 0.95 && secs < 300.0, "train OA " + fmt("%.4f", acc) + " after " + std::to_string(steps) +
                                           " steps (loss " + fmt("%.4f", loss) + "), " + fmt("%.1f s", secs)};
}

// Desk-scale multi-source benchmark: two auxiliary sources and a target
// source with few training rooms plus held-out test rooms.
struct Benchmark {
  std::vector<SourceConfig> aux;
  SourceConfig target;
};

Benchmark make_benchmark(std::uint64_t seed, int target_train_rooms, int target_test_rooms) {
  Benchmark b;
  for (const char* name : {"synth-clean", "synth-noisy-a"}) {
    SourceConfig c = preset_source(name, seed * 10);
    c.rooms = 8;
    c.points_per_room = 1024;
    b.aux.push_back(c);
  }
  b.target = preset_source("synth-noisy-b", seed * 10);
  b.target.rooms = target_train_rooms + target_test_rooms;
  b.target.test_rooms = target_test_rooms;
  b.target.points_per_room = 1024;
  return b;
}

TrainConfig benchmark_config(std::uint64_t seed, int epochs) {
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.epochs = epochs;
  cfg.milestones = {epochs * 7 / 10, epochs * 9 / 10};
  cfg.lr = 0.005;
  cfg.per_source_batch = 2;
  cfg.points_per_scene = 1024;
  cfg.model.encoder.kind = EncoderKind::Fixture;
  return cfg;
}

struct SplitScenes {
  std::vector<Scene> train, test;
};

// Scenes of `sources` with global ids of `vocab`; the last test_rooms rooms
// of each source are held out.
SplitScenes split_scenes(const std::vector<SourceConfig>& sources, const UnifiedVocabulary& vocab) {
  SplitScenes out;
  for (const auto& src : sources) {
    auto scenes = testing::generated(src, vocab);
    const std::size_t cut = scenes.size() - static_cast<std::size_t>(src.test_rooms);
    for (std::size_t i = 0; i < scenes.size(); ++i) (i < cut ? out.train : out.test).push_back(std::move(scenes[i]));
  }
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome synonym_zero_shot() {
  Benchmark b = make_benchmark(1, 6, 0);
  b.aux[0].rooms = 16;
  b.aux[0].test_rooms = 10;  // held out, never trained on
  // "couch" must be unseen: the source that uses it is left out.
  const std::vector<SourceConfig> sources{b.aux[0], b.target};
  std::vector<LabelSet> sets;
  for (const auto& s : sources) sets.push_back(s.label_set());
  const UnifiedVocabulary vocab = build_union(sets);
  if (vocab.find(LabelName("couch")) >= 0) return {false, "couch leaked into the training vocabulary"};
  const SplitScenes data = split_scenes(sources, vocab);

  const Checkpoint ck = fit(vocab, data.train, {}, benchmark_config(1, 60));
  const auto with_sofa = parse_label_list("wall,floor,chair,table,sofa,bookcase,board");
  const auto with_couch = parse_label_list("wall,floor,chair,table,couch,bookcase,board");
  std::size_t same = 0, total = 0;
  for (const auto& scene : data.test) {
    const auto a = segment(ck.state.model, *ck.state.encoder, scene, with_sofa).assignments;
    const auto c = segment(ck.state.model, *ck.state.encoder, scene, with_couch).assignments;
    for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == c[i];
    total += a.size();
  }
  const double agreement = static_cast<double>(same) / static_cast<double>(total);
  const double miou_sofa = evaluate(ck.state, data.test, with_sofa).mean_iou;
  return {data.test.size() == 10 && agreement >= 0.9,
          std::to_string(data.test.size()) + " held-out scenes, sofa->couch agreement " + fmt("%.4f", agreement) +
              " (mIoU with sofa " + fmt("%.3f", miou_sofa) + ")"};
}

Outcome multi_source_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> unified, target_only;
  std::ostringstream per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Benchmark b = make_benchmark(seed, 2, 4);
    const auto target_labels = b.target.label_set().labels;
    const TrainConfig cfg = benchmark_config(seed, 60);

    const UnifiedVocabulary solo = build_union({b.target.label_set()});
    const SplitScenes solo_data = split_scenes({b.target}, solo);
    const Checkpoint t = fit(solo, solo_data.train, {}, cfg);
    target_only.push_back(evaluate(t.state, solo_data.test, target_labels).mean_iou);

    std::vector<SourceConfig> all = b.aux;
    all.push_back(b.target);
    std::vector<LabelSet> sets;
    for (const auto& s : all) sets.push_back(s.label_set());
    const UnifiedVocabulary joint = build_union(sets);
    const SplitScenes joint_data = split_scenes(all, joint);
    const Checkpoint u = fit(joint, joint_data.train, {}, cfg);
    unified.push_back(evaluate(u.state, joint_data.test, target_labels).mean_iou);
    per_seed << " " << fmt("%.3f", target_only.back()) << "/" << fmt("%.3f", unified.back());
  }
  const double mu = median(unified), mt = median(target_only);
  const double secs = seconds_since(t0);
  return {mu >= mt && secs < 1800.0, "median target mIoU unified " + fmt("%.4f", mu) + " vs target-only " +
                                         fmt("%.4f", mt) + " (per seed T/U:" + per_seed.str() + "), " +
                                         fmt("%.0f s", secs)};
}

Outcome schedule() {
  const UnifiedVocabulary vocab = build_union({register_source("s", {"wall", "floor"})});
  Rng rng(1);
  const std::vector<Scene> train{to_global(testing::random_scene(32, {0, 1}, rng, "s"), vocab)};
  TrainConfig cfg = testing::tiny_config(2);
  cfg.epochs = 100;
  cfg.per_source_batch = 1;
  FitTrace trace;
  fit(vocab, train, {}, cfg, &trace);
  bool ok = trace.lr.size() == 100;
  for (std::size_t e = 0; ok && e < trace.lr.size(); ++e) {
    const double expected = e < 70 ? 1e-3 : e < 90 ? 1e-4 : 1e-5;
    ok = trace.lr[e] == expected;
  }
  return {ok, std::to_string(trace.lr.size()) + " epochs: lr[0]=" + fmt("%g", trace.lr.at(0)) + " lr[69]=" +
                  fmt("%g", trace.lr.at(69)) + " lr[70]=" + fmt("%g", trace.lr.at(70)) + " lr[89]=" +
                  fmt("%g", trace.lr.at(89)) + " lr[90]=" + fmt("%g", trace.lr.at(90)) + " lr[99]=" +
                  fmt("%g", trace.lr.at(99)) + " (bitwise compared)"};
}

Outcome determinism() {
  const Benchmark b = make_benchmark(3, 3, 1);
  std::vector<SourceConfig> all = b.aux;
  all.push_back(b.target);
  std::vector<LabelSet> sets;
  for (const auto& s : all) sets.push_back(s.label_set());
  const UnifiedVocabulary vocab = build_union(sets);
  const SplitScenes data = split_scenes(all, vocab);
  TrainConfig cfg = benchmark_config(9, 4);
  cfg.points_per_scene = 512;  // exercises the subsampling stream too

  auto run = [&](FitTrace& trace) {
    const Checkpoint ck = fit(vocab, data.train, {}, cfg, &trace);
    const PreparedScene p = prepare_scene(data.test.front(), cfg.model.backbone.neighbors);
    const PromptTokens prompt = scene_prompt(ck.state.model, p);
    return ck.state.encoder->encode(vocab.entries(), &prompt.tokens).vectors;
  };
  FitTrace a, b2;
  const Matrix anchors_a = run(a), anchors_b = run(b2);
  const bool same_loss = a.step_loss == b2.step_loss && a.epoch_loss == b2.epoch_loss;
  const bool same_anchors = anchors_a.rows() == anchors_b.rows() && anchors_a.cols() == anchors_b.cols() &&
                            std::memcmp(anchors_a.data(), anchors_b.data(),
                                        sizeof(double) * static_cast<std::size_t>(anchors_a.size())) == 0;
  return {same_loss && same_anchors && !a.step_loss.empty(),
          std::to_string(a.step_loss.size()) + " step losses " + (same_loss ? "identical" : "DIFFER") + ", " +
              std::to_string(anchors_a.rows()) + "x" + std::to_string(anchors_a.cols()) + " anchors " +
              (same_anchors ? "bitwise identical" : "DIFFER")};
}

Outcome prompt_length_sweep() {
  const Benchmark b = make_benchmark(2, 4, 2);
  std::vector<SourceConfig> all = b.aux;
  all.push_back(b.target);
  std::vector<LabelSet> sets;
  for (const auto& s : all) sets.push_back(s.label_set());
  const UnifiedVocabulary vocab = build_union(sets);
  const SplitScenes data = split_scenes(all, vocab);
  const auto target_labels = b.target.label_set().labels;

  bool ok = true;
  std::ostringstream detail;
  for (int k : {0, 4, 8, 16}) {
    TrainConfig cfg = benchmark_config(2, 20);
    cfg.model.pln.prompt_length = k;
    const Checkpoint ck = fit(vocab, data.train, {}, cfg);
    const double m = evaluate(ck.state, data.test, target_labels).mean_iou;
    const PreparedScene p = prepare_scene(data.test.front(), cfg.model.backbone.neighbors);
    const Matrix tokens = scene_prompt(ck.state.model, p).tokens;
    const bool shape = tokens.rows() == k && tokens.cols() == ck.state.encoder->token_dim();
    ok = ok && shape && std::isfinite(m);
    detail << "K=" << k << " mIoU " << fmt("%.3f", m) << " prompt " << tokens.rows() << "x" << tokens.cols()
           << (shape ? "" : " (BAD SHAPE)") << "; ";
  }
  return {ok, detail.str()};
}

}  // namespace

int main(int argc, char** argv) {
  std::string only;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::strcmp(argv[i], "--only") == 0) only = argv[i + 1];

  const std::vector<Criterion> criteria{
      {"gradient_fidelity", gradient_fidelity},
      {"loss_identities", loss_identities},
      {"masking_oracle", masking_oracle},
      {"stop_gradient", stop_gradient},
      {"metrics_oracle", metrics_oracle},
      {"overfit_smoke", overfit},
      {"synonym_zero_shot", synonym_zero_shot},
      {"multi_source_trend", multi_source_trend},
      {"schedule", schedule},
      {"determinism", determinism},
      {"prompt_length_sweep", prompt_length_sweep},
  };

  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && c.name != only) continue;
    ++ran;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << std::endl;
  }
  if (ran == 0) {
    std::cerr << "no criterion named '" << only << "'\n";
    return 2;
  }
  std::cout << (ran - failed) << "/" << ran << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
