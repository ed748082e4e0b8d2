#include "cli.hpp"

#include <algorithm>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mantra/datasets.hpp"
#include "mantra/errors.hpp"
#include "mantra/query_service.hpp"
#include "mantra/training.hpp"

namespace mantra::cli {
namespace {

constexpr int kUsage = 1;
constexpr int kRuntime = 2;

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::vector<Split> parse_splits(const std::string& text) {
  std::vector<Split> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(split_from_string(item));
  return out;
}

// Scene recolored by predicted label; `labels` holds the class ids.
Scene colored(const Scene& scene, const std::vector<int>& assignments, const std::vector<std::string>& names) {
  Scene out = scene;
  out.labels = assignments;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const auto c = label_color(names[static_cast<std::size_t>(assignments[i])]);
    for (int k = 0; k < 3; ++k) out.points(static_cast<Eigen::Index>(i), 3 + k) = c[static_cast<std::size_t>(k)] / 255.0;
  }
  return out;
}

HttpServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"mantra: open-vocabulary point cloud segmentation", "mantra"};
  app.require_subcommand(1);

  std::string config, out_path, manifest_path, ckpt, labels, scene_path, anchors_path, precision = "f64";
  std::string splits = "test";
  int port = 8080;
  bool binary = false, quiet = false;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic multi-source dataset");
  gen->add_option("--config", config, "Dataset config (JSON)")->required();
  gen->add_option("--out", out_path, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train on the train split of a manifest");
  train->add_option("--manifest", manifest_path, "Scene manifest")->required();
  train->add_option("--config", config, "Training config (JSON)")->required();
  train->add_option("--out", out_path, "Checkpoint to write")->required();
  train->add_option("--precision", precision, "Stored tensor precision")->check(CLI::IsMember({"f32", "f64"}));
  train->add_flag("--quiet", quiet, "No per-epoch log");

  auto* eval = app.add_subcommand("eval", "Score a checkpoint on manifest scenes");
  eval->add_option("--ckpt", ckpt, "Checkpoint")->required();
  eval->add_option("--manifest", manifest_path, "Scene manifest")->required();
  eval->add_option("--labels", labels, "Comma-separated evaluation labels")->required();
  eval->add_option("--split", splits, "Comma-separated splits to evaluate");

  auto* query = app.add_subcommand("query", "Segment one PLY scene with an arbitrary label list");
  query->add_option("--ckpt", ckpt, "Checkpoint")->required();
  query->add_option("--scene", scene_path, "Input PLY")->required();
  auto* labels_opt = query->add_option("--labels", labels, "Comma-separated labels; order defines class ids");
  query->add_option("--anchors", anchors_path, "Precomputed anchor file (disables prompts)");
  query->add_option("--out", out_path, "Colored PLY to write")->required();

  auto* exp = app.add_subcommand("export-anchors", "Write label anchors to a file");
  exp->add_option("--ckpt", ckpt, "Checkpoint")->required();
  exp->add_option("--labels", labels, "Comma-separated labels")->required();
  exp->add_option("--out", out_path, "Anchor file")->required();
  exp->add_option("--scene", scene_path, "Condition prompts on this PLY scene");
  exp->add_flag("--binary", binary, "Binary float32 format");

  auto* serve = app.add_subcommand("serve", "HTTP query service");
  serve->add_option("--ckpt", ckpt, "Checkpoint")->required();
  serve->add_option("--manifest", manifest_path, "Scene manifest")->required();
  serve->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (query->parsed() && labels.empty() && anchors_path.empty())
      throw CLI::RequiredError("--labels or --anchors");
    (void)labels_opt;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "mantra: " << one_line(e.what()) << '\n';
    err << app.help();
    return kUsage;
  }

  try {
    if (gen->parsed()) {
      const auto sources = dataset_config_from_json(read_text(config));
      const SceneManifest m = write_dataset(sources, out_path);
      out << "wrote " << m.entries.size() << " scenes from " << sources.size() << " sources to " << out_path << '\n';
    } else if (train->parsed()) {
      const TrainConfig cfg = TrainConfig::from_json(read_text(config));
      const SceneManifest m = load_manifest(manifest_path);
      const auto train_scenes = load_scenes(m, {Split::Train});
      const auto val_scenes = load_scenes(m, {Split::Val});
      FitOptions opts;
      if (!quiet)
        opts.on_epoch = [&](int epoch, double loss, double val) {
          out << "epoch " << epoch << " loss " << loss;
          if (val >= 0) out << " val_miou " << val;
          out << '\n';
        };
      FitTrace trace;
      const Checkpoint result = fit(m.vocabulary, train_scenes, val_scenes, cfg, &trace, opts);
      save_checkpoint(result, out_path, precision == "f32" ? TensorPrecision::F32 : TensorPrecision::F64);
      out << "saved " << out_path << " (epoch " << result.state.epoch << ")\n";
    } else if (eval->parsed()) {
      const Checkpoint ck = load_checkpoint(ckpt);
      const SceneManifest m = load_manifest(manifest_path);
      const auto scenes = load_scenes(m, parse_splits(splits));
      if (scenes.empty()) fail(ErrorCode::EmptyManifest, "no scenes in split(s) " + splits);
      // Scene ids are global ids of the manifest's vocabulary.
      ModelState view = ck.state;
      view.vocabulary = m.vocabulary;
      const MetricsReport report = evaluate(view, scenes, parse_label_list(labels));
      out << report.to_json() << '\n';
    } else if (query->parsed()) {
      const Checkpoint ck = load_checkpoint(ckpt);
      const Scene scene = read_ply(scene_path);
      const auto& st = ck.state;
      Segmentation seg;
      std::vector<std::string> names;
      if (!anchors_path.empty()) {
        const AnchorMatrix anchors = load_precomputed_anchors(anchors_path);
        for (const auto& l : anchors.labels) names.push_back(l.text());
        if (!labels.empty()) {
          std::vector<std::string> wanted;
          for (const auto& l : parse_label_list(labels)) wanted.push_back(l.text());
          if (wanted != names) fail(ErrorCode::DimensionMismatch, "--labels do not match the anchor file labels");
        }
        seg = segment_with_anchors(st.model, scene, anchors, st.config.model.temperature);
      } else {
        const auto query_labels = parse_label_list(labels);
        for (const auto& l : query_labels) names.push_back(l.text());
        seg = segment(st.model, *st.encoder, scene, query_labels, st.config.model.temperature);
      }
      write_ply(colored(scene, seg.assignments, names), out_path, names);
      std::vector<std::size_t> counts(names.size(), 0);
      for (int a : seg.assignments) ++counts[static_cast<std::size_t>(a)];
      for (std::size_t c = 0; c < names.size(); ++c) out << names[c] << ' ' << counts[c] << '\n';
    } else if (exp->parsed()) {
      const Checkpoint ck = load_checkpoint(ckpt);
      const auto& st = ck.state;
      const auto export_labels = parse_label_list(labels);
      AnchorMatrix anchors;
      if (!scene_path.empty()) {
        const PreparedScene prepared = prepare_scene(read_ply(scene_path), st.model.backbone.neighbors);
        const PromptTokens prompt = scene_prompt(st.model, prepared);
        anchors = st.encoder->encode(export_labels, &prompt.tokens);
      } else {
        anchors = st.encoder->encode(export_labels);
      }
      if (binary)
        save_anchors_binary(anchors, out_path);
      else
        save_anchors_text(anchors, out_path);
      out << "wrote " << anchors.size() << " anchors of dim " << anchors.vectors.cols() << " to " << out_path << '\n';
    } else if (serve->parsed()) {
      const Checkpoint ck = load_checkpoint(ckpt);
      const SceneManifest m = load_manifest(manifest_path);
      QueryService service(std::make_shared<const ModelState>(ck.state), m);
      HttpServer server(service);
      const std::string host = default_bind_address();
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      out << "listening on http://" << host << ':' << bound << std::endl;
      server.run();
      g_server = nullptr;
    }
  } catch (const std::exception& e) {
    err << "mantra: error: " << one_line(e.what()) << '\n';
    return kRuntime;
  }
  return 0;
}

}  // namespace mantra::cli
