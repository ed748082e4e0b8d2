#include <doctest.h>

#include <fstream>
#include <set>

#include "expect_error.hpp"
#include "fixtures.hpp"
#include "mantra/datasets.hpp"
#include "temp_dir.hpp"

using namespace mantra;
using mantra::testing::TempDir;

TEST_SUITE("datasets") {
  TEST_CASE("generation is deterministic") {
    SourceConfig c = preset_source("synth-noisy-a", 3);
    c.rooms = 2;
    c.points_per_room = 512;
    const auto a = generate_source(c), b = generate_source(c);
    REQUIRE(a.size() == 2);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].points == b[i].points);
      CHECK(a[i].labels == b[i].labels);
      CHECK(a[i].scene_id == b[i].scene_id);
    }
    CHECK(a[0].scene_id == "synth-noisy-a-000");
  }

  TEST_CASE("every label of every preset appears") {
    for (const auto& c0 : default_sources(5)) {
      SourceConfig c = c0;
      c.rooms = 4;
      c.points_per_room = 1024;
      std::set<int> seen;
      for (const auto& s : generate_source(c)) {
        s.validate(c.label_set().size());
        seen.insert(s.labels.begin(), s.labels.end());
        CHECK(s.points.rightCols(3).minCoeff() >= 0.0);
        CHECK(s.points.rightCols(3).maxCoeff() <= 1.0);
      }
      CHECK(seen.size() == c.label_set().size());
    }
  }

  TEST_CASE("clean source has exact geometry, noisy sources do not") {
    SourceConfig clean = preset_source("synth-clean", 1);
    clean.rooms = 1;
    const Scene s = generate_source(clean).front();
    CHECK(s.size() == static_cast<std::size_t>(clean.points_per_room));
    const int floor = 1;  // local id of "floor"
    // z is up; without noise every floor point has the same height.
    std::set<double> heights;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s.labels[i] == floor) heights.insert(s.points(static_cast<Eigen::Index>(i), 2));
    CHECK(heights.size() == 1);

    SourceConfig noisy = preset_source("synth-noisy-a", 1);
    noisy.rooms = 1;
    const Scene n = generate_source(noisy).front();
    CHECK(n.size() < static_cast<std::size_t>(noisy.points_per_room));
  }

  TEST_CASE("source config json") {
    SourceConfig c = preset_source("synth-noisy-b", 4);
    c.rooms = 3;
    const SourceConfig back = SourceConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.label_set().size() == 6);
    const SourceConfig p = SourceConfig::from_json(R"({"preset":"synth-clean","rooms":5})");
    CHECK(p.rooms == 5);
    CHECK(p.source_id == "synth-clean");
    CHECK_ERROR_CODE(SourceConfig::from_json(R"({"preset":"nope"})"), ErrorCode::ConfigInvalid);
    CHECK_ERROR_CODE(SourceConfig::from_json(R"({"preset":"synth-clean","rooms":0})"), ErrorCode::ConfigInvalid);
  }

  TEST_CASE("ply round trip") {
    TempDir dir;
    Rng rng(9);
    Scene one = testing::random_scene(1, {2}, rng);
    one.points.rightCols(3) << 0.0, 128.0 / 255.0, 1.0;
    write_ply(one, dir / "one.ply", {"a", "b", "c"});
    const Scene back = read_ply(dir / "one.ply");
    CHECK(back.points == one.points);
    CHECK(back.labels == one.labels);
    CHECK(read_ply_label_names(dir / "one.ply") == std::vector<std::string>{"a", "b", "c"});

    const Scene big = testing::random_scene(2048, {0, 1, 2, -1}, rng);
    write_ply(big, dir / "big.ply");
    const Scene b2 = read_ply(dir / "big.ply");
    REQUIRE(b2.size() == 2048);
    CHECK((b2.points.leftCols(3) - big.points.leftCols(3)).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((b2.points.rightCols(3) - big.points.rightCols(3)).cwiseAbs().maxCoeff() <= 0.5 / 255.0 + 1e-12);
    CHECK(b2.labels == big.labels);
  }

  TEST_CASE("ply errors") {
    TempDir dir;
    {
      std::ofstream out(dir / "nolabel.ply");
      out << "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\n"
             "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n0 0 0 1 2 3\n";
    }
    CHECK_ERROR_CODE(read_ply(dir / "nolabel.ply"), ErrorCode::MissingProperty);
    {
      std::ofstream out(dir / "short.ply");
      out << "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\n"
             "property int label\nend_header\n0 0 0 1\n";
    }
    CHECK_THROWS_AS(read_ply(dir / "short.ply"), Error);
    CHECK_ERROR_CODE(read_ply(dir / "missing.ply"), ErrorCode::IoError);
  }

  TEST_CASE("dataset and manifest") {
    TempDir dir;
    std::vector<SourceConfig> sources = default_sources(2);
    for (auto& s : sources) {
      s.rooms = 3;
      s.points_per_room = 256;
      s.val_rooms = 1;
      s.test_rooms = 1;
    }
    const SceneManifest written = write_dataset(sources, dir.path());
    const SceneManifest m = load_manifest(dir / "manifest.json");
    CHECK(m.entries.size() == 9);
    CHECK(m.source_ids() == std::vector<std::string>{"synth-clean", "synth-noisy-a", "synth-noisy-b"});
    CHECK(load_scenes(m, {Split::Train}).size() == 3);
    CHECK(load_scenes(m, {Split::Val, Split::Test}).size() == 6);
    const auto all = load_scenes(m, {});
    CHECK(all.size() == 9);
    // Global ids: "furniture" only exists in synth-noisy-b.
    const int furniture = m.vocabulary.find(LabelName("furniture"));
    REQUIRE(furniture >= 0);
    for (const auto& s : all) {
      s.validate(m.vocabulary.size());
      const bool has = std::find(s.labels.begin(), s.labels.end(), furniture) != s.labels.end();
      CHECK(has == (s.source_id == "synth-noisy-b"));
    }
  }

  TEST_CASE("manifest errors") {
    TempDir dir;
    auto write = [&](const std::string& text) {
      std::ofstream(dir / "m.json") << text;
      return dir / "m.json";
    };
    std::ofstream(dir / "a.ply") << "";
    const std::string sources = R"("sources":[{"id":"A","labels":["wall"]}])";
    CHECK_ERROR_CODE(load_manifest(write("{" + sources + R"(,"scenes":[]})")), ErrorCode::EmptyManifest);
    CHECK_ERROR_CODE(
        load_manifest(write("{" + sources +
                            R"(,"scenes":[{"scene_id":"x","source_id":"A","path":"a.ply"},{"scene_id":"x","source_id":"A","path":"a.ply"}]})")),
        ErrorCode::DuplicateScene);
    CHECK_ERROR_CODE(load_manifest(write("{" + sources + R"(,"scenes":[{"scene_id":"x","source_id":"B","path":"a.ply"}]})")),
                     ErrorCode::UnknownSource);
    CHECK_ERROR_CODE(load_manifest(write("{" + sources + R"(,"scenes":[{"scene_id":"x","source_id":"A","path":"b.ply"}]})")),
                     ErrorCode::IoError);
    CHECK_ERROR_CODE(load_manifest(write("[")), ErrorCode::ParseError);
  }

  TEST_CASE("dataset config") {
    const auto sources = dataset_config_from_json(R"({"sources":[{"preset":"synth-clean"},{"preset":"synth-noisy-a","seed":4}]})");
    REQUIRE(sources.size() == 2);
    CHECK(sources[1].seed == 5);
    CHECK_ERROR_CODE(dataset_config_from_json(R"({"sources":[]})"), ErrorCode::ConfigInvalid);
  }
}
