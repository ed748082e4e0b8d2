#include <doctest.h>

#include "expect_error.hpp"
#include "mantra/label_space.hpp"

using namespace mantra;

TEST_SUITE("label_space") {
  TEST_CASE("label names are normalized") {
    CHECK(LabelName("  White   Board ").text() == "white board");
    CHECK(LabelName("Wall").text() == "wall");
    CHECK(LabelName("white\tboard").text() == "white board");
    CHECK(LabelName("wall") == LabelName("WALL"));
  }

  TEST_CASE("invalid label names are rejected") {
    CHECK_ERROR_CODE(LabelName(""), ErrorCode::InvalidLabel);
    CHECK_ERROR_CODE(LabelName("   "), ErrorCode::InvalidLabel);
    CHECK_ERROR_CODE(LabelName("bad\x01name"), ErrorCode::InvalidLabel);
  }

  TEST_CASE("comma separated lists keep order") {
    const auto labels = parse_label_list("Wall, floor ,couch");
    REQUIRE(labels.size() == 3);
    CHECK(labels[0].text() == "wall");
    CHECK(labels[1].text() == "floor");
    CHECK(labels[2].text() == "couch");
    CHECK_ERROR_CODE(parse_label_list("wall,,floor"), ErrorCode::InvalidLabel);
  }

  TEST_CASE("register_source") {
    const LabelSet s = register_source("s3dis", {"Wall", "floor", "chair"});
    CHECK(s.source_id == "s3dis");
    REQUIRE(s.size() == 3);
    CHECK(s.labels[0].text() == "wall");
    CHECK_ERROR_CODE(register_source("x", {"chair", "Chair"}), ErrorCode::DuplicateLabel);
    CHECK_ERROR_CODE(register_source("x", {}), ErrorCode::EmptyLabelSet);
  }

  TEST_CASE("build_union deduplicates by name and keeps provenance") {
    const auto vocab = build_union({register_source("A", {"wall", "chair"}), register_source("B", {"chair", "sofa"})});
    REQUIRE(vocab.size() == 3);
    CHECK(vocab.entries()[0].text() == "wall");
    CHECK(vocab.entries()[1].text() == "chair");
    CHECK(vocab.entries()[2].text() == "sofa");
    CHECK(vocab.local_to_global("B", 0) == 1);
    CHECK(local_to_global(vocab, "B", 1) == 2);
    CHECK(vocab.provenance(LabelName("chair")) == std::set<std::string>{"A", "B"});
    CHECK(vocab.find(LabelName("sofa")) == 2);
    CHECK(vocab.find(LabelName("couch")) == -1);
    CHECK(vocab.source_map("A") == std::vector<int>{0, 1});
    CHECK_ERROR_CODE(vocab.local_to_global("B", 5), ErrorCode::LocalIdOutOfRange);
    CHECK_ERROR_CODE(vocab.local_to_global("C", 0), ErrorCode::UnknownSource);
  }

  TEST_CASE("single source and duplicate sources") {
    const auto vocab = build_union({register_source("A", {"wall"})});
    CHECK(vocab.size() == 1);
    CHECK(vocab.provenance(LabelName("wall")) == std::set<std::string>{"A"});
    CHECK_ERROR_CODE(build_union({register_source("A", {"wall"}), register_source("A", {"floor"})}),
                     ErrorCode::DuplicateSource);
  }

  TEST_CASE("json round trip") {
    const auto vocab = build_union({register_source("A", {"wall", "chair"}), register_source("B", {"chair", "sofa"})});
    const auto back = UnifiedVocabulary::from_json(vocab.to_json());
    CHECK(back.entries() == vocab.entries());
    CHECK(back.source_map("B") == vocab.source_map("B"));
    CHECK_ERROR_CODE(UnifiedVocabulary::from_json("{not json"), ErrorCode::ParseError);
  }
}
