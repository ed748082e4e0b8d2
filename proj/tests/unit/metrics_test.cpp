#include <doctest.h>

#include "expect_error.hpp"
#include "mantra/metrics.hpp"

using namespace mantra;

TEST_SUITE("metrics") {
  TEST_CASE("accumulate") {
    ConfusionMatrix cm(3);
    const std::vector<int> g0{0}, p0{0};
    cm.accumulate(g0, p0);
    CHECK(cm.at(0, 0) == 1);
    const std::vector<int> ignored{-1};
    cm.accumulate(ignored, p0);
    CHECK(cm.total() == 1);
    const std::vector<int> out_of_range{5};
    CHECK_ERROR_CODE(cm.accumulate(out_of_range, p0), ErrorCode::IdOutOfRange);
    CHECK(cm.total() == 1);
    const std::vector<int> bad_pred{7};
    CHECK_ERROR_CODE(cm.accumulate(g0, bad_pred), ErrorCode::IdOutOfRange);
  }

  TEST_CASE("worked example") {
    ConfusionMatrix cm(2);
    const std::vector<int> gt{0, 0, 1, 1}, pred{0, 1, 1, 1};
    cm.accumulate(gt, pred);
    CHECK(oa(cm) == doctest::Approx(0.75));
    CHECK(macc(cm) == doctest::Approx(0.75));
    CHECK(miou(cm) == doctest::Approx(0.583333333333).epsilon(1e-9));
  }

  TEST_CASE("perfect and swapped") {
    ConfusionMatrix perfect(3);
    const std::vector<int> gt{0, 1, 2, 2};
    perfect.accumulate(gt, gt);
    CHECK(oa(perfect) == 1.0);
    CHECK(macc(perfect) == 1.0);
    CHECK(miou(perfect) == 1.0);

    ConfusionMatrix swapped(2);
    const std::vector<int> g{0, 1, 0}, p{1, 0, 1};
    swapped.accumulate(g, p);
    CHECK(miou(swapped) == 0.0);
    CHECK(oa(swapped) == 0.0);
  }

  TEST_CASE("unmatched ground truth") {
    ConfusionMatrix cm(2);
    const std::vector<int> gt{kUnmatchedLabel, 0, 1}, pred{0, 0, 1};
    cm.accumulate(gt, pred);
    CHECK(cm.total() == 3);
    CHECK(oa(cm) == doctest::Approx(2.0 / 3.0));
    CHECK(macc(cm) == 1.0);
    CHECK(class_iou(cm)[0] == doctest::Approx(0.5));
    CHECK(class_iou(cm)[1] == 1.0);
  }

  TEST_CASE("empty matrix and merge") {
    ConfusionMatrix a(2), b(2);
    CHECK_ERROR_CODE(oa(a), ErrorCode::EmptyMatrix);
    CHECK_ERROR_CODE(miou(a), ErrorCode::EmptyMatrix);
    const std::vector<int> g1{0, 1}, p1{0, 0}, g2{1}, p2{1};
    a.accumulate(g1, p1);
    b.accumulate(g2, p2);
    a.merge(b);
    ConfusionMatrix all(2);
    const std::vector<int> g{0, 1, 1}, p{0, 0, 1};
    all.accumulate(g, p);
    CHECK(miou(a) == miou(all));
    CHECK(a.total() == 3);
    CHECK_ERROR_CODE(a.merge(ConfusionMatrix(3)), ErrorCode::DimensionMismatch);
  }

  TEST_CASE("class without support is skipped") {
    ConfusionMatrix cm(3);
    const std::vector<int> gt{0, 1}, pred{0, 1};
    cm.accumulate(gt, pred);
    CHECK(class_iou(cm)[2] == -1.0);
    CHECK(class_recall(cm)[2] == -1.0);
    CHECK(miou(cm) == 1.0);
  }

  TEST_CASE("report json") {
    ConfusionMatrix cm(2);
    const std::vector<int> gt{0, 0, 1, 1}, pred{0, 1, 1, 1};
    cm.accumulate(gt, pred);
    const MetricsReport r = make_report(cm, {LabelName("wall"), LabelName("floor")});
    CHECK(r.points == 4);
    const std::string j = r.to_json();
    CHECK(j.find("\"miou\"") != std::string::npos);
    CHECK(j.find("\"floor\"") != std::string::npos);
  }
}
