#include "mantra/metrics.hpp"

#include <json.hpp>

#include "mantra/errors.hpp"

namespace mantra {

ConfusionMatrix::ConfusionMatrix(std::size_t classes)
    : classes_(classes), counts_(classes * classes, 0), unmatched_(classes, 0) {
  if (classes == 0) fail(ErrorCode::ConfigInvalid, "confusion matrix needs at least one class");
}

void ConfusionMatrix::accumulate(std::span<const int> gt, std::span<const int> pred) {
  if (gt.size() != pred.size()) fail(ErrorCode::DimensionMismatch, "gt and pred lengths differ");
  const int c = static_cast<int>(classes_);
  // Validate before touching counts so a bad batch leaves the matrix unchanged.
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == kIgnoreLabel) continue;
    if (gt[i] >= c || gt[i] < kUnmatchedLabel)
      fail(ErrorCode::IdOutOfRange, "ground truth id " + std::to_string(gt[i]) + " with " + std::to_string(c) +
                                        " classes");
    if (pred[i] < 0 || pred[i] >= c)
      fail(ErrorCode::IdOutOfRange, "prediction id " + std::to_string(pred[i]) + " with " + std::to_string(c) +
                                        " classes");
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == kIgnoreLabel) continue;
    const auto p = static_cast<std::size_t>(pred[i]);
    if (gt[i] == kUnmatchedLabel)
      ++unmatched_[p];
    else
      ++counts_[static_cast<std::size_t>(gt[i]) * classes_ + p];
    ++total_;
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) fail(ErrorCode::DimensionMismatch, "merging matrices of different size");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  for (std::size_t i = 0; i < classes_; ++i) unmatched_[i] += other.unmatched_[i];
  total_ += other.total_;
}

std::uint64_t ConfusionMatrix::gt_support(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < classes_; ++p) s += at(c, p);
  return s;
}

std::uint64_t ConfusionMatrix::pred_support(std::size_t c) const {
  std::uint64_t s = unmatched_[c];
  for (std::size_t g = 0; g < classes_; ++g) s += at(g, c);
  return s;
}

ConfusionMatrix accumulate(ConfusionMatrix cm, std::span<const int> gt, std::span<const int> pred) {
  cm.accumulate(gt, pred);
  return cm;
}

namespace {
void require_nonempty(const ConfusionMatrix& cm) {
  if (cm.total() == 0) fail(ErrorCode::EmptyMatrix, "no evaluated points");
}

double mean_of_defined(const std::vector<double>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : values) {
    if (v < 0.0) continue;
    sum += v;
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}
}  // namespace

double oa(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  std::uint64_t trace = 0;
  for (std::size_t c = 0; c < cm.classes(); ++c) trace += cm.true_positives(c);
  return static_cast<double>(trace) / static_cast<double>(cm.total());
}

std::vector<double> class_recall(const ConfusionMatrix& cm) {
  std::vector<double> out(cm.classes(), -1.0);
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const auto support = cm.gt_support(c);
    if (support > 0) out[c] = static_cast<double>(cm.true_positives(c)) / static_cast<double>(support);
  }
  return out;
}

std::vector<double> class_iou(const ConfusionMatrix& cm) {
  std::vector<double> out(cm.classes(), -1.0);
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const auto tp = cm.true_positives(c);
    const auto uni = cm.gt_support(c) + cm.pred_support(c) - tp;
    if (uni > 0) out[c] = static_cast<double>(tp) / static_cast<double>(uni);
  }
  return out;
}

double macc(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  return mean_of_defined(class_recall(cm));
}

double miou(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  return mean_of_defined(class_iou(cm));
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["oa"] = overall_accuracy;
  j["macc"] = mean_accuracy;
  j["miou"] = mean_iou;
  j["points"] = points;
  j["classes"] = nlohmann::json::array();
  for (std::size_t c = 0; c < labels.size(); ++c) {
    nlohmann::json row{{"label", labels[c]}};
    row["iou"] = iou[c] < 0 ? nlohmann::json(nullptr) : nlohmann::json(iou[c]);
    row["recall"] = recall[c] < 0 ? nlohmann::json(nullptr) : nlohmann::json(recall[c]);
    j["classes"].push_back(row);
  }
  return j.dump(2);
}

MetricsReport make_report(const ConfusionMatrix& cm, const std::vector<LabelName>& labels) {
  if (labels.size() != cm.classes()) fail(ErrorCode::DimensionMismatch, "label count differs from matrix size");
  MetricsReport r;
  for (const auto& l : labels) r.labels.push_back(l.text());
  r.iou = class_iou(cm);
  r.recall = class_recall(cm);
  r.overall_accuracy = oa(cm);
  r.mean_accuracy = macc(cm);
  r.mean_iou = miou(cm);
  r.points = cm.total();
  return r;
}

}  // namespace mantra
