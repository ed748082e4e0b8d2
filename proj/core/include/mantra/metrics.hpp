#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mantra/label_space.hpp"

namespace mantra {

/// Ground-truth sentinel: point is unlabeled and never counted.
inline constexpr int kIgnoreLabel = -1;
/// Ground-truth sentinel: point is labeled, but with a class outside the
/// evaluation label set. It counts toward the OA denominator and as a false
/// positive for whatever it is predicted as, but forms no class of its own.
inline constexpr int kUnmatchedLabel = -2;

/// Rows are ground truth, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);

  std::size_t classes() const noexcept { return classes_; }
  std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * classes_ + pred]; }
  std::uint64_t unmatched(std::size_t pred) const { return unmatched_[pred]; }
  std::uint64_t total() const noexcept { return total_; }

  void accumulate(std::span<const int> gt, std::span<const int> pred);
  void merge(const ConfusionMatrix& other);

  std::uint64_t true_positives(std::size_t c) const { return at(c, c); }
  std::uint64_t gt_support(std::size_t c) const;
  std::uint64_t pred_support(std::size_t c) const;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::uint64_t> unmatched_;
  std::uint64_t total_ = 0;
};

ConfusionMatrix accumulate(ConfusionMatrix cm, std::span<const int> gt, std::span<const int> pred);

double oa(const ConfusionMatrix& cm);
/// Mean recall over classes with ground-truth support.
double macc(const ConfusionMatrix& cm);
/// Mean IoU over classes present in ground truth or predictions.
double miou(const ConfusionMatrix& cm);

/// Per-class IoU, or -1 when the class has no support at all.
std::vector<double> class_iou(const ConfusionMatrix& cm);
/// Per-class recall, or -1 without ground-truth support.
std::vector<double> class_recall(const ConfusionMatrix& cm);

struct MetricsReport {
  std::vector<std::string> labels;
  std::vector<double> iou;
  std::vector<double> recall;
  double overall_accuracy = 0.0;
  double mean_accuracy = 0.0;
  double mean_iou = 0.0;
  std::uint64_t points = 0;

  std::string to_json() const;
};

MetricsReport make_report(const ConfusionMatrix& cm, const std::vector<LabelName>& labels);

}  // namespace mantra
