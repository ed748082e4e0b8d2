#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mantra/backbone.hpp"
#include "mantra/tensor.hpp"
#include "mantra/text_encoder.hpp"

namespace mantra {

inline constexpr double kDefaultTemperature = 0.1;
inline constexpr double kZeroNorm = 1e-12;

struct SimilarityMatrix {
  Matrix values;  // N x C cosine similarities
  double temperature = kDefaultTemperature;
};

/// Which classes a point may be assigned to (its source's label set).
class LabelMask {
 public:
  LabelMask() = default;
  static LabelMask all(std::size_t classes);
  static LabelMask only(std::size_t classes, std::span<const int> allowed_ids);

  std::size_t size() const noexcept { return allowed_.size(); }
  bool allowed(std::size_t c) const { return allowed_[c] != 0; }
  std::size_t count() const;

 private:
  std::vector<std::uint8_t> allowed_;
};

SimilarityMatrix similarity(const Matrix& points, const Matrix& anchors, double temperature = kDefaultTemperature);
SimilarityMatrix similarity(const PointEmbeddings& points, const AnchorMatrix& anchors,
                            double temperature = kDefaultTemperature);

struct SimilarityGradient {
  Matrix d_points;
  Matrix d_anchors;
};

SimilarityGradient similarity_backward(const Matrix& points, const Matrix& anchors, const Matrix& d_similarity);

/// Masked temperature softmax per row; masked entries are exactly zero.
/// `masks` holds one mask per row, or a single mask shared by all rows.
Matrix probabilities(const SimilarityMatrix& sim, std::span<const LabelMask> masks);
Matrix probabilities(const SimilarityMatrix& sim, const LabelMask& mask);

/// Mean over labeled points (gt != -1) of -log p(gt | point). If `d_similarity`
/// is given it receives d(loss)/d(S).
double ce_loss(const SimilarityMatrix& sim, std::span<const int> gt, std::span<const LabelMask> masks,
               Matrix* d_similarity = nullptr);
double ce_loss(const SimilarityMatrix& sim, std::span<const int> gt, const LabelMask& mask,
               Matrix* d_similarity = nullptr);

/// Argmax over allowed classes, ties to the lowest index.
std::vector<int> predict(const SimilarityMatrix& sim, const LabelMask& mask);

}  // namespace mantra
