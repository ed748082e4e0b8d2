#include "mantra/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mantra/errors.hpp"

namespace mantra {

LabelMask LabelMask::all(std::size_t classes) {
  LabelMask m;
  m.allowed_.assign(classes, 1);
  return m;
}

LabelMask LabelMask::only(std::size_t classes, std::span<const int> allowed_ids) {
  LabelMask m;
  m.allowed_.assign(classes, 0);
  for (int id : allowed_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= classes)
      fail(ErrorCode::IdOutOfRange, "mask id " + std::to_string(id) + " outside " + std::to_string(classes));
    m.allowed_[static_cast<std::size_t>(id)] = 1;
  }
  return m;
}

std::size_t LabelMask::count() const {
  return static_cast<std::size_t>(std::count(allowed_.begin(), allowed_.end(), std::uint8_t{1}));
}

namespace {

Vector row_norms(const Matrix& m, const char* what) {
  Vector norms = m.rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i)
    if (!(norms(i) >= kZeroNorm))
      fail(ErrorCode::ZeroVector, std::string(what) + " row " + std::to_string(i) + " has zero norm");
  return norms;
}

const LabelMask& mask_for(std::span<const LabelMask> masks, Eigen::Index row, Eigen::Index classes) {
  const LabelMask& m = masks.size() == 1 ? masks[0] : masks[static_cast<std::size_t>(row)];
  if (m.size() != static_cast<std::size_t>(classes))
    fail(ErrorCode::DimensionMismatch, "mask size differs from class count");
  if (m.count() == 0) fail(ErrorCode::InvalidMask, "mask allows no class");
  return m;
}

void check_masks(std::span<const LabelMask> masks, Eigen::Index rows) {
  if (masks.size() != 1 && masks.size() != static_cast<std::size_t>(rows))
    fail(ErrorCode::DimensionMismatch, "need one mask per point or a single shared mask");
}

// Writes the masked softmax of row `i` into `out` (length C).
void softmax_row(const SimilarityMatrix& sim, Eigen::Index i, const LabelMask& mask, Eigen::Ref<RowVector, 0, Eigen::InnerStride<>> out) {
  const Eigen::Index classes = sim.values.cols();
  const double inv_t = 1.0 / sim.temperature;
  double max_logit = -std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < classes; ++c)
    if (mask.allowed(static_cast<std::size_t>(c))) max_logit = std::max(max_logit, sim.values(i, c) * inv_t);
  double total = 0.0;
  for (Eigen::Index c = 0; c < classes; ++c) {
    if (mask.allowed(static_cast<std::size_t>(c))) {
      out(c) = std::exp(sim.values(i, c) * inv_t - max_logit);
      total += out(c);
    } else {
      out(c) = 0.0;
    }
  }
  out /= total;
}

}  // namespace

SimilarityMatrix similarity(const Matrix& points, const Matrix& anchors, double temperature) {
  if (points.cols() != anchors.cols())
    fail(ErrorCode::DimensionMismatch, "point dim " + std::to_string(points.cols()) + " != anchor dim " +
                                           std::to_string(anchors.cols()));
  if (!(temperature > 0.0)) fail(ErrorCode::ConfigInvalid, "temperature must be positive");
  const Vector pn = row_norms(points, "point embedding");
  const Vector tn = row_norms(anchors, "anchor");
  Matrix unit_p = pn.cwiseInverse().asDiagonal() * points;
  Matrix unit_t = tn.cwiseInverse().asDiagonal() * anchors;
  SimilarityMatrix sim{unit_p * unit_t.transpose(), temperature};
  sim.values = sim.values.cwiseMax(-1.0).cwiseMin(1.0);
  return sim;
}

SimilarityMatrix similarity(const PointEmbeddings& points, const AnchorMatrix& anchors, double temperature) {
  return similarity(points.values, anchors.vectors, temperature);
}

SimilarityGradient similarity_backward(const Matrix& points, const Matrix& anchors, const Matrix& d_similarity) {
  const Vector pn = row_norms(points, "point embedding");
  const Vector tn = row_norms(anchors, "anchor");
  Matrix unit_p = pn.cwiseInverse().asDiagonal() * points;
  Matrix unit_t = tn.cwiseInverse().asDiagonal() * anchors;

  // d(x/|x|) = (I - x̂ x̂ᵀ) / |x|
  Matrix d_unit_p = d_similarity * unit_t;
  Matrix d_unit_t = d_similarity.transpose() * unit_p;
  SimilarityGradient g;
  Vector proj_p = (d_unit_p.array() * unit_p.array()).rowwise().sum();
  g.d_points = pn.cwiseInverse().asDiagonal() * (d_unit_p - proj_p.asDiagonal() * unit_p);
  Vector proj_t = (d_unit_t.array() * unit_t.array()).rowwise().sum();
  g.d_anchors = tn.cwiseInverse().asDiagonal() * (d_unit_t - proj_t.asDiagonal() * unit_t);
  return g;
}

Matrix probabilities(const SimilarityMatrix& sim, std::span<const LabelMask> masks) {
  check_masks(masks, sim.values.rows());
  Matrix out(sim.values.rows(), sim.values.cols());
  for (Eigen::Index i = 0; i < sim.values.rows(); ++i)
    softmax_row(sim, i, mask_for(masks, i, sim.values.cols()), out.row(i));
  return out;
}

Matrix probabilities(const SimilarityMatrix& sim, const LabelMask& mask) {
  return probabilities(sim, std::span<const LabelMask>(&mask, 1));
}

double ce_loss(const SimilarityMatrix& sim, std::span<const int> gt, std::span<const LabelMask> masks,
               Matrix* d_similarity) {
  const Eigen::Index n = sim.values.rows();
  const Eigen::Index classes = sim.values.cols();
  if (static_cast<Eigen::Index>(gt.size()) != n) fail(ErrorCode::DimensionMismatch, "one ground-truth id per point");
  check_masks(masks, n);

  Eigen::Index labeled = 0;
  for (int g : gt) labeled += g >= 0 ? 1 : 0;
  if (d_similarity) d_similarity->setZero(n, classes);
  if (labeled == 0) return 0.0;

  const double inv_t = 1.0 / sim.temperature;
  const double weight = 1.0 / static_cast<double>(labeled);
  RowVector prob(classes);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int g = gt[static_cast<std::size_t>(i)];
    if (g < 0) continue;
    const LabelMask& mask = mask_for(masks, i, classes);
    if (g >= classes) fail(ErrorCode::IdOutOfRange, "ground truth " + std::to_string(g));
    if (!mask.allowed(static_cast<std::size_t>(g)))
      fail(ErrorCode::GroundTruthMasked, "ground truth class " + std::to_string(g) + " is masked out");

    // log p(g) = s_g/t - logsumexp over allowed classes
    double max_logit = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < classes; ++c)
      if (mask.allowed(static_cast<std::size_t>(c))) max_logit = std::max(max_logit, sim.values(i, c) * inv_t);
    double sum = 0.0;
    for (Eigen::Index c = 0; c < classes; ++c)
      if (mask.allowed(static_cast<std::size_t>(c))) sum += std::exp(sim.values(i, c) * inv_t - max_logit);
    total += max_logit + std::log(sum) - sim.values(i, g) * inv_t;

    if (d_similarity) {
      softmax_row(sim, i, mask, prob);
      prob(g) -= 1.0;
      d_similarity->row(i) = prob * (weight * inv_t);
    }
  }
  return total * weight;
}

double ce_loss(const SimilarityMatrix& sim, std::span<const int> gt, const LabelMask& mask, Matrix* d_similarity) {
  return ce_loss(sim, gt, std::span<const LabelMask>(&mask, 1), d_similarity);
}

std::vector<int> predict(const SimilarityMatrix& sim, const LabelMask& mask) {
  const Eigen::Index classes = sim.values.cols();
  const LabelMask& m = mask_for(std::span<const LabelMask>(&mask, 1), 0, classes);
  std::vector<int> out(static_cast<std::size_t>(sim.values.rows()), -1);
  for (Eigen::Index i = 0; i < sim.values.rows(); ++i) {
    int best = -1;
    for (Eigen::Index c = 0; c < classes; ++c) {
      if (!m.allowed(static_cast<std::size_t>(c))) continue;
      if (best < 0 || sim.values(i, c) > sim.values(i, best)) best = static_cast<int>(c);
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

}  // namespace mantra
