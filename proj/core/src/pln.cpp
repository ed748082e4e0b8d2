#include "mantra/pln.hpp"

#include "mantra/errors.hpp"

namespace mantra {

Matrix SceneDescriptor::packed() const {
  Matrix out(1, mean.size() + variance.size());
  out.leftCols(mean.size()) = mean;
  out.rightCols(variance.size()) = variance.array() + kVarianceFloor;
  return out;
}

PlnParams PlnParams::init(const PlnConfig& config, int feature_dim, int token_dim, Rng& rng) {
  if (config.prompt_length < 0 || config.hidden <= 0 || feature_dim <= 0 || token_dim <= 0)
    fail(ErrorCode::ConfigInvalid, "invalid prompt network dims");
  PlnParams p;
  p.prompt_length = config.prompt_length;
  p.token_dim = token_dim;
  if (p.prompt_length == 0) return p;
  p.hidden = Dense::fan_in(2 * feature_dim, config.hidden, rng);
  p.out = Dense::fan_in(config.hidden, static_cast<Eigen::Index>(config.prompt_length) * token_dim, rng);
  return p;
}

PlnParams PlnParams::zeros_like() const {
  PlnParams z;
  z.prompt_length = prompt_length;
  z.token_dim = token_dim;
  z.hidden = Dense(hidden.in_dim(), hidden.out_dim());
  z.out = Dense(out.in_dim(), out.out_dim());
  return z;
}

void PlnParams::visit(const std::string& prefix, const TensorVisitor& fn) {
  if (!active()) return;
  fn(prefix + "hidden.weight", hidden.weight);
  fn(prefix + "hidden.bias", hidden.bias);
  fn(prefix + "out.weight", out.weight);
  fn(prefix + "out.bias", out.bias);
}

void PlnParams::visit(const std::string& prefix, const ConstTensorVisitor& fn) const {
  const_cast<PlnParams*>(this)->visit(prefix, TensorVisitor([&](const std::string& n, Matrix& m) { fn(n, m); }));
}

SceneDescriptor summarize(const PointFeatures& features) {
  const auto& f = features.values;
  if (f.rows() == 0) fail(ErrorCode::EmptyScene, "cannot summarize zero points");
  SceneDescriptor desc;
  desc.mean = f.colwise().mean();
  Matrix centered = f.rowwise() - desc.mean;
  desc.variance = centered.array().square().colwise().sum() / static_cast<double>(f.rows());
  return desc;
}

Matrix summarize_backward(const PointFeatures& features, const SceneDescriptor& desc, const Matrix& d_packed) {
  const auto& f = features.values;
  const Eigen::Index d = f.cols();
  const double inv_n = 1.0 / static_cast<double>(f.rows());
  const RowVector d_mean = d_packed.leftCols(d);
  const RowVector d_var = d_packed.rightCols(d);
  Matrix centered = f.rowwise() - desc.mean;
  Matrix out = (centered.array().rowwise() * (2.0 * inv_n * d_var).array()).matrix();
  out.rowwise() += inv_n * d_mean;
  return out;
}

PromptTokens generate_prompt(const SceneDescriptor& desc, const PlnParams& params, PlnTrace* trace) {
  if (!params.active()) return PromptTokens{Matrix(0, params.token_dim)};
  Matrix input = desc.packed();
  if (input.cols() != params.hidden.in_dim())
    fail(ErrorCode::DimensionMismatch, "descriptor dim " + std::to_string(input.cols()) + " != prompt network input " +
                                           std::to_string(params.hidden.in_dim()));
  Matrix hidden_pre = params.hidden.forward(input);
  Matrix flat = params.out.forward(relu(hidden_pre));
  // Row-major reshape: token k is flat[k*token_dim, (k+1)*token_dim).
  Matrix tokens(params.prompt_length, params.token_dim);
  for (int k = 0; k < params.prompt_length; ++k)
    tokens.row(k) = flat.block(0, static_cast<Eigen::Index>(k) * params.token_dim, 1, params.token_dim);
  if (trace) {
    trace->input = std::move(input);
    trace->hidden_pre = std::move(hidden_pre);
  }
  return PromptTokens{std::move(tokens)};
}

Matrix pln_backward(const PlnTrace& trace, const PlnParams& params, const Matrix& d_tokens, PlnParams& grad) {
  if (!params.active()) return Matrix::Zero(1, trace.input.cols());
  Matrix d_flat(1, static_cast<Eigen::Index>(params.prompt_length) * params.token_dim);
  for (int k = 0; k < params.prompt_length; ++k)
    d_flat.block(0, static_cast<Eigen::Index>(k) * params.token_dim, 1, params.token_dim) = d_tokens.row(k);
  Matrix d_hidden = params.out.backward(relu(trace.hidden_pre), d_flat, grad.out);
  Matrix d_hidden_pre = relu_backward(trace.hidden_pre, d_hidden);
  return params.hidden.backward(trace.input, d_hidden_pre, grad.hidden);
}

}  // namespace mantra
