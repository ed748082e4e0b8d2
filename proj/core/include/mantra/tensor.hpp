#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace mantra {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Deterministic generator: draws are computed from raw engine bits so the
/// same seed yields the same stream on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  std::string state() const;
  void restore(std::string_view state);

 private:
  std::mt19937_64 engine_;
};

/// Affine layer applied row-wise: y = x * weight + bias.
struct Dense {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out

  Dense() = default;
  Dense(Eigen::Index in, Eigen::Index out) : weight(Matrix::Zero(in, out)), bias(Matrix::Zero(1, out)) {}

  Eigen::Index in_dim() const { return weight.rows(); }
  Eigen::Index out_dim() const { return weight.cols(); }

  Matrix forward(const Matrix& x) const;
  /// Accumulates parameter gradients into `grad` and returns d(loss)/d(x).
  Matrix backward(const Matrix& x, const Matrix& d_out, Dense& grad) const;

  /// Uniform(-1/sqrt(in), 1/sqrt(in)) for weights and biases.
  static Dense fan_in(Eigen::Index in, Eigen::Index out, Rng& rng);
};

inline Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

/// d_out masked by the sign of the pre-activation.
inline Matrix relu_backward(const Matrix& pre, const Matrix& d_out) {
  return (pre.array() > 0.0).select(d_out, 0.0);
}

using TensorVisitor = std::function<void(const std::string& name, Matrix& tensor)>;
using ConstTensorVisitor = std::function<void(const std::string& name, const Matrix& tensor)>;

bool all_finite(const Matrix& m);

/// 64-bit FNV-1a. Stable across runs and platforms.
std::uint64_t stable_hash(std::string_view text);

}  // namespace mantra
