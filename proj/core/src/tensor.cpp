#include "mantra/tensor.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "mantra/errors.hpp"

namespace mantra {

double Rng::normal() {
  // Box-Muller; u1 is kept away from zero.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) return 0;
  return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::restore(std::string_view state) {
  std::istringstream is{std::string(state)};
  is >> engine_;
  if (!is) fail(ErrorCode::ParseError, "malformed RNG state");
}

Matrix Dense::forward(const Matrix& x) const {
  Matrix y = x * weight;
  y.rowwise() += bias.row(0);
  return y;
}

Matrix Dense::backward(const Matrix& x, const Matrix& d_out, Dense& grad) const {
  grad.weight.noalias() += x.transpose() * d_out;
  grad.bias += d_out.colwise().sum();
  return d_out * weight.transpose();
}

Dense Dense::fan_in(Eigen::Index in, Eigen::Index out, Rng& rng) {
  Dense layer(in, out);
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(in, 1)));
  for (Eigen::Index i = 0; i < in; ++i)
    for (Eigen::Index j = 0; j < out; ++j) layer.weight(i, j) = rng.uniform(-bound, bound);
  for (Eigen::Index j = 0; j < out; ++j) layer.bias(0, j) = rng.uniform(-bound, bound);
  return layer;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace mantra
