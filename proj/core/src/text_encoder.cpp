#include "mantra/text_encoder.hpp"

#include <cmath>
#include <sstream>

#include "mantra/errors.hpp"

namespace mantra {
namespace {

// Words known to the built-in table. Order fixes token ids.
const std::vector<std::string>& builtin_words() {
  static const std::vector<std::string> words = {
      "wall",     "floor",   "ceiling",   "chair",    "seat",    "table",      "desk",
      "sofa",     "couch",   "bookcase",  "bookshelf", "bookstack", "shelf",   "board",
      "whiteboard", "white", "clutter",   "others",   "furniture", "cabinet", "storage",
      "door",     "window",  "bed",       "lamp",     "column",  "beam",       "plant",
      "sink",     "toilet",  "picture",   "curtain",  "counter", "stool",      "armchair",
  };
  return words;
}

struct Concept {
  std::vector<std::string> words;
};

// Each group shares one axis of the token space.
const std::vector<Concept>& fixture_concepts() {
  static const std::vector<Concept> concepts = {
      {{"wall"}},
      {{"floor"}},
      {{"ceiling"}},
      {{"chair", "seat", "stool", "armchair"}},
      {{"table", "desk", "counter"}},
      {{"sofa", "couch"}},
      {{"bookcase", "bookshelf", "bookstack", "shelf"}},
      {{"board", "whiteboard"}},
      {{"white"}},
      {{"clutter"}},
      {{"others"}},
      {{"cabinet"}},
      {{"storage"}},
      {{"door"}},
      {{"window"}},
      {{"bed"}},
      {{"lamp"}},
      {{"column"}},
      {{"beam"}},
      {{"plant"}},
      {{"sink"}},
      {{"toilet"}},
      {{"picture"}},
      {{"curtain"}},
  };
  return concepts;
}

// "furniture" sits between these concept axes.
const std::vector<std::string> kFurnitureMembers = {"chair", "table", "sofa", "bookcase", "cabinet"};

constexpr double kFixtureJitter = 0.1;

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

RowVector unit_gaussian(Eigen::Index dim, Rng& rng) {
  RowVector v = gaussian_matrix(1, dim, 1.0, rng).row(0);
  return v / v.norm();
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::vector<std::string> words, Matrix rows, Matrix buckets)
    : words_(std::move(words)), rows_(std::move(rows)), buckets_(std::move(buckets)) {
  for (std::size_t i = 0; i < words_.size(); ++i) ids_.emplace(words_[i], static_cast<int>(i));
  if (!rows_.allFinite() || !buckets_.allFinite())
    fail(ErrorCode::ConfigInvalid, "embedding table has non-finite rows");
}

EmbeddingTable EmbeddingTable::from_rows(std::vector<std::string> words, Matrix rows, Matrix buckets) {
  if (static_cast<Eigen::Index>(words.size()) != rows.rows() || rows.cols() != buckets.cols() || buckets.rows() == 0)
    fail(ErrorCode::DimensionMismatch, "embedding table rows do not match word list");
  return EmbeddingTable(std::move(words), std::move(rows), std::move(buckets));
}

EmbeddingTable EmbeddingTable::random(std::uint64_t seed, int token_dim, int buckets) {
  if (token_dim <= 0 || buckets <= 0) fail(ErrorCode::ConfigInvalid, "token_dim and buckets must be positive");
  Rng rng(seed);
  const auto& words = builtin_words();
  const double scale = 1.0 / std::sqrt(static_cast<double>(token_dim));
  Matrix rows = gaussian_matrix(static_cast<Eigen::Index>(words.size()), token_dim, scale, rng);
  Matrix bucket_rows = gaussian_matrix(buckets, token_dim, scale, rng);
  return EmbeddingTable(words, std::move(rows), std::move(bucket_rows));
}

EmbeddingTable EmbeddingTable::fixture(std::uint64_t seed, int token_dim, int buckets) {
  const auto& concepts = fixture_concepts();
  if (token_dim < static_cast<int>(concepts.size()))
    fail(ErrorCode::ConfigInvalid, "fixture table needs token_dim >= " + std::to_string(concepts.size()));
  Rng rng(seed);
  const auto& words = builtin_words();
  Matrix rows = Matrix::Zero(static_cast<Eigen::Index>(words.size()), token_dim);

  auto axis_of = [&](const std::string& word) -> int {
    for (std::size_t c = 0; c < concepts.size(); ++c)
      for (const auto& w : concepts[c].words)
        if (w == word) return static_cast<int>(c);
    return -1;
  };

  for (std::size_t i = 0; i < words.size(); ++i) {
    RowVector base = RowVector::Zero(token_dim);
    if (words[i] == "furniture") {
      for (const auto& member : kFurnitureMembers) base(axis_of(member)) = 1.0;
    } else {
      const int axis = axis_of(words[i]);
      if (axis < 0) fail(ErrorCode::ConfigInvalid, "fixture word without concept: " + words[i]);
      base(axis) = 1.0;
    }
    base /= base.norm();
    RowVector v = base + kFixtureJitter * unit_gaussian(token_dim, rng);
    rows.row(static_cast<Eigen::Index>(i)) = v / v.norm();
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(token_dim));
  Matrix bucket_rows = gaussian_matrix(buckets, token_dim, scale, rng);
  return EmbeddingTable(words, std::move(rows), std::move(bucket_rows));
}

int EmbeddingTable::word_id(const std::string& word) const {
  auto it = ids_.find(word);
  if (it != ids_.end()) return it->second;
  return vocab_size() + static_cast<int>(stable_hash(word) % static_cast<std::uint64_t>(bucket_count()));
}

TokenSequence EmbeddingTable::tokenize(const LabelName& name) const {
  TokenSequence seq;
  std::istringstream words(name.text());
  std::string word;
  while (words >> word) seq.tokens.push_back(word_id(word));
  return seq;
}

Eigen::Ref<const RowVector, 0, Eigen::InnerStride<>> EmbeddingTable::row(int token) const {
  if (token < 0 || token >= vocab_size() + bucket_count())
    fail(ErrorCode::IdOutOfRange, "token id " + std::to_string(token));
  if (token < vocab_size()) return rows_.row(token);
  return buckets_.row(token - vocab_size());
}

TokenSequence tokenize(const LabelName& name, const EmbeddingTable& table) { return table.tokenize(name); }

CompositionParams CompositionParams::seeded(std::uint64_t seed, int token_dim, int anchor_dim) {
  if (token_dim <= 0 || anchor_dim <= 0) fail(ErrorCode::ConfigInvalid, "encoder dims must be positive");
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  CompositionParams comp;
  if (anchor_dim >= token_dim) {
    // Orthonormal columns of a Gaussian draw; transposed they form W.
    Matrix g = gaussian_matrix(anchor_dim, token_dim, 1.0, rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(anchor_dim, token_dim);
    comp.weight = q.transpose();
  } else {
    comp.weight = gaussian_matrix(token_dim, anchor_dim, 1.0 / std::sqrt(static_cast<double>(anchor_dim)), rng);
  }
  comp.bias = Matrix(1, anchor_dim);
  for (int j = 0; j < anchor_dim; ++j) comp.bias(0, j) = rng.uniform(-0.005, 0.005);
  comp.frozen = true;
  return comp;
}

std::string to_string(EncoderKind kind) { return kind == EncoderKind::Fixture ? "fixture" : "random"; }

EncoderKind encoder_kind_from_string(std::string_view text) {
  if (text == "fixture") return EncoderKind::Fixture;
  if (text == "random") return EncoderKind::Random;
  fail(ErrorCode::ConfigInvalid, "unknown encoder kind '" + std::string(text) + "'");
}

namespace {
EmbeddingTable make_table(const EncoderSpec& spec) {
  return spec.kind == EncoderKind::Fixture ? EmbeddingTable::fixture(spec.seed, spec.token_dim, spec.buckets)
                                           : EmbeddingTable::random(spec.seed, spec.token_dim, spec.buckets);
}
}  // namespace

TextEncoder::TextEncoder(const EncoderSpec& spec)
    : spec_(spec), table_(make_table(spec)), comp_(CompositionParams::seeded(spec.seed, spec.token_dim, spec.anchor_dim)) {}

TextEncoder::TextEncoder(EmbeddingTable table, CompositionParams comp, EncoderSpec spec)
    : spec_(spec), table_(std::move(table)), comp_(std::move(comp)) {
  if (comp_.weight.rows() != table_.token_dim() || comp_.bias.cols() != comp_.weight.cols())
    fail(ErrorCode::DimensionMismatch, "composition params do not match token dim");
  spec_.token_dim = table_.token_dim();
  spec_.anchor_dim = static_cast<int>(comp_.weight.cols());
}

std::vector<TokenSequence> TextEncoder::tokenize_all(const std::vector<LabelName>& labels) const {
  std::vector<TokenSequence> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(table_.tokenize(l));
  return out;
}

Matrix TextEncoder::encode_tokens(const std::vector<TokenSequence>& tokens, const Matrix* prompt) const {
  const Eigen::Index k = prompt ? prompt->rows() : 0;
  if (prompt && k > 0 && prompt->cols() != token_dim())
    fail(ErrorCode::DimensionMismatch, "prompt token dim " + std::to_string(prompt->cols()) +
                                           " != encoder token dim " + std::to_string(token_dim()));
  RowVector prompt_sum = RowVector::Zero(token_dim());
  if (k > 0) prompt_sum = prompt->colwise().sum();

  Matrix pooled(static_cast<Eigen::Index>(tokens.size()), token_dim());
  for (std::size_t c = 0; c < tokens.size(); ++c) {
    const auto& seq = tokens[c].tokens;
    if (seq.empty()) fail(ErrorCode::InvalidLabel, "label has no tokens");
    RowVector sum = prompt_sum;
    for (int t : seq) sum += table_.row(t);
    pooled.row(static_cast<Eigen::Index>(c)) = sum / static_cast<double>(k + static_cast<Eigen::Index>(seq.size()));
  }
  Matrix anchors = pooled * comp_.weight;
  anchors.rowwise() += comp_.bias.row(0);
  return anchors;
}

AnchorMatrix TextEncoder::encode(const std::vector<LabelName>& labels, const Matrix* prompt) const {
  AnchorMatrix out;
  out.labels = labels;
  out.vectors = encode_tokens(tokenize_all(labels), prompt);
  for (Eigen::Index c = 0; c < out.vectors.rows(); ++c)
    if (out.vectors.row(c).norm() < 1e-12)
      fail(ErrorCode::ZeroVector, "anchor for '" + labels[static_cast<std::size_t>(c)].text() + "' is zero");
  return out;
}

Matrix TextEncoder::prompt_gradient(const std::vector<TokenSequence>& tokens, Eigen::Index prompt_rows,
                                    const Matrix& d_anchors) const {
  if (prompt_rows == 0) return Matrix(0, token_dim());
  // Every prompt row enters each label's mean with weight 1/(K + L_c).
  Matrix d_pooled = d_anchors * comp_.weight.transpose();
  RowVector d_row = RowVector::Zero(token_dim());
  for (std::size_t c = 0; c < tokens.size(); ++c)
    d_row += d_pooled.row(static_cast<Eigen::Index>(c)) /
             static_cast<double>(prompt_rows + static_cast<Eigen::Index>(tokens[c].tokens.size()));
  return d_row.replicate(prompt_rows, 1);
}

AnchorMatrix encode_labels(const std::vector<LabelName>& labels, const Matrix* prompt, const EmbeddingTable& table,
                           const CompositionParams& comp) {
  EncoderSpec spec;
  spec.token_dim = table.token_dim();
  spec.anchor_dim = static_cast<int>(comp.weight.cols());
  spec.buckets = table.bucket_count();
  TextEncoder encoder(table, comp, spec);
  return encoder.encode(labels, prompt);
}

}  // namespace mantra
