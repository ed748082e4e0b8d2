#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mantra/label_space.hpp"
#include "mantra/tensor.hpp"

namespace mantra {

struct TokenSequence {
  std::vector<int> tokens;
};

/// Token-embedding lookup for the frozen toy encoder. Ids in [0, vocab_size)
/// index known words; ids in [vocab_size, vocab_size + buckets) are hash
/// buckets for out-of-table words.
class EmbeddingTable {
 public:
  static constexpr int kDefaultBuckets = 1024;
  static constexpr int kDefaultTokenDim = 32;

  /// Seeded random rows for the built-in word list.
  static EmbeddingTable random(std::uint64_t seed, int token_dim = kDefaultTokenDim,
                               int buckets = kDefaultBuckets);
  /// Hand-placed rows: synonyms share a direction, unrelated words are
  /// orthogonal, coarse words ("furniture") sit between their members.
  static EmbeddingTable fixture(std::uint64_t seed = 7, int token_dim = kDefaultTokenDim,
                                int buckets = kDefaultBuckets);

  /// Rebuilds a table from stored rows (checkpoint loading).
  static EmbeddingTable from_rows(std::vector<std::string> words, Matrix rows, Matrix buckets);

  const std::vector<std::string>& words() const noexcept { return words_; }
  int vocab_size() const noexcept { return static_cast<int>(rows_.rows()); }
  int token_dim() const noexcept { return static_cast<int>(rows_.cols()); }
  int bucket_count() const noexcept { return static_cast<int>(buckets_.rows()); }

  TokenSequence tokenize(const LabelName& name) const;
  Eigen::Ref<const RowVector, 0, Eigen::InnerStride<>> row(int token) const;
  int word_id(const std::string& word) const;

  const Matrix& rows() const noexcept { return rows_; }
  const Matrix& buckets() const noexcept { return buckets_; }

 private:
  EmbeddingTable(std::vector<std::string> words, Matrix rows, Matrix buckets);

  std::vector<std::string> words_;
  std::unordered_map<std::string, int> ids_;
  Matrix rows_;
  Matrix buckets_;
};

TokenSequence tokenize(const LabelName& name, const EmbeddingTable& table);

struct CompositionParams {
  Matrix weight;  // token_dim x D
  Matrix bias;    // 1 x D
  bool frozen = true;

  /// Rows of `weight` are orthonormal up to scale, so inner products of
  /// pooled token vectors survive the map; the bias is small.
  static CompositionParams seeded(std::uint64_t seed, int token_dim, int anchor_dim);
};

struct AnchorMatrix {
  std::vector<LabelName> labels;
  Matrix vectors;  // C x D, unnormalized
  bool fixed = false;  // imported from an external model; prompts unavailable

  Eigen::Index dim() const { return vectors.cols(); }
  std::size_t size() const { return labels.size(); }
};

enum class EncoderKind { Random, Fixture };

struct EncoderSpec {
  EncoderKind kind = EncoderKind::Random;
  std::uint64_t seed = 0;
  int token_dim = EmbeddingTable::kDefaultTokenDim;
  int anchor_dim = 128;
  int buckets = EmbeddingTable::kDefaultBuckets;
};

std::string to_string(EncoderKind kind);
EncoderKind encoder_kind_from_string(std::string_view text);

/// Frozen composition F_text([prompt, tokens]) = mean(token vectors) * W + b.
class TextEncoder {
 public:
  explicit TextEncoder(const EncoderSpec& spec);
  TextEncoder(EmbeddingTable table, CompositionParams comp, EncoderSpec spec);

  const EncoderSpec& spec() const noexcept { return spec_; }
  const EmbeddingTable& table() const noexcept { return table_; }
  const CompositionParams& composition() const noexcept { return comp_; }
  int token_dim() const noexcept { return table_.token_dim(); }
  int anchor_dim() const noexcept { return static_cast<int>(comp_.weight.cols()); }

  /// `prompt` is K x token_dim (K may be 0) and is prepended to every label.
  AnchorMatrix encode(const std::vector<LabelName>& labels, const Matrix* prompt = nullptr) const;

  /// Same composition over pre-tokenized labels; callers that encode the
  /// same label list repeatedly tokenize once.
  Matrix encode_tokens(const std::vector<TokenSequence>& tokens, const Matrix* prompt = nullptr) const;

  std::vector<TokenSequence> tokenize_all(const std::vector<LabelName>& labels) const;

  /// Gradient of the loss w.r.t. the prompt rows given d(loss)/d(anchors).
  Matrix prompt_gradient(const std::vector<TokenSequence>& tokens, Eigen::Index prompt_rows,
                         const Matrix& d_anchors) const;

 private:
  EncoderSpec spec_;
  EmbeddingTable table_;
  CompositionParams comp_;
};

AnchorMatrix encode_labels(const std::vector<LabelName>& labels, const Matrix* prompt,
                           const EmbeddingTable& table, const CompositionParams& comp);

/// Text anchor file ("mantra-anchors v1 C D" header) or the binary variant.
AnchorMatrix load_precomputed_anchors(const std::filesystem::path& path);
void save_anchors_text(const AnchorMatrix& anchors, const std::filesystem::path& path);
/// 16-byte header ("MANTRAB1", uint32 C, uint32 D), C*D float32 rows, then
/// C length-prefixed label strings. All little-endian.
void save_anchors_binary(const AnchorMatrix& anchors, const std::filesystem::path& path);

}  // namespace mantra
