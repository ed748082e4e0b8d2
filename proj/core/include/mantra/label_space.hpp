#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mantra {

/// A label name after normalization: lowercase, trimmed, single spaces
/// between words. Construction enforces the invariant.
class LabelName {
 public:
  explicit LabelName(std::string_view raw);

  const std::string& text() const noexcept { return text_; }

  friend bool operator==(const LabelName&, const LabelName&) = default;
  friend auto operator<=>(const LabelName&, const LabelName&) = default;

 private:
  std::string text_;
};

std::string normalize_label(std::string_view raw);

/// Splits "a, b ,c" into normalized names, preserving order.
std::vector<LabelName> parse_label_list(std::string_view comma_separated);

struct LabelSet {
  std::string source_id;
  std::vector<LabelName> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

LabelSet register_source(std::string_view name, const std::vector<std::string>& labels);

class UnifiedVocabulary {
 public:
  UnifiedVocabulary() = default;

  const std::vector<LabelName>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  const std::vector<LabelSet>& sources() const noexcept { return sources_; }
  const LabelSet& source(std::string_view source_id) const;
  bool has_source(std::string_view source_id) const;

  const std::set<std::string>& provenance(const LabelName& name) const;

  int local_to_global(std::string_view source_id, int local_id) const;
  /// Global id of a label name, or -1 if absent.
  int find(const LabelName& name) const;

  /// Global ids owned by a source, indexed by local id.
  const std::vector<int>& source_map(std::string_view source_id) const;

  std::string to_json() const;
  static UnifiedVocabulary from_json(std::string_view text);

  friend UnifiedVocabulary build_union(const std::vector<LabelSet>& sets);

 private:
  std::vector<LabelName> entries_;
  std::map<LabelName, std::set<std::string>> provenance_;
  std::map<std::string, std::vector<int>, std::less<>> per_source_;
  std::vector<LabelSet> sources_;
};

UnifiedVocabulary build_union(const std::vector<LabelSet>& sets);

int local_to_global(const UnifiedVocabulary& vocab, std::string_view source_id, int local_id);

}  // namespace mantra
