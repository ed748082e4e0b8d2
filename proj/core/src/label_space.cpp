#include "mantra/label_space.hpp"

#include <algorithm>
#include <cctype>

#include <json.hpp>

#include "mantra/errors.hpp"

namespace mantra {

std::string normalize_label(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      pending_space = !out.empty();
      continue;
    }
    if (std::iscntrl(u)) fail(ErrorCode::InvalidLabel, "control character in label");
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(u)));
  }
  if (out.empty()) fail(ErrorCode::InvalidLabel, "empty label name");
  return out;
}

LabelName::LabelName(std::string_view raw) : text_(normalize_label(raw)) {}

std::vector<LabelName> parse_label_list(std::string_view comma_separated) {
  std::vector<LabelName> out;
  std::size_t start = 0;
  while (start <= comma_separated.size()) {
    auto end = comma_separated.find(',', start);
    if (end == std::string_view::npos) end = comma_separated.size();
    out.emplace_back(comma_separated.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

LabelSet register_source(std::string_view name, const std::vector<std::string>& labels) {
  if (labels.empty()) fail(ErrorCode::EmptyLabelSet, "source '" + std::string(name) + "' has no labels");
  LabelSet set{std::string(name), {}};
  for (const auto& raw : labels) {
    LabelName label(raw);
    if (std::find(set.labels.begin(), set.labels.end(), label) != set.labels.end())
      fail(ErrorCode::DuplicateLabel, "'" + label.text() + "' appears twice in source '" + set.source_id + "'");
    set.labels.push_back(std::move(label));
  }
  return set;
}

UnifiedVocabulary build_union(const std::vector<LabelSet>& sets) {
  UnifiedVocabulary vocab;
  for (const auto& set : sets) {
    if (vocab.per_source_.contains(set.source_id))
      fail(ErrorCode::DuplicateSource, "source '" + set.source_id + "' given twice");
    std::vector<int> local_map;
    local_map.reserve(set.labels.size());
    for (const auto& label : set.labels) {
      int global = vocab.find(label);
      if (global < 0) {
        global = static_cast<int>(vocab.entries_.size());
        vocab.entries_.push_back(label);
      }
      vocab.provenance_[label].insert(set.source_id);
      local_map.push_back(global);
    }
    vocab.per_source_.emplace(set.source_id, std::move(local_map));
    vocab.sources_.push_back(set);
  }
  return vocab;
}

int UnifiedVocabulary::find(const LabelName& name) const {
  auto it = std::find(entries_.begin(), entries_.end(), name);
  return it == entries_.end() ? -1 : static_cast<int>(it - entries_.begin());
}

bool UnifiedVocabulary::has_source(std::string_view source_id) const {
  return per_source_.find(source_id) != per_source_.end();
}

const std::vector<int>& UnifiedVocabulary::source_map(std::string_view source_id) const {
  auto it = per_source_.find(source_id);
  if (it == per_source_.end()) fail(ErrorCode::UnknownSource, "unknown source '" + std::string(source_id) + "'");
  return it->second;
}

const LabelSet& UnifiedVocabulary::source(std::string_view source_id) const {
  for (const auto& s : sources_)
    if (s.source_id == source_id) return s;
  fail(ErrorCode::UnknownSource, "unknown source '" + std::string(source_id) + "'");
}

const std::set<std::string>& UnifiedVocabulary::provenance(const LabelName& name) const {
  auto it = provenance_.find(name);
  if (it == provenance_.end()) fail(ErrorCode::InvalidLabel, "'" + name.text() + "' is not in the vocabulary");
  return it->second;
}

int UnifiedVocabulary::local_to_global(std::string_view source_id, int local_id) const {
  const auto& map = source_map(source_id);
  if (local_id < 0 || local_id >= static_cast<int>(map.size()))
    fail(ErrorCode::LocalIdOutOfRange,
         "local id " + std::to_string(local_id) + " outside source '" + std::string(source_id) + "'");
  return map[static_cast<std::size_t>(local_id)];
}

int local_to_global(const UnifiedVocabulary& vocab, std::string_view source_id, int local_id) {
  return vocab.local_to_global(source_id, local_id);
}

std::string UnifiedVocabulary::to_json() const {
  nlohmann::json j;
  j["sources"] = nlohmann::json::array();
  for (const auto& s : sources_) {
    nlohmann::json labels = nlohmann::json::array();
    for (const auto& l : s.labels) labels.push_back(l.text());
    j["sources"].push_back({{"id", s.source_id}, {"labels", labels}});
  }
  return j.dump(2);
}

UnifiedVocabulary UnifiedVocabulary::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("vocabulary: ") + e.what());
  }
  if (!j.contains("sources") || !j["sources"].is_array())
    fail(ErrorCode::ParseError, "vocabulary: missing 'sources' array");
  std::vector<LabelSet> sets;
  try {
    for (const auto& s : j["sources"])
      sets.push_back(register_source(s.at("id").get<std::string>(), s.at("labels").get<std::vector<std::string>>()));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("vocabulary: ") + e.what());
  }
  return build_union(sets);
}

}  // namespace mantra
