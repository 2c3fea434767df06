#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "xprobe/common.hpp"

namespace xprobe {

inline constexpr std::string_view kSubjectPlaceholder = "{subject}";

/// One language-agnostic triple with its per-language subject/object surface forms.
struct Fact {
  std::string id;
  std::string relation;
  std::map<std::string, std::string> subjects;
  std::map<std::string, std::string> objects;

  /// Surface form of `role` in `language`, or nullptr when the fact has none.
  const std::string* surface(EntityRole role, std::string_view language) const;
  bool has(EntityRole role, std::string_view language) const { return surface(role, language) != nullptr; }
  /// True when both subject and object are realized in `language`.
  bool realized_in(std::string_view language) const;

  bool operator==(const Fact&) const = default;
};

struct PromptTemplate {
  std::string relation;
  std::string language;
  std::string text;

  bool operator==(const PromptTemplate&) const = default;
};

/// A completeness problem found by validate(). Never fatal.
struct Issue {
  enum class Kind { missing_subject, missing_object, missing_template };

  Kind kind;
  std::string fact_id;  // empty for missing_template
  std::string relation;
  std::string language;

  std::string message() const;
  bool operator==(const Issue&) const = default;
};

/// Number of occurrences of the subject placeholder in `text`.
std::size_t count_placeholders(std::string_view text);

/// Immutable, indexed dataset. Construction checks the hard invariants
/// (unique ids, declared languages, non-empty surfaces, one placeholder per
/// template, unique (relation, language) templates) and throws DatasetError.
class FactStore {
 public:
  FactStore(std::vector<std::string> languages, std::vector<Fact> facts,
            std::vector<PromptTemplate> templates);

  const std::vector<std::string>& languages() const { return languages_; }
  std::span<const Fact> facts() const { return facts_; }
  std::span<const PromptTemplate> templates() const { return templates_; }
  const std::map<std::string, std::size_t>& relation_counts() const { return relation_counts_; }

  bool declares(std::string_view language) const;
  const Fact* find(std::string_view id) const;
  const Fact& at(std::string_view id) const;
  const std::string* template_for(std::string_view relation, std::string_view language) const;

  /// Ids of facts lacking a subject or object realization in some declared language.
  std::vector<std::string> flagged_fact_ids() const;

  bool operator==(const FactStore& other) const;

 private:
  std::vector<std::string> languages_;
  std::vector<Fact> facts_;
  std::vector<PromptTemplate> templates_;
  std::map<std::string, std::size_t> relation_counts_;
  std::unordered_map<std::string, std::size_t> fact_index_;
  std::map<std::pair<std::string, std::string>, std::size_t, std::less<>> template_index_;
};

/// All unordered pairs in declaration order: n*(n-1)/2 of them.
std::vector<LanguagePair> enumerate_pairs(std::span<const std::string> languages);

/// Reads facts.json, templates.json and languages.json from a dataset root.
FactStore load_dataset(const std::filesystem::path& root);

/// Writes the three dataset files under `root` (created if needed).
void save_dataset(const FactStore& store, const std::filesystem::path& root);

std::vector<Issue> validate(const FactStore& store);

/// Translation exemplars: facts realizing `role` in both languages.
struct TranslationCriterion {
  std::string source;
  std::string target;
  EntityRole role = EntityRole::subject;
};

/// Recall exemplars: facts of `relation` realized in `language`; when `pivot`
/// is set the subject must also be realized in the pivot language.
struct RecallCriterion {
  std::string relation;
  std::string language;
  std::optional<std::string> pivot;
};

using ExemplarCriterion = std::variant<TranslationCriterion, RecallCriterion>;

std::string describe(const ExemplarCriterion& criterion);

/// Facts matching `criterion`, in dataset order.
std::vector<const Fact*> eligible_exemplars(const FactStore& store, const ExemplarCriterion& criterion);

/// Seeded uniform draw of `k` distinct eligible facts, never including `exclude`.
/// Throws DatasetError when fewer than `k` are eligible.
std::vector<Fact> sample_exemplars(const FactStore& store, const ExemplarCriterion& criterion,
                                   std::size_t k, std::string_view exclude, std::uint64_t seed);

}  // namespace xprobe
