#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "xprobe/common.hpp"
#include "xprobe/fact_store.hpp"

namespace xprobe {

/// A fully rendered prompt plus everything needed to judge and replay it.
struct PromptSpec {
  Task task = Task::recall;
  std::string text;
  std::string fact_id;
  std::string relation;
  // Translation: source_lang -> target_lang. Recall: both hold the query language.
  std::string source_lang;
  std::string target_lang;
  std::optional<EntityRole> role;   // translation only
  std::optional<Variant> variant;   // recall only
  std::optional<std::string> pivot_lang;
  std::vector<std::string> exemplar_ids;
  std::string expected_answer;

  const std::string& language() const { return target_lang; }
  bool operator==(const PromptSpec&) const = default;
};

void to_json(nlohmann::json& out, const PromptSpec& spec);
void from_json(const nlohmann::json& in, PromptSpec& spec);

/// Self-names used as line labels in translation prompts.
class LanguageLabels {
 public:
  LanguageLabels() = default;
  explicit LanguageLabels(const std::map<std::string, std::string>& labels)
      : labels_(labels.begin(), labels.end()) {}

  /// Self-names for the seventeen bundled language codes.
  static LanguageLabels bundled();
  /// A JSON object of language code -> label.
  static LanguageLabels load(const std::filesystem::path& path);

  LanguageLabels with_overrides(const LanguageLabels& overrides) const;

  const std::string& label(std::string_view language) const;
  bool contains(std::string_view language) const;
  /// Declared languages without a label.
  std::vector<std::string> missing(std::span<const std::string> languages) const;

 private:
  std::map<std::string, std::string, std::less<>> labels_;
};

/// Template with the placeholder replaced by `subject` verbatim.
std::string render_base(std::string_view tmpl, std::string_view subject);

/// Replaces the native subject by its pivot-language form. `subject_native`
/// is accepted for symmetry with apply_subinj and is not used.
std::string apply_subsub(std::string_view tmpl, std::string_view subject_native,
                         std::string_view subject_pivot);

/// Renders "<native> (<pivot>)" in the subject slot, plus one space when the
/// template continues with a letter or a non-ASCII character. With `dedup` set
/// and identical forms, renders the native form alone.
std::string apply_subinj(std::string_view tmpl, std::string_view subject_native,
                         std::string_view subject_pivot, bool dedup = false);

struct RecallOptions {
  /// Apply the query's variant to the exemplar subjects as well.
  bool transform_exemplars = true;
  /// Collapse "X (X)" to "X" under subinj.
  bool dedup_injection = false;
};

PromptSpec build_translation_prompt(const Fact& fact, EntityRole role, std::string_view source,
                                    std::string_view target, std::span<const Fact> exemplars,
                                    const LanguageLabels& labels);

PromptSpec build_recall_prompt(const Fact& fact, std::string_view language, Variant variant,
                               const std::optional<std::string>& pivot,
                               std::span<const Fact> exemplars, const FactStore& templates,
                               const RecallOptions& options = {});

}  // namespace xprobe
