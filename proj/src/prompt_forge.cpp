#include "xprobe/prompt_forge.hpp"

#include <cctype>
#include <fstream>

namespace xprobe {
namespace {

using nlohmann::json;

std::size_t placeholder_position(std::string_view tmpl) {
  const std::size_t n = count_placeholders(tmpl);
  if (n == 0) {
    throw PromptError("template has no " + std::string(kSubjectPlaceholder) + " placeholder: " +
                      std::string(tmpl));
  }
  if (n > 1) {
    throw PromptError("template has " + std::to_string(n) + " placeholders: " + std::string(tmpl));
  }
  return tmpl.find(kSubjectPlaceholder);
}

std::string fill(std::string_view tmpl, std::string_view subject) {
  const std::size_t pos = placeholder_position(tmpl);
  std::string out;
  out.reserve(tmpl.size() + subject.size());
  out.append(tmpl.substr(0, pos));
  out.append(subject);
  out.append(tmpl.substr(pos + kSubjectPlaceholder.size()));
  return out;
}

const std::string& require_surface(const Fact& fact, EntityRole role, std::string_view language) {
  if (const std::string* s = fact.surface(role, language)) return *s;
  throw PromptError("fact " + fact.id + " has no " + std::string(to_string(role)) + " in " +
                    std::string(language));
}

std::string render_variant(std::string_view tmpl, const Fact& fact, std::string_view language,
                           Variant variant, const std::optional<std::string>& pivot,
                           bool dedup) {
  const std::string& native = require_surface(fact, EntityRole::subject, language);
  switch (variant) {
    case Variant::base:
      return render_base(tmpl, native);
    case Variant::subsub:
      return apply_subsub(tmpl, native, require_surface(fact, EntityRole::subject, *pivot));
    case Variant::subinj:
      return apply_subinj(tmpl, native, require_surface(fact, EntityRole::subject, *pivot), dedup);
  }
  throw PromptError("unknown variant");
}

}  // namespace

void to_json(json& out, const PromptSpec& spec) {
  out = json{{"task", to_string(spec.task)},
             {"text", spec.text},
             {"fact_id", spec.fact_id},
             {"relation", spec.relation},
             {"exemplar_ids", spec.exemplar_ids},
             {"expected_answer", spec.expected_answer}};
  if (spec.task == Task::translation) {
    out["source_lang"] = spec.source_lang;
    out["target_lang"] = spec.target_lang;
    if (spec.role) out["entity_role"] = to_string(*spec.role);
  } else {
    out["language"] = spec.target_lang;
    if (spec.variant) out["variant"] = to_string(*spec.variant);
  }
  out["pivot_lang"] = spec.pivot_lang ? json(*spec.pivot_lang) : json(nullptr);
}

void from_json(const json& in, PromptSpec& spec) {
  spec = PromptSpec{};
  spec.task = parse_task(in.at("task").get<std::string>());
  spec.text = in.at("text").get<std::string>();
  spec.fact_id = in.at("fact_id").get<std::string>();
  spec.relation = in.value("relation", std::string{});
  spec.exemplar_ids = in.value("exemplar_ids", std::vector<std::string>{});
  spec.expected_answer = in.at("expected_answer").get<std::string>();
  if (spec.task == Task::translation) {
    spec.source_lang = in.at("source_lang").get<std::string>();
    spec.target_lang = in.at("target_lang").get<std::string>();
    if (in.contains("entity_role")) spec.role = parse_role(in.at("entity_role").get<std::string>());
  } else {
    spec.source_lang = spec.target_lang = in.at("language").get<std::string>();
    if (in.contains("variant")) spec.variant = parse_variant(in.at("variant").get<std::string>());
  }
  if (in.contains("pivot_lang") && !in.at("pivot_lang").is_null()) {
    spec.pivot_lang = in.at("pivot_lang").get<std::string>();
  }
}

LanguageLabels LanguageLabels::bundled() {
  return LanguageLabels({
      {"ara_Arab", "العربية"},
      {"cat_Latn", "Català"},
      {"zho_Hans", "中文"},
      {"nld_Latn", "Nederlands"},
      {"eng_Latn", "English"},
      {"fra_Latn", "Français"},
      {"ell_Grek", "Ελληνικά"},
      {"heb_Hebr", "עברית"},
      {"hun_Latn", "Magyar"},
      {"jpn_Jpan", "日本語"},
      {"kor_Kore", "한국어"},
      {"fas_Arab", "فارسی"},
      {"rus_Cyrl", "Русский"},
      {"spa_Latn", "Español"},
      {"tur_Latn", "Türkçe"},
      {"ukr_Cyrl", "Українська"},
      {"vie_Latn", "Tiếng Việt"},
  });
}

LanguageLabels LanguageLabels::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read labels file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(path.string() + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object()) throw Error(path.string() + ": expected an object of language -> label");
  std::map<std::string, std::string> labels;
  for (const auto& [lang, label] : doc.items()) {
    if (!label.is_string()) throw Error(path.string() + ": label for " + lang + " is not a string");
    labels.emplace(lang, label.get<std::string>());
  }
  return LanguageLabels(std::move(labels));
}

LanguageLabels LanguageLabels::with_overrides(const LanguageLabels& overrides) const {
  LanguageLabels merged = *this;
  for (const auto& [lang, label] : overrides.labels_) merged.labels_[lang] = label;
  return merged;
}

const std::string& LanguageLabels::label(std::string_view language) const {
  auto it = labels_.find(language);
  if (it == labels_.end()) throw PromptError("no label for language " + std::string(language));
  return it->second;
}

bool LanguageLabels::contains(std::string_view language) const {
  return labels_.find(language) != labels_.end();
}

std::vector<std::string> LanguageLabels::missing(std::span<const std::string> languages) const {
  std::vector<std::string> out;
  for (const auto& lang : languages) {
    if (!contains(lang)) out.push_back(lang);
  }
  return out;
}

std::string render_base(std::string_view tmpl, std::string_view subject) {
  return fill(tmpl, subject);
}

std::string apply_subsub(std::string_view tmpl, std::string_view /*subject_native*/,
                         std::string_view subject_pivot) {
  if (subject_pivot.empty()) throw PromptError("empty pivot subject");
  return fill(tmpl, subject_pivot);
}

std::string apply_subinj(std::string_view tmpl, std::string_view subject_native,
                         std::string_view subject_pivot, bool dedup) {
  if (subject_pivot.empty()) throw PromptError("empty pivot subject");
  if (dedup && subject_native == subject_pivot) return fill(tmpl, subject_native);
  std::string injected;
  injected.reserve(subject_native.size() + subject_pivot.size() + 3);
  injected.append(subject_native).append(" (").append(subject_pivot).append(")");
  // Keep the parenthesis off directly attached text, e.g. "フランス (France) の首都".
  const std::size_t after = placeholder_position(tmpl) + kSubjectPlaceholder.size();
  if (after < tmpl.size()) {
    const unsigned char next = static_cast<unsigned char>(tmpl[after]);
    if (next >= 0x80 || std::isalnum(next)) injected.push_back(' ');
  }
  return fill(tmpl, injected);
}

PromptSpec build_translation_prompt(const Fact& fact, EntityRole role, std::string_view source,
                                    std::string_view target, std::span<const Fact> exemplars,
                                    const LanguageLabels& labels) {
  if (source == target) {
    throw PromptError("translation source and target are both " + std::string(source));
  }
  const std::string& src_label = labels.label(source);
  const std::string& tgt_label = labels.label(target);

  PromptSpec spec;
  spec.task = Task::translation;
  spec.fact_id = fact.id;
  spec.relation = fact.relation;
  spec.source_lang = source;
  spec.target_lang = target;
  spec.role = role;
  spec.expected_answer = require_surface(fact, role, target);
  const std::string& query = require_surface(fact, role, source);

  for (const Fact& ex : exemplars) {
    if (ex.id == fact.id) throw PromptError("fact " + fact.id + " used as its own exemplar");
    spec.text += src_label + ": " + require_surface(ex, role, source) + " - " + tgt_label + ": " +
                 require_surface(ex, role, target) + "\n";
    spec.exemplar_ids.push_back(ex.id);
  }
  spec.text += src_label + ": " + query + " - " + tgt_label + ": ";
  return spec;
}

PromptSpec build_recall_prompt(const Fact& fact, std::string_view language, Variant variant,
                               const std::optional<std::string>& pivot,
                               std::span<const Fact> exemplars, const FactStore& templates,
                               const RecallOptions& options) {
  const std::string* tmpl = templates.template_for(fact.relation, language);
  if (!tmpl) {
    throw PromptError("no template for relation " + fact.relation + " in " +
                      std::string(language));
  }
  if (variant != Variant::base && !pivot) {
    throw PromptError("variant " + std::string(to_string(variant)) + " needs a pivot language");
  }

  PromptSpec spec;
  spec.task = Task::recall;
  spec.fact_id = fact.id;
  spec.relation = fact.relation;
  spec.source_lang = spec.target_lang = language;
  spec.variant = variant;
  if (variant != Variant::base) spec.pivot_lang = pivot;
  spec.expected_answer = require_surface(fact, EntityRole::object, language);

  const Variant exemplar_variant = options.transform_exemplars ? variant : Variant::base;
  for (const Fact& ex : exemplars) {
    if (ex.id == fact.id) throw PromptError("fact " + fact.id + " used as its own exemplar");
    if (ex.relation != fact.relation) {
      throw PromptError("exemplar " + ex.id + " has relation " + ex.relation + ", expected " +
                        fact.relation);
    }
    spec.text += render_variant(*tmpl, ex, language, exemplar_variant, pivot,
                                options.dedup_injection);
    spec.text += " " + require_surface(ex, EntityRole::object, language) + "\n";
    spec.exemplar_ids.push_back(ex.id);
  }
  spec.text += render_variant(*tmpl, fact, language, variant, pivot, options.dedup_injection);
  return spec;
}

}  // namespace xprobe
