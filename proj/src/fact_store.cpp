#include "xprobe/fact_store.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace xprobe {
namespace {

using nlohmann::json;

bool blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  });
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DatasetError(path.filename().string() + ": invalid JSON: " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& value) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write " + path.string());
  out << value.dump(2) << '\n';
}

std::map<std::string, std::string> surface_map(const json& record, std::size_t index,
                                               const char* field) {
  auto fail = [&](const std::string& why) {
    return DatasetError("facts.json: record " + std::to_string(index) + ": field '" + field +
                        "': " + why);
  };
  auto it = record.find(field);
  if (it == record.end()) throw fail("missing");
  if (!it->is_object()) throw fail("expected an object of language -> string");
  std::map<std::string, std::string> out;
  for (const auto& [lang, value] : it->items()) {
    if (!value.is_string()) throw fail("value for '" + lang + "' is not a string");
    out.emplace(lang, value.get<std::string>());
  }
  return out;
}

std::string string_field(const json& record, std::size_t index, const char* field) {
  auto it = record.find(field);
  if (it == record.end() || !it->is_string()) {
    throw DatasetError("facts.json: record " + std::to_string(index) + ": field '" + field +
                       "': missing or not a string");
  }
  return it->get<std::string>();
}

// Unbiased draw in [0, bound) from a 64-bit engine.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return draw % bound;
}

}  // namespace

const std::string* Fact::surface(EntityRole role, std::string_view language) const {
  const auto& forms = role == EntityRole::subject ? subjects : objects;
  auto it = forms.find(std::string(language));
  return it == forms.end() ? nullptr : &it->second;
}

bool Fact::realized_in(std::string_view language) const {
  return has(EntityRole::subject, language) && has(EntityRole::object, language);
}

std::string Issue::message() const {
  switch (kind) {
    case Kind::missing_subject:
      return "fact " + fact_id + ": no subject in " + language;
    case Kind::missing_object:
      return "fact " + fact_id + ": no object in " + language;
    case Kind::missing_template:
      return "relation " + relation + ": no template for " + language;
  }
  return {};
}

std::size_t count_placeholders(std::string_view text) {
  std::size_t count = 0;
  for (auto pos = text.find(kSubjectPlaceholder); pos != std::string_view::npos;
       pos = text.find(kSubjectPlaceholder, pos + kSubjectPlaceholder.size())) {
    ++count;
  }
  return count;
}

FactStore::FactStore(std::vector<std::string> languages, std::vector<Fact> facts,
                     std::vector<PromptTemplate> templates)
    : languages_(std::move(languages)), facts_(std::move(facts)), templates_(std::move(templates)) {
  std::set<std::string> declared;
  for (const auto& lang : languages_) {
    if (lang.empty()) throw DatasetError("languages.json: empty language code");
    if (!declared.insert(lang).second) throw DatasetError("languages.json: duplicate language " + lang);
  }

  for (std::size_t i = 0; i < facts_.size(); ++i) {
    const Fact& fact = facts_[i];
    if (fact.id.empty()) throw DatasetError("facts.json: record " + std::to_string(i) + ": empty id");
    if (fact.relation.empty()) {
      throw DatasetError("facts.json: record " + std::to_string(i) + ": empty relation");
    }
    if (!fact_index_.emplace(fact.id, i).second) throw DatasetError("duplicate fact id: " + fact.id);
    for (const auto* forms : {&fact.subjects, &fact.objects}) {
      const char* field = forms == &fact.subjects ? "subject" : "object";
      for (const auto& [lang, text] : *forms) {
        if (!declared.contains(lang)) {
          throw DatasetError("fact " + fact.id + ": " + field + " uses undeclared language " + lang);
        }
        if (blank(text)) {
          throw DatasetError("fact " + fact.id + ": " + field + " in " + lang + " is empty");
        }
      }
    }
    ++relation_counts_[fact.relation];
  }

  for (std::size_t i = 0; i < templates_.size(); ++i) {
    const auto& tmpl = templates_[i];
    if (!declared.contains(tmpl.language)) {
      throw DatasetError("template " + tmpl.relation + "/" + tmpl.language +
                         ": undeclared language");
    }
    if (count_placeholders(tmpl.text) != 1) {
      throw DatasetError("template " + tmpl.relation + "/" + tmpl.language + " must contain " +
                         std::string(kSubjectPlaceholder) + " exactly once");
    }
    if (!template_index_.emplace(std::pair{tmpl.relation, tmpl.language}, i).second) {
      throw DatasetError("duplicate template " + tmpl.relation + "/" + tmpl.language);
    }
  }
}

bool FactStore::declares(std::string_view language) const {
  return std::find(languages_.begin(), languages_.end(), language) != languages_.end();
}

const Fact* FactStore::find(std::string_view id) const {
  auto it = fact_index_.find(std::string(id));
  return it == fact_index_.end() ? nullptr : &facts_[it->second];
}

const Fact& FactStore::at(std::string_view id) const {
  if (const Fact* fact = find(id)) return *fact;
  throw DatasetError("unknown fact id: " + std::string(id));
}

const std::string* FactStore::template_for(std::string_view relation,
                                           std::string_view language) const {
  auto it = template_index_.find(std::pair{std::string(relation), std::string(language)});
  return it == template_index_.end() ? nullptr : &templates_[it->second].text;
}

std::vector<std::string> FactStore::flagged_fact_ids() const {
  std::vector<std::string> out;
  for (const auto& fact : facts_) {
    bool complete = std::all_of(languages_.begin(), languages_.end(),
                                [&](const std::string& l) { return fact.realized_in(l); });
    if (!complete) out.push_back(fact.id);
  }
  return out;
}

bool FactStore::operator==(const FactStore& other) const {
  if (languages_ != other.languages_ || facts_ != other.facts_) return false;
  // Template order is not significant.
  auto sorted = [](std::vector<PromptTemplate> v) {
    std::sort(v.begin(), v.end(), [](const auto& x, const auto& y) {
      return std::tie(x.relation, x.language) < std::tie(y.relation, y.language);
    });
    return v;
  };
  return sorted(templates_) == sorted(other.templates_);
}

std::vector<LanguagePair> enumerate_pairs(std::span<const std::string> languages) {
  std::vector<LanguagePair> pairs;
  pairs.reserve(languages.size() * (languages.size() ? languages.size() - 1 : 0) / 2);
  for (std::size_t i = 0; i < languages.size(); ++i) {
    for (std::size_t j = i + 1; j < languages.size(); ++j) {
      pairs.push_back({languages[i], languages[j]});
    }
  }
  return pairs;
}

FactStore load_dataset(const std::filesystem::path& root) {
  const json langs_doc = read_json(root / "languages.json");
  if (!langs_doc.is_array()) throw DatasetError("languages.json: expected an array");
  std::vector<std::string> languages;
  for (std::size_t i = 0; i < langs_doc.size(); ++i) {
    if (!langs_doc[i].is_string()) {
      throw DatasetError("languages.json: entry " + std::to_string(i) + " is not a string");
    }
    languages.push_back(langs_doc[i].get<std::string>());
  }

  const json facts_doc = read_json(root / "facts.json");
  if (!facts_doc.is_array()) throw DatasetError("facts.json: expected an array");
  std::vector<Fact> facts;
  facts.reserve(facts_doc.size());
  for (std::size_t i = 0; i < facts_doc.size(); ++i) {
    const json& record = facts_doc[i];
    if (!record.is_object()) {
      throw DatasetError("facts.json: record " + std::to_string(i) + ": expected an object");
    }
    Fact fact;
    fact.id = string_field(record, i, "id");
    fact.relation = string_field(record, i, "relation");
    fact.subjects = surface_map(record, i, "subject");
    fact.objects = surface_map(record, i, "object");
    facts.push_back(std::move(fact));
  }

  const json tmpl_doc = read_json(root / "templates.json");
  if (!tmpl_doc.is_object()) throw DatasetError("templates.json: expected an object");
  std::vector<PromptTemplate> templates;
  for (const auto& [relation, per_lang] : tmpl_doc.items()) {
    if (!per_lang.is_object()) {
      throw DatasetError("templates.json: relation '" + relation + "': expected an object");
    }
    for (const auto& [lang, text] : per_lang.items()) {
      if (!text.is_string()) {
        throw DatasetError("templates.json: " + relation + "/" + lang + ": not a string");
      }
      templates.push_back({relation, lang, text.get<std::string>()});
    }
  }

  return FactStore(std::move(languages), std::move(facts), std::move(templates));
}

void save_dataset(const FactStore& store, const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  write_json(root / "languages.json", store.languages());

  json facts = json::array();
  for (const auto& fact : store.facts()) {
    facts.push_back({{"id", fact.id},
                     {"relation", fact.relation},
                     {"subject", fact.subjects},
                     {"object", fact.objects}});
  }
  write_json(root / "facts.json", facts);

  json templates = json::object();
  for (const auto& tmpl : store.templates()) templates[tmpl.relation][tmpl.language] = tmpl.text;
  write_json(root / "templates.json", templates);
}

std::vector<Issue> validate(const FactStore& store) {
  std::vector<Issue> issues;
  for (const auto& fact : store.facts()) {
    for (const auto& lang : store.languages()) {
      if (!fact.has(EntityRole::subject, lang)) {
        issues.push_back({Issue::Kind::missing_subject, fact.id, fact.relation, lang});
      }
      if (!fact.has(EntityRole::object, lang)) {
        issues.push_back({Issue::Kind::missing_object, fact.id, fact.relation, lang});
      }
    }
  }
  for (const auto& [relation, count] : store.relation_counts()) {
    for (const auto& lang : store.languages()) {
      if (!store.template_for(relation, lang)) {
        issues.push_back({Issue::Kind::missing_template, {}, relation, lang});
      }
    }
  }
  return issues;
}

std::string describe(const ExemplarCriterion& criterion) {
  return std::visit(
      [](const auto& c) -> std::string {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, TranslationCriterion>) {
          return "translation(" + c.source + "->" + c.target + ", " +
                 std::string(to_string(c.role)) + ")";
        } else {
          std::string out = "recall(" + c.relation + ", " + c.language;
          if (c.pivot) out += ", pivot " + *c.pivot;
          return out + ")";
        }
      },
      criterion);
}

std::vector<const Fact*> eligible_exemplars(const FactStore& store,
                                            const ExemplarCriterion& criterion) {
  std::vector<const Fact*> out;
  for (const auto& fact : store.facts()) {
    const bool ok = std::visit(
        [&](const auto& c) {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, TranslationCriterion>) {
            return fact.has(c.role, c.source) && fact.has(c.role, c.target);
          } else {
            return fact.relation == c.relation && fact.realized_in(c.language) &&
                   (!c.pivot || fact.has(EntityRole::subject, *c.pivot));
          }
        },
        criterion);
    if (ok) out.push_back(&fact);
  }
  return out;
}

std::vector<Fact> sample_exemplars(const FactStore& store, const ExemplarCriterion& criterion,
                                   std::size_t k, std::string_view exclude, std::uint64_t seed) {
  std::vector<const Fact*> pool = eligible_exemplars(store, criterion);
  std::erase_if(pool, [&](const Fact* f) { return f->id == exclude; });
  if (pool.size() < k) {
    throw DatasetError("need " + std::to_string(k) + " exemplars for " + describe(criterion) +
                       " but only " + std::to_string(pool.size()) + " are eligible");
  }
  // Partial Fisher-Yates: the first k slots become the sample, in draw order.
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(bounded(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  std::vector<Fact> sample;
  sample.reserve(k);
  for (std::size_t i = 0; i < k; ++i) sample.push_back(*pool[i]);
  return sample;
}

}  // namespace xprobe
