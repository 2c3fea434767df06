#include "doctest.h"
#include "support.hpp"
#include "xprobe/prompt_forge.hpp"

using namespace xprobe;

namespace {

std::string last_line(const std::string& text) {
  const auto pos = text.rfind('\n');
  return pos == std::string::npos ? text : text.substr(pos + 1);
}

std::vector<Fact> pick(const FactStore& store, std::initializer_list<const char*> ids) {
  std::vector<Fact> out;
  for (const char* id : ids) out.push_back(store.at(id));
  return out;
}

}  // namespace

TEST_CASE("translation prompt reproduces the Japanese-English box") {
  const FactStore store = testing::capitals();
  const auto spec = build_translation_prompt(store.at("c3"), EntityRole::subject, "jpn_Jpan", "eng_Latn",
                                             pick(store, {"c0", "c1", "c2"}), LanguageLabels::bundled());
  CHECK(spec.text ==
        "日本語: フランス - English: France\n"
        "日本語: セルビア - English: Serbia\n"
        "日本語: イタリア - English: Italy\n"
        "日本語: イギリス - English: ");
  CHECK(spec.expected_answer == "United Kingdom");
  CHECK(spec.task == Task::translation);
  CHECK(spec.source_lang == "jpn_Jpan");
  CHECK(spec.target_lang == "eng_Latn");
  CHECK(spec.role == EntityRole::subject);
  CHECK(spec.exemplar_ids == std::vector<std::string>{"c0", "c1", "c2"});
  CHECK_FALSE(spec.variant.has_value());
}

TEST_CASE("translation prompt edge cases") {
  const FactStore store = testing::capitals();
  const auto labels = LanguageLabels::bundled();
  SUBCASE("zero exemplars gives a single line") {
    const auto spec = build_translation_prompt(store.at("c0"), EntityRole::object, "eng_Latn", "jpn_Jpan", {}, labels);
    CHECK(spec.text == "English: Paris - 日本語: ");
    CHECK(spec.expected_answer == "パリ");
  }
  SUBCASE("self-translation") {
    CHECK_THROWS_AS(build_translation_prompt(store.at("c0"), EntityRole::subject, "eng_Latn", "eng_Latn", {}, labels),
                    PromptError);
  }
  SUBCASE("missing realization names fact, role and language") {
    try {
      build_translation_prompt(store.at("c5"), EntityRole::object, "eng_Latn", "fra_Latn", {}, labels);
      FAIL("expected PromptError");
    } catch (const PromptError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("c5") != std::string::npos);
      CHECK(msg.find("object") != std::string::npos);
      CHECK(msg.find("fra_Latn") != std::string::npos);
    }
  }
  SUBCASE("fact among its own exemplars") {
    CHECK_THROWS_AS(build_translation_prompt(store.at("c0"), EntityRole::subject, "eng_Latn", "jpn_Jpan",
                                             pick(store, {"c0"}), labels),
                    PromptError);
  }
  SUBCASE("unlabelled language") {
    CHECK_THROWS_AS(build_translation_prompt(store.at("c0"), EntityRole::subject, "eng_Latn", "xxx_Zzzz", {}, labels),
                    PromptError);
  }
}

TEST_CASE("bundled labels cover the seventeen codes and accept overrides") {
  const auto labels = LanguageLabels::bundled();
  const std::vector<std::string> codes{"ara_Arab", "cat_Latn", "zho_Hans", "nld_Latn", "eng_Latn", "fra_Latn",
                                       "ell_Grek", "heb_Hebr", "hun_Latn", "jpn_Jpan", "kor_Kore", "fas_Arab",
                                       "rus_Cyrl", "spa_Latn", "tur_Latn", "ukr_Cyrl", "vie_Latn"};
  CHECK(labels.missing(codes).empty());
  CHECK(labels.label("jpn_Jpan") == "日本語");
  const auto custom = labels.with_overrides(LanguageLabels(std::map<std::string, std::string>{{"jpn_Jpan", "Japanese"}}));
  CHECK(custom.label("jpn_Jpan") == "Japanese");
  CHECK(custom.label("eng_Latn") == "English");
}

TEST_CASE("recall prompt variants") {
  const FactStore store = testing::capitals();
  const auto exemplars = pick(store, {"c1", "c2", "c4"});

  const auto base = build_recall_prompt(store.at("c0"), "eng_Latn", Variant::base, std::nullopt, exemplars, store);
  CHECK(last_line(base.text) == "Where is France's capital located? The answer is:");
  CHECK(base.text.starts_with("Where is Serbia's capital located? The answer is: Belgrade\n"));
  CHECK(std::count(base.text.begin(), base.text.end(), '\n') == 3);
  CHECK(base.expected_answer == "Paris");
  CHECK_FALSE(base.pivot_lang.has_value());

  const auto subsub = build_recall_prompt(store.at("c0"), "jpn_Jpan", Variant::subsub, "eng_Latn", exemplars, store);
  CHECK(last_line(subsub.text) == "Franceの首都はどこにありますか？答えは：");
  CHECK(subsub.text.starts_with("Serbiaの首都はどこにありますか？答えは： ベオグラード\n"));
  CHECK(subsub.expected_answer == "パリ");
  CHECK(subsub.pivot_lang == std::optional<std::string>("eng_Latn"));

  const auto subinj = build_recall_prompt(store.at("c0"), "jpn_Jpan", Variant::subinj, "eng_Latn", exemplars, store);
  CHECK(last_line(subinj.text) == "フランス (France) の首都はどこにありますか？答えは：");

  RecallOptions keep;
  keep.transform_exemplars = false;
  const auto kept = build_recall_prompt(store.at("c0"), "jpn_Jpan", Variant::subinj, "eng_Latn", exemplars, store, keep);
  CHECK(kept.text.starts_with("セルビアの首都はどこにありますか？答えは： ベオグラード\n"));
  CHECK(last_line(kept.text) == last_line(subinj.text));

  CHECK_THROWS_AS(build_recall_prompt(store.at("c0"), "jpn_Jpan", Variant::subsub, std::nullopt, exemplars, store),
                  PromptError);
  CHECK_THROWS_AS(build_recall_prompt(store.at("c5"), "fra_Latn", Variant::base, std::nullopt, exemplars, store),
                  PromptError);
}

TEST_CASE("recall prompt differs from base only in the subject span") {
  const FactStore store = testing::capitals();
  for (const auto& fact : store.facts()) {
    const std::string tmpl = *store.template_for("capital", "jpn_Jpan");
    const std::string native = *fact.surface(EntityRole::subject, "jpn_Jpan");
    const std::string pivot = *fact.surface(EntityRole::subject, "eng_Latn");
    const std::string b = render_base(tmpl, native);
    for (const std::string& v : {apply_subsub(tmpl, native, pivot), apply_subinj(tmpl, native, pivot)}) {
      CHECK(v.ends_with(b.substr(native.size())));
    }
  }
}

TEST_CASE("substitution helpers") {
  CHECK(render_base("{subject}の首都", "フランス") == "フランスの首都");
  CHECK(apply_subsub("{subject}の首都は…", "フランス", "France") == "Franceの首都は…");
  CHECK(apply_subsub("{subject}の首都", "フランス", "フランス") == render_base("{subject}の首都", "フランス"));
  CHECK(apply_subinj("{subject}の首都は…", "フランス", "France") == "フランス (France) の首都は…");
  CHECK(apply_subinj("Capital of {subject}?", "France", "France") == "Capital of France (France)?");
  CHECK(apply_subinj("Capital of {subject}?", "France", "France", true) == "Capital of France?");
  CHECK(apply_subinj("ما عاصمة {subject}؟", "فرنسا", "France") == "ما عاصمة فرنسا (France) ؟");
  CHECK_THROWS_AS(apply_subinj("{subject}", "a", ""), PromptError);
  CHECK_THROWS_AS(apply_subsub("{subject}", "a", ""), PromptError);
  CHECK_THROWS_AS(apply_subsub("no slot", "a", "b"), PromptError);
  CHECK_THROWS_AS(render_base("{subject} {subject}", "a"), PromptError);
}

TEST_CASE("PromptSpec JSON round trip") {
  const FactStore store = testing::capitals();
  const auto spec = build_recall_prompt(store.at("c0"), "jpn_Jpan", Variant::subinj, "eng_Latn",
                                        pick(store, {"c1", "c2", "c4"}), store);
  const nlohmann::json j = spec;
  CHECK(j.at("language") == "jpn_Jpan");
  CHECK(j.at("variant") == "subinj");
  CHECK_FALSE(j.contains("entity_role"));
  CHECK(j.get<PromptSpec>() == spec);

  const auto t = build_translation_prompt(store.at("c0"), EntityRole::object, "eng_Latn", "fra_Latn",
                                          pick(store, {"c1"}), LanguageLabels::bundled());
  const nlohmann::json tj = t;
  CHECK(tj.at("entity_role") == "object");
  CHECK(tj.at("pivot_lang").is_null());
  CHECK(tj.get<PromptSpec>() == t);
}
