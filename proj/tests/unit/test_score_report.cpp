#include "doctest.h"
#include "support.hpp"
#include "xprobe/report.hpp"
#include "xprobe/score.hpp"

using namespace xprobe;

namespace {

ResultRecord recall_record(const std::string& fact, const std::string& lang, Variant variant,
                           const std::string& completion, const std::string& answer = "Paris") {
  ResultRecord r;
  r.prompt.task = Task::recall;
  r.prompt.fact_id = fact;
  r.prompt.relation = "capital";
  r.prompt.source_lang = r.prompt.target_lang = lang;
  r.prompt.variant = variant;
  if (variant != Variant::base) r.prompt.pivot_lang = "eng_Latn";
  r.prompt.expected_answer = answer;
  r.prompt.text = fact + "|" + lang;
  r.completion.completion_text = completion;
  r.completion.backend_id = "mock:m.json";
  r.correct = contains_answer(completion, answer);
  r.run_seed = 1;
  return r;
}

ResultRecord translation_record(const std::string& fact, const std::string& src, const std::string& tgt,
                                EntityRole role, bool correct) {
  ResultRecord r;
  r.prompt.task = Task::translation;
  r.prompt.fact_id = fact;
  r.prompt.relation = "capital";
  r.prompt.source_lang = src;
  r.prompt.target_lang = tgt;
  r.prompt.role = role;
  r.prompt.expected_answer = "x";
  r.completion.completion_text = correct ? "x" : "y";
  r.completion.backend_id = "mock:m.json";
  r.correct = correct;
  r.run_seed = 1;
  return r;
}

// Recall for `n` facts in languages a and b; the first k_a / k_b are correct.
std::vector<ResultRecord> recall_run(Variant v, int n, int k_a, int k_b) {
  std::vector<ResultRecord> out;
  for (int i = 0; i < n; ++i) {
    const std::string id = "f" + std::to_string(i);
    out.push_back(recall_record(id, "eng_Latn", v, i < k_a ? "Paris" : "Lyon"));
    out.push_back(recall_record(id, "jpn_Jpan", v, i < k_b ? "Paris" : "Lyon"));
  }
  return out;
}

std::string save(const testing::TempDir& dir, const std::string& name, const std::vector<ResultRecord>& records) {
  const auto doc = score_results(records, {name});
  save_scores(doc, dir / name);
  return (dir / name).string();
}

std::string error_of(const ReportInputs& in) {
  try {
    build_report(in);
  } catch (const MetricsError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("score_results computes recall accuracy and pair metrics") {
  auto records = recall_run(Variant::base, 4, 2, 3);
  for (int i = 0; i < 4; ++i) {
    const std::string id = "f" + std::to_string(i);
    for (auto role : {EntityRole::subject, EntityRole::object}) {
      records.push_back(translation_record(id, "eng_Latn", "jpn_Jpan", role, i % 2 == 0));
      records.push_back(translation_record(id, "jpn_Jpan", "eng_Latn", role, true));
    }
  }
  const auto doc = score_results(records, {"a.jsonl", "b.jsonl"});
  CHECK(doc.model == "mock:m.json");
  CHECK(doc.variant == Variant::base);
  CHECK(doc.languages == std::vector<std::string>{"eng_Latn", "jpn_Jpan"});
  CHECK(*doc.recall_accuracy.at("eng_Latn") == 0.5);
  CHECK(*doc.recall_accuracy.at("jpn_Jpan") == 0.75);
  CHECK(*doc.mean_recall_accuracy() == doctest::Approx(0.625));
  REQUIRE(doc.pairs.size() == 1);
  const auto& p = doc.pairs[0];
  CHECK(*p.acc_sub_ab == 0.5);
  CHECK(*p.acc_sub_ba == 1.0);
  CHECK(*p.align_both == 0.75);
  CHECK(*p.co == doctest::Approx(2.0 / 3.0));
  CHECK(doc.n_recall_records == 8);
  CHECK(doc.n_translation_records == 16);
  CHECK(doc.seeds == std::vector<std::uint64_t>{1});

  testing::TempDir dir;
  save_scores(doc, dir / "m.json");
  const auto back = load_scores(dir / "m.json");
  CHECK(back.recall_accuracy == doc.recall_accuracy);
  CHECK(back.pairs.size() == 1);
  CHECK(back.pairs[0].co == p.co);
  CHECK(nlohmann::json::parse(testing::read_text(dir / "m.json")).at("mean_consistency").is_number());
}

TEST_CASE("scoring rejects mixed variants and mixed policies") {
  auto records = recall_run(Variant::base, 2, 1, 1);
  auto other = recall_run(Variant::subinj, 2, 1, 1);
  records.push_back(other.front());
  CHECK_THROWS_AS(score_results(records, {"x"}), MetricsError);

  auto mixed = recall_run(Variant::base, 2, 1, 1);
  mixed[1].policy = NormalizationPolicy::verbatim();
  CHECK_THROWS_AS(score_results(mixed, {"x"}), MetricsError);
  ScoreOptions opts;
  opts.rejudge = NormalizationPolicy{};
  CHECK_NOTHROW(score_results(mixed, {"x"}, opts));
}

TEST_CASE("re-judging under a verbatim policy can change outcomes") {
  std::vector<ResultRecord> records{recall_record("f0", "eng_Latn", Variant::base, "PARIS")};
  CHECK(*score_results(records, {"x"}).recall_accuracy.at("eng_Latn") == 1.0);
  ScoreOptions opts;
  opts.rejudge = NormalizationPolicy::verbatim();
  CHECK(*score_results(records, {"x"}, opts).recall_accuracy.at("eng_Latn") == 0.0);
}

TEST_CASE("correlate skips pairs with undefined values and needs three points") {
  ScoreDocument doc;
  doc.model = "m";
  for (int i = 0; i < 5; ++i) {
    PairMetrics m;
    m.pair = {"l" + std::to_string(i), "z"};
    m.align_sub = m.align_obj = m.align_both = 0.1 * i;
    if (i != 4) m.co = 0.2 * i + 0.1;
    doc.pairs.push_back(m);
  }
  const auto rows = correlate(doc);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].metric == "align_sub");
  CHECK(rows[2].metric == "align_both");
  for (const auto& row : rows) {
    CHECK(row.n_pairs == 4);
    CHECK(row.n_undefined == 1);
    REQUIRE(row.result.has_value());
    CHECK(row.result->r == doctest::Approx(1.0));
  }
  doc.pairs.resize(2);
  CHECK_FALSE(correlate(doc)[0].result.has_value());
}

TEST_CASE("partition_results aggregates pairs") {
  std::vector<RecallOutcome> recall{{"f", "a", true}, {"f", "b", true}, {"f", "c", false}};
  std::vector<TranslationOutcome> trans;
  for (const auto& [x, y] : std::vector<std::pair<std::string, std::string>>{{"a", "b"}, {"a", "c"}, {"b", "c"}}) {
    for (auto role : {EntityRole::subject, EntityRole::object}) {
      trans.push_back({"f", x, y, role, x == "a"});
      trans.push_back({"f", y, x, role, false});
    }
  }
  const OutcomeIndex idx(recall, trans);
  const std::vector<std::string> langs{"a", "b", "c"};
  const auto summary = partition_results(idx, langs);
  CHECK(summary.overall.total == 3);
  CHECK(summary.overall.consistent == 1);
  CHECK(summary.overall.aligned == 2);
  CHECK(summary.overall.inconsistent_non_aligned == 1);
  CHECK(summary.per_pair.size() == 3);

  const OutcomeIndex recall_only(recall, {});
  CHECK_THROWS_AS(partition_results(recall_only, langs), MetricsError);
}

TEST_CASE("format_improvement") {
  CHECK(format_improvement(13.725) == "+13.7%");
  CHECK(format_improvement(-2.0) == "-2.0%");
  CHECK(format_improvement(0.0) == "0.0%");
  CHECK(format_improvement(-0.0) == "0.0%");
  CHECK(format_improvement(-0.01) == "0.0%");
  CHECK(format_improvement(std::nullopt) == "n/a");
}

TEST_CASE("build_report compares variants against the base") {
  testing::TempDir dir;
  ReportInputs in;
  in.base = save(dir, "base.json", recall_run(Variant::base, 100, 51, 51));
  in.subinj = save(dir, "subinj.json", recall_run(Variant::subinj, 100, 58, 58));
  in.subsub = save(dir, "subsub.json", recall_run(Variant::subsub, 100, 51, 51));
  testing::write_text(dir / "groups.json",
                      R"({"eng_Latn":{"script":"Latin"},"jpn_Jpan":{"script":"CJK"},"kor_Kore":{"script":"Hangul"}})");
  in.groups = dir / "groups.json";

  const auto bundle = build_report(in);
  REQUIRE(bundle.variants.size() == 3);
  CHECK(bundle.variants[0].variant == Variant::base);
  const auto& acc = bundle.improvements.at(0);
  CHECK(acc.metric == "ACC");
  CHECK(*acc.value.at(Variant::base) == doctest::Approx(0.51));
  CHECK(format_improvement(acc.improvement.at(Variant::subinj)) == "+13.7%");
  CHECK(format_improvement(acc.improvement.at(Variant::subsub)) == "0.0%");
  CHECK(bundle.improvements.at(1).metric == "CO");

  REQUIRE(bundle.groups.size() == 2);
  CHECK(bundle.groups[0].group == "CJK");
  CHECK(bundle.groups[0].languages == std::vector<std::string>{"jpn_Jpan"});

  const std::string table = render_improvement_table(bundle);
  CHECK(table.find("+13.7%") != std::string::npos);
  CHECK(table.find("0.51") != std::string::npos);

  write_report(bundle, dir / "report");
  for (const char* f : {"report.json", "improvements.csv", "acc_by_language.csv", "pairs.csv",
                        "correlation.csv", "groups.csv"}) {
    CHECK(std::filesystem::exists(dir / "report" / f));
  }
  CHECK_FALSE(std::filesystem::exists(dir / "report" / "partition.csv"));
  const auto j = nlohmann::json::parse(testing::read_text(dir / "report" / "report.json"));
  CHECK(j.contains("improvements"));
}

TEST_CASE("build_report input errors") {
  testing::TempDir dir;
  ReportInputs in;
  in.base = save(dir, "base.json", recall_run(Variant::base, 10, 5, 5));

  CHECK(error_of(in).find("subsub") != std::string::npos);

  in.subsub = dir / "missing-subsub.json";
  CHECK(error_of(in).find("missing-subsub.json") != std::string::npos);

  // A treated run over fewer languages.
  std::vector<ResultRecord> eng_only;
  for (const auto& r : recall_run(Variant::subsub, 10, 5, 5)) {
    if (r.prompt.target_lang == "eng_Latn") eng_only.push_back(r);
  }
  in.subsub = save(dir, "subsub.json", eng_only);
  const std::string msg = error_of(in);
  CHECK(msg.find("base.json") != std::string::npos);
  CHECK(msg.find("subsub.json") != std::string::npos);

  // Files in the wrong slot.
  in.subsub = save(dir, "inj.json", recall_run(Variant::subinj, 10, 5, 5));
  CHECK_FALSE(error_of(in).empty());

  // Identical base and treated scores: a zero improvement, not an error.
  in.subsub = save(dir, "same.json", recall_run(Variant::subsub, 10, 5, 5));
  const auto bundle = build_report(in);
  CHECK(format_improvement(bundle.improvements[0].improvement.at(Variant::subsub)) == "0.0%");
}
