#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "support.hpp"
#include "xprobe/lens_analyzer.hpp"

using namespace xprobe;

namespace {

const std::filesystem::path kLens = std::filesystem::path(XPROBE_FIXTURES) / "lens";

const char* kHeader =
    R"({"schema":"lens-trace/1","model":"tiny","n_layers":4,"vocab_size":100,"targets":["eng_Latn","jpn_Jpan"]})";

std::string record(const std::string& fact, const std::string& variant, std::vector<long long> ranks,
                   std::vector<double> probs, const std::string& target = "eng_Latn") {
  nlohmann::json per_layer = nlohmann::json::array();
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    per_layer.push_back({{"layer", i}, {"rank", ranks[i]}, {"prob", probs[i]}});
  }
  return nlohmann::json{{"fact_id", fact},           {"input_language", "jpn_Jpan"},
                        {"variant", variant},        {"target_language", target},
                        {"target_token_id", 5},      {"target_token_text", "▁Paris"},
                        {"per_layer", per_layer}}
      .dump();
}

std::string trace_error(const std::string& text) {
  try {
    parse_trace(text, "t.jsonl");
  } catch (const TraceError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("parse_trace accepts a header and records") {
  const std::string text = std::string(kHeader) + "\n" +
                           record("f1", "base", {90, 50, 10, 2, 1}, {0.0, 0.01, 0.1, 0.4, 0.8}) + "\n" +
                           record("f2", "base", {80, 60, 20, 4, 3}, {0.0, 0.01, 0.1, 0.2, 0.4}) + "\n";
  const Trace t = parse_trace(text);
  CHECK(t.header.model == "tiny");
  CHECK(t.header.n_layers == 4);
  CHECK(t.records.size() == 2);
  CHECK(t.layer_axis() == std::vector<int>{0, 1, 2, 3, 4});

  const auto table = curve(t.records, {"jpn_Jpan", Variant::base, "eng_Latn"});
  REQUIRE(table.has_value());
  CHECK(table->n == 2);
  CHECK(table->layers.size() == 5);
  CHECK(table->mean_rank[0] == 85.0);
  CHECK(table->median_rank[4] == 2.0);
  CHECK(table->mean_prob[4] == doctest::Approx(0.6));
  CHECK_FALSE(curve(t.records, {"jpn_Jpan", Variant::subinj, "eng_Latn"}).has_value());

  testing::TempDir dir;
  save_trace(t, dir / "copy.jsonl");
  const Trace back = load_trace(dir / "copy.jsonl");
  CHECK(back.records.size() == 2);
  CHECK(back.records[1].per_layer[4].rank == 3);
}

TEST_CASE("parse_trace rejects malformed traces with the line number") {
  const std::string ok = record("f1", "base", {9, 5, 3, 2, 1}, {0, 0.1, 0.2, 0.3, 0.4});
  CHECK(trace_error(std::string(kHeader) + "\n" + ok + "\n" +
                    record("f2", "base", {9, 5, 3, 2, 1}, {0, 0.1, 1.2, 0.3, 0.4}))
            .find("t.jsonl:3") != std::string::npos);
  CHECK(trace_error("").find("no records") != std::string::npos);
  CHECK(trace_error(kHeader).find("no records") != std::string::npos);
  CHECK(trace_error(std::string(kHeader) + "\n" + record("f", "base", {9, 5, 101, 2, 1}, {0, 0, 0, 0, 0}))
            .find("rank") != std::string::npos);
  CHECK(trace_error(std::string(kHeader) + "\n" + record("f", "base", {9, 5, 0, 2, 1}, {0, 0, 0, 0, 0})) != "");
  CHECK(trace_error(std::string(kHeader) + "\n" + record("f", "base", {9, 5, 3, 2, 1, 1}, {0, 0, 0, 0, 0, 0})) !=
        "");
  CHECK(trace_error(std::string(kHeader) + "\n" + record("f", "base", {9, 5}, {0, 0}, "kor_Kore")) != "");
  CHECK(trace_error(std::string(kHeader) + "\n" + ok + "\n" + record("f", "base", {9, 5}, {0, 0})) != "");
  CHECK(trace_error(R"({"schema":"lens-trace/2","model":"m","n_layers":1,"vocab_size":2,"targets":["x"]})"
                    "\n")
            .find("schema") != std::string::npos);
  CHECK(trace_error(std::string(kHeader) + "\n{not json").find("t.jsonl:2") != std::string::npos);
}

TEST_CASE("single record curve equals the record; even median averages") {
  const std::string one = std::string(kHeader) + "\n" + record("f1", "subinj", {7, 6, 5, 4, 3}, {0.1, 0.2, 0.3, 0.4, 0.5});
  const Trace t = parse_trace(one);
  const auto c = curves(t.records);
  REQUIRE(c.size() == 1);
  CHECK(c[0].mean_rank == std::vector<double>{7, 6, 5, 4, 3});
  CHECK(c[0].median_rank == c[0].mean_rank);
  CHECK(c[0].mean_prob == std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5});

  const Trace two = parse_trace(std::string(kHeader) + "\n" + record("a", "base", {1, 1, 1, 1, 1}, {0, 0, 0, 0, 0}) +
                                "\n" + record("b", "base", {3, 3, 3, 3, 3}, {0, 0, 0, 0, 0}));
  const auto c2 = curves(two.records);
  CHECK(c2[0].mean_rank[0] == 2.0);
  CHECK(c2[0].median_rank[0] == 2.0);
}

TEST_CASE("curves are invariant under record order") {
  const Trace t = load_trace(kLens / "lens_50.jsonl");
  const auto reference = curves(t.records);
  std::mt19937 rng(17);
  auto shuffled = t.records;
  for (int i = 0; i < 5; ++i) {
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto again = curves(shuffled);
    REQUIRE(again.size() == reference.size());
    for (std::size_t k = 0; k < again.size(); ++k) {
      CHECK(again[k].key == reference[k].key);
      CHECK(again[k].median_rank == reference[k].median_rank);
      for (std::size_t l = 0; l < again[k].layers.size(); ++l) {
        CHECK(std::abs(again[k].mean_rank[l] - reference[k].mean_rank[l]) <= 1e-9);
        CHECK(std::abs(again[k].mean_prob[l] - reference[k].mean_prob[l]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("50-record fixture matches the exact oracle") {
  const Trace t = load_trace(kLens / "lens_50.jsonl");
  CHECK(t.records.size() == 50);
  CHECK(t.header.first_layer == 1);
  CHECK(t.header.extra.at("norm_before_unembed") == true);
  const auto expected = nlohmann::json::parse(testing::read_text(kLens / "lens_50_expected.json"));
  const auto tables = curves(t.records);
  REQUIRE(tables.size() == expected.size());
  for (const auto& e : expected) {
    const CurveKey key{e.at("input_language"), parse_variant(e.at("variant").get<std::string>()),
                       e.at("target_language")};
    const auto it = std::find_if(tables.begin(), tables.end(), [&](const CurveTable& c) { return c.key == key; });
    REQUIRE(it != tables.end());
    CHECK(it->n == e.at("n").get<std::size_t>());
    CHECK(it->layers == e.at("layers").get<std::vector<int>>());
    for (std::size_t l = 0; l < it->layers.size(); ++l) {
      const double mr = e.at("mean_rank")[l], md = e.at("median_rank")[l], mp = e.at("mean_prob")[l];
      CHECK(std::abs(it->mean_rank[l] - mr) <= 1e-12 * std::max(1.0, std::abs(mr)));
      CHECK(it->median_rank[l] == md);
      CHECK(std::abs(it->mean_prob[l] - mp) <= 1e-12);
    }
  }
}

TEST_CASE("compare_variants") {
  const Trace t = load_trace(kLens / "lens_50.jsonl");
  const auto all = curves(t.records);
  std::vector<CurveTable> base;
  for (const auto& c : all) {
    if (c.key.variant == Variant::base) base.push_back(c);
  }
  SUBCASE("a variant compared with itself has zero deltas") {
    const auto cmp = compare_variants(base, base);
    CHECK_FALSE(cmp.rows.empty());
    for (const auto& r : cmp.rows) {
      CHECK(r.delta_mean_rank == 0.0);
      CHECK(r.delta_mean_prob == 0.0);
      CHECK_FALSE(r.treated_lower);
    }
    CHECK(*cmp.share_lower() == 0.0);
  }
  SUBCASE("share over a 40-layer fixture") {
    const Trace s = load_trace(kLens / "lens_share.jsonl");
    std::vector<CurveTable> b, tr;
    for (const auto& c : curves(s.records)) (c.key.variant == Variant::base ? b : tr).push_back(c);
    const auto cmp = compare_variants(b, tr);
    CHECK(cmp.treated == Variant::subinj);
    CHECK(*cmp.share_lower() == 0.75);
  }
  SUBCASE("axis mismatch and unmatched groupings") {
    auto shorter = base;
    shorter[0].layers.pop_back();
    shorter[0].mean_rank.pop_back();
    shorter[0].median_rank.pop_back();
    shorter[0].mean_prob.pop_back();
    CHECK_THROWS_AS(compare_variants(base, shorter), TraceError);

    auto fewer = base;
    fewer.pop_back();
    const auto cmp = compare_variants(base, fewer);
    CHECK(cmp.unmatched.size() == 1);
    CHECK(cmp.unmatched[0].find('/') != std::string::npos);
  }
  SUBCASE("csv output") {
    testing::TempDir dir;
    write_curves_csv(all, dir / "curves.csv");
    const auto cmp = compare_variants(base, base);
    write_deltas_csv(cmp, dir / "deltas.csv");
    const auto curves_text = testing::read_text(dir / "curves.csv");
    CHECK(curves_text.starts_with("input_language,variant,target_language,layer,mean_rank,median_rank,mean_prob,n\n"));
    std::size_t expected_lines = 1;
    for (const auto& c : all) expected_lines += c.layers.size();
    CHECK(static_cast<std::size_t>(std::count(curves_text.begin(), curves_text.end(), '\n')) == expected_lines);
    CHECK(testing::read_text(dir / "deltas.csv").starts_with("input_language,target_language,base_variant"));
  }
}
