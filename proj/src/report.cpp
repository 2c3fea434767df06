#include "xprobe/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "xprobe/csv.hpp"

namespace xprobe {
namespace {

using nlohmann::json;

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json variant_map(const std::map<Variant, std::optional<double>>& m) {
  json out = json::object();
  for (const auto& [variant, v] : m) out[std::string(to_string(variant))] = opt(v);
  return out;
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (!v) continue;
    sum += *v;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::optional<double> improvement(const std::optional<double>& base,
                                  const std::optional<double>& treated) {
  if (!base || !treated) return std::nullopt;
  return relative_improvement(*base, *treated);
}

json report_json(const PartitionReport& r) {
  return json{{"total", r.total},
              {"consistent", r.consistent},
              {"inconsistent", r.inconsistent},
              {"aligned", r.aligned},
              {"non_aligned", r.non_aligned},
              {"consistent_aligned", r.consistent_aligned},
              {"consistent_non_aligned", r.consistent_non_aligned},
              {"inconsistent_non_aligned", r.inconsistent_non_aligned},
              {"consistent_aligned_share", opt(r.consistent_aligned_share())},
              {"consistent_non_aligned_share", opt(r.consistent_non_aligned_share())},
              {"non_aligned_consistent_share", opt(r.non_aligned_consistent_share())},
              {"non_aligned_inconsistent_share", opt(r.non_aligned_inconsistent_share())}};
}

std::vector<std::string> partition_cells(const std::string& a, const std::string& b,
                                         const PartitionReport& r, std::size_t excluded) {
  return {a,
          b,
          std::to_string(r.total),
          std::to_string(r.consistent),
          std::to_string(r.inconsistent),
          std::to_string(r.aligned),
          std::to_string(r.non_aligned),
          std::to_string(r.consistent_aligned),
          std::to_string(r.consistent_non_aligned),
          std::to_string(r.inconsistent_non_aligned),
          format_number(r.consistent_aligned_share()),
          format_number(r.consistent_non_aligned_share()),
          format_number(r.non_aligned_consistent_share()),
          format_number(r.non_aligned_inconsistent_share()),
          std::to_string(excluded)};
}

}  // namespace

std::string format_improvement(const std::optional<double>& percent) {
  if (!percent) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.1f%%", *percent);
  std::string out = buf;
  if (out == "+0.0%" || out == "-0.0%") out = "0.0%";
  return out;
}

LanguageGroups load_language_groups(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MetricsError("cannot read language groups file " + path.string());
  try {
    return json::parse(in).get<LanguageGroups>();
  } catch (const json::exception& e) {
    throw MetricsError(path.string() + ": expected {language: {attribute: value}}: " + e.what());
  }
}

LensSummary summarize(const VariantComparison& cmp) {
  LensSummary s;
  s.base = cmp.base;
  s.treated = cmp.treated;
  s.share_lower = cmp.share_lower();
  s.unmatched = cmp.unmatched;
  if (!cmp.rows.empty()) {
    double rank = 0.0, prob = 0.0;
    for (const auto& r : cmp.rows) {
      rank += r.delta_mean_rank;
      prob += r.delta_mean_prob;
    }
    s.mean_delta_rank = rank / static_cast<double>(cmp.rows.size());
    s.mean_delta_prob = prob / static_cast<double>(cmp.rows.size());
  }
  return s;
}

ReportBundle build_report(const ReportInputs& inputs) {
  ReportBundle bundle;
  auto load = [&](Variant variant, const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
      throw MetricsError(std::string(to_string(variant)) + " score file not found: " + path.string());
    }
    bundle.variants.push_back({variant, path, load_scores(path)});
  };
  load(Variant::base, inputs.base);
  if (inputs.subsub) load(Variant::subsub, *inputs.subsub);
  if (inputs.subinj) load(Variant::subinj, *inputs.subinj);
  if (bundle.variants.size() < 2) throw MetricsError("report needs a subsub or subinj score file");

  const ScoreDocument& base = bundle.variants.front().scores;
  const std::set<std::string> coverage(base.languages.begin(), base.languages.end());
  for (const auto& v : bundle.variants) {
    const std::set<std::string> langs(v.scores.languages.begin(), v.scores.languages.end());
    if (langs != coverage) {
      throw MetricsError("language coverage of " + v.source.string() + " differs from " +
                         bundle.variants.front().source.string());
    }
    if (v.scores.variant && *v.scores.variant != v.variant) {
      throw MetricsError(v.source.string() + " holds " + std::string(to_string(*v.scores.variant)) +
                         " scores, expected " + std::string(to_string(v.variant)));
    }
  }
  bundle.model = base.model;
  bundle.languages = base.languages;
  bundle.pairs = base.pairs;
  bundle.correlation = correlate(base);

  for (const auto& lang : bundle.languages) {
    LanguageAccRow row{lang, {}};
    for (const auto& v : bundle.variants) row.acc[v.variant] = v.scores.recall_accuracy.at(lang);
    bundle.acc_by_language.push_back(std::move(row));
  }

  ImprovementRow acc{"ACC", {}, {}}, co{"CO", {}, {}};
  for (const auto& v : bundle.variants) {
    acc.value[v.variant] = v.scores.mean_recall_accuracy();
    co.value[v.variant] = v.scores.mean_consistency();
  }
  for (const auto& v : bundle.variants) {
    if (v.variant == Variant::base) continue;
    acc.improvement[v.variant] = improvement(acc.value[Variant::base], acc.value[v.variant]);
    co.improvement[v.variant] = improvement(co.value[Variant::base], co.value[v.variant]);
  }
  bundle.improvements = {std::move(acc), std::move(co)};

  if (inputs.groups) {
    const LanguageGroups groups = load_language_groups(*inputs.groups);
    std::map<std::pair<std::string, std::string>, std::vector<std::string>> members;
    for (const auto& lang : bundle.languages) {
      auto it = groups.find(lang);
      if (it == groups.end()) continue;
      for (const auto& [attribute, value] : it->second) members[{attribute, value}].push_back(lang);
    }
    for (const auto& [key, langs] : members) {
      GroupAccRow row{key.first, key.second, langs, {}, {}};
      for (const auto& v : bundle.variants) {
        std::vector<std::optional<double>> values;
        for (const auto& lang : langs) values.push_back(v.scores.recall_accuracy.at(lang));
        row.acc[v.variant] = mean_of(values);
      }
      for (const auto& v : bundle.variants) {
        if (v.variant != Variant::base) {
          row.improvement[v.variant] = improvement(row.acc[Variant::base], row.acc[v.variant]);
        }
      }
      bundle.groups.push_back(std::move(row));
    }
  }
  return bundle;
}

json to_json(const ReportBundle& bundle) {
  json variants = json::array();
  for (const auto& v : bundle.variants) {
    variants.push_back({{"variant", to_string(v.variant)},
                        {"source", v.source.string()},
                        {"sources", v.scores.sources},
                        {"seeds", v.scores.seeds},
                        {"pivot", v.scores.pivot ? json(*v.scores.pivot) : json(nullptr)}});
  }
  json acc = json::array();
  for (const auto& r : bundle.acc_by_language) {
    acc.push_back({{"language", r.language}, {"acc", variant_map(r.acc)}});
  }
  json improvements = json::array();
  for (const auto& r : bundle.improvements) {
    json formatted = json::object();
    for (const auto& [variant, v] : r.improvement) {
      formatted[std::string(to_string(variant))] = format_improvement(v);
    }
    improvements.push_back({{"metric", r.metric},
                            {"value", variant_map(r.value)},
                            {"improvement_percent", variant_map(r.improvement)},
                            {"improvement", formatted}});
  }
  json correlation = json::array();
  for (const auto& r : bundle.correlation) {
    correlation.push_back({{"model", r.model},
                           {"metric", r.metric},
                           {"against", "co"},
                           {"r", r.result ? json(r.result->r) : json(nullptr)},
                           {"p", r.result ? json(r.result->p) : json(nullptr)},
                           {"n_pairs", r.n_pairs},
                           {"n_undefined", r.n_undefined}});
  }
  json groups = json::array();
  for (const auto& g : bundle.groups) {
    groups.push_back({{"attribute", g.attribute},
                      {"group", g.group},
                      {"languages", g.languages},
                      {"acc", variant_map(g.acc)},
                      {"improvement_percent", variant_map(g.improvement)}});
  }
  json out{{"model", bundle.model},
           {"languages", bundle.languages},
           {"variants", variants},
           {"improvements", improvements},
           {"acc_by_language", acc},
           {"pairs", bundle.pairs},
           {"correlation", correlation},
           {"groups", groups}};
  if (bundle.partition) {
    json per_pair = json::array();
    for (const auto& p : bundle.partition->per_pair) {
      json row = report_json(p.report);
      row["lang_a"] = p.pair.a;
      row["lang_b"] = p.pair.b;
      row["excluded"] = p.excluded;
      per_pair.push_back(std::move(row));
    }
    out["partition"] = {{"overall", report_json(bundle.partition->overall)},
                        {"excluded", bundle.partition->excluded},
                        {"per_pair", per_pair}};
  }
  if (bundle.lens) {
    out["lens"] = {{"base", to_string(bundle.lens->base)},
                   {"treated", to_string(bundle.lens->treated)},
                   {"share_lower", opt(bundle.lens->share_lower)},
                   {"mean_delta_rank", opt(bundle.lens->mean_delta_rank)},
                   {"mean_delta_prob", opt(bundle.lens->mean_delta_prob)},
                   {"unmatched", bundle.lens->unmatched}};
  }
  return out;
}

std::string render_improvement_table(const ReportBundle& bundle) {
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", *v);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "model: " << bundle.model << '\n';
  out << "metric";
  for (const auto& v : bundle.variants) out << '\t' << to_string(v.variant);
  for (const auto& v : bundle.variants) {
    if (v.variant == Variant::subsub) out << "\t↑SubSub";
    if (v.variant == Variant::subinj) out << "\t↑SubInj";
  }
  out << '\n';
  for (const auto& r : bundle.improvements) {
    out << r.metric;
    for (const auto& v : bundle.variants) out << '\t' << cell(r.value.at(v.variant));
    for (const auto& v : bundle.variants) {
      if (v.variant != Variant::base) out << '\t' << format_improvement(r.improvement.at(v.variant));
    }
    out << '\n';
  }
  return out.str();
}

void write_pairs_csv(std::span<const PairMetrics> pairs, const std::filesystem::path& path) {
  CsvWriter csv(path, {"lang_a", "lang_b", "acc_sub_ab", "acc_sub_ba", "acc_obj_ab", "acc_obj_ba",
                       "acc_both_ab", "acc_both_ba", "align_sub", "align_obj", "align_both", "co",
                       "n_facts_evaluated", "n_recall_evaluated", "n_excluded"});
  for (const auto& m : pairs) {
    csv.row({m.pair.a, m.pair.b, format_number(m.acc_sub_ab), format_number(m.acc_sub_ba),
             format_number(m.acc_obj_ab), format_number(m.acc_obj_ba),
             format_number(m.acc_both_ab), format_number(m.acc_both_ba),
             format_number(m.align_sub), format_number(m.align_obj), format_number(m.align_both),
             format_number(m.co), std::to_string(m.n_facts_evaluated),
             std::to_string(m.n_recall_evaluated), std::to_string(m.n_excluded)});
  }
}

void write_correlation_csv(std::span<const CorrelationRow> rows, const std::filesystem::path& path) {
  CsvWriter csv(path, {"model", "metric", "against", "r", "p", "n_pairs", "n_undefined"});
  for (const auto& r : rows) {
    csv.row({r.model, r.metric, "co",
             r.result ? format_number(r.result->r) : std::string{},
             r.result ? format_number(r.result->p) : std::string{}, std::to_string(r.n_pairs),
             std::to_string(r.n_undefined)});
  }
}

void write_partition_csv(const PartitionSummary& summary, const std::filesystem::path& path) {
  CsvWriter csv(path, {"lang_a", "lang_b", "total", "consistent", "inconsistent", "aligned",
                       "non_aligned", "consistent_aligned", "consistent_non_aligned",
                       "inconsistent_non_aligned", "consistent_aligned_share",
                       "consistent_non_aligned_share", "non_aligned_consistent_share",
                       "non_aligned_inconsistent_share", "excluded"});
  for (const auto& p : summary.per_pair) {
    csv.row(partition_cells(p.pair.a, p.pair.b, p.report, p.excluded));
  }
  csv.row(partition_cells("all", "all", summary.overall, summary.excluded));
}

void write_bounds_csv(const BoundReport& report, const std::filesystem::path& path) {
  CsvWriter csv(path, {"lang_a", "lang_b", "co", "align_obj", "violated"});
  for (const auto& r : report.rows) {
    csv.row({r.pair.a, r.pair.b, format_number(r.co), format_number(r.align_obj),
             r.violated ? "1" : "0"});
  }
}

void write_report(const ReportBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "report.json", std::ios::binary | std::ios::trunc);
    if (!out) throw MetricsError("cannot write " + (dir / "report.json").string());
    out << to_json(bundle).dump(2) << '\n';
  }

  std::vector<std::string> header{"metric"};
  for (const auto& v : bundle.variants) header.emplace_back(to_string(v.variant));
  for (const auto& v : bundle.variants) {
    if (v.variant != Variant::base) header.push_back("improvement_" + std::string(to_string(v.variant)));
  }
  CsvWriter table(dir / "improvements.csv", header);
  for (const auto& r : bundle.improvements) {
    std::vector<std::string> cells{r.metric};
    for (const auto& v : bundle.variants) cells.push_back(format_number(r.value.at(v.variant)));
    for (const auto& v : bundle.variants) {
      if (v.variant != Variant::base) cells.push_back(format_improvement(r.improvement.at(v.variant)));
    }
    table.row(cells);
  }

  header = {"language"};
  for (const auto& v : bundle.variants) header.emplace_back(to_string(v.variant));
  CsvWriter acc(dir / "acc_by_language.csv", header);
  for (const auto& r : bundle.acc_by_language) {
    std::vector<std::string> cells{r.language};
    for (const auto& v : bundle.variants) cells.push_back(format_number(r.acc.at(v.variant)));
    acc.row(cells);
  }

  write_pairs_csv(bundle.pairs, dir / "pairs.csv");
  write_correlation_csv(bundle.correlation, dir / "correlation.csv");
  if (bundle.partition) write_partition_csv(*bundle.partition, dir / "partition.csv");

  if (!bundle.groups.empty()) {
    header = {"attribute", "group", "languages"};
    for (const auto& v : bundle.variants) header.emplace_back(to_string(v.variant));
    for (const auto& v : bundle.variants) {
      if (v.variant != Variant::base) header.push_back("improvement_" + std::string(to_string(v.variant)));
    }
    CsvWriter groups(dir / "groups.csv", header);
    for (const auto& g : bundle.groups) {
      std::string langs;
      for (const auto& l : g.languages) langs += (langs.empty() ? "" : " ") + l;
      std::vector<std::string> cells{g.attribute, g.group, langs};
      for (const auto& v : bundle.variants) cells.push_back(format_number(g.acc.at(v.variant)));
      for (const auto& v : bundle.variants) {
        if (v.variant != Variant::base) cells.push_back(format_improvement(g.improvement.at(v.variant)));
      }
      groups.row(cells);
    }
  }
}

}  // namespace xprobe
