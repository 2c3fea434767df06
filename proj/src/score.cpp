#include "xprobe/score.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace xprobe {
namespace {

using nlohmann::json;

template <typename Range>
std::optional<double> mean_defined(const Range& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const std::optional<double>& v : values) {
    if (!v) continue;
    sum += *v;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace

std::optional<double> ScoreDocument::mean_recall_accuracy() const {
  std::vector<std::optional<double>> values;
  for (const auto& lang : languages) {
    auto it = recall_accuracy.find(lang);
    if (it != recall_accuracy.end()) values.push_back(it->second);
  }
  return mean_defined(values);
}

std::optional<double> ScoreDocument::mean_consistency() const {
  std::vector<std::optional<double>> values;
  for (const auto& p : pairs) values.push_back(p.co);
  return mean_defined(values);
}

void to_json(json& out, const ScoreDocument& doc) {
  json acc = json::object();
  for (const auto& [lang, v] : doc.recall_accuracy) acc[lang] = v ? json(*v) : json(nullptr);
  out = json{{"schema_version", kScoreSchemaVersion},
             {"model", doc.model},
             {"variant", doc.variant ? json(to_string(*doc.variant)) : json(nullptr)},
             {"pivot", doc.pivot ? json(*doc.pivot) : json(nullptr)},
             {"policy", doc.policy},
             {"rejudged", doc.rejudged},
             {"languages", doc.languages},
             {"sources", doc.sources},
             {"seeds", doc.seeds},
             {"recall_accuracy", acc},
             {"mean_recall_accuracy", doc.mean_recall_accuracy() ? json(*doc.mean_recall_accuracy()) : json(nullptr)},
             {"mean_consistency", doc.mean_consistency() ? json(*doc.mean_consistency()) : json(nullptr)},
             {"n_recall_records", doc.n_recall_records},
             {"n_translation_records", doc.n_translation_records},
             {"pairs", doc.pairs}};
}

void from_json(const json& in, ScoreDocument& doc) {
  const int version = in.at("schema_version").get<int>();
  if (version != kScoreSchemaVersion) {
    throw MetricsError("unsupported metrics schema_version " + std::to_string(version));
  }
  doc = ScoreDocument{};
  doc.model = in.value("model", std::string{});
  if (in.contains("variant") && !in["variant"].is_null()) {
    doc.variant = parse_variant(in["variant"].get<std::string>());
  }
  if (in.contains("pivot") && !in["pivot"].is_null()) doc.pivot = in["pivot"].get<std::string>();
  doc.policy = in.at("policy").get<NormalizationPolicy>();
  doc.rejudged = in.value("rejudged", false);
  doc.languages = in.at("languages").get<std::vector<std::string>>();
  doc.sources = in.value("sources", std::vector<std::string>{});
  doc.seeds = in.value("seeds", std::vector<std::uint64_t>{});
  for (const auto& [lang, v] : in.at("recall_accuracy").items()) {
    doc.recall_accuracy[lang] = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
  }
  doc.pairs = in.at("pairs").get<std::vector<PairMetrics>>();
  doc.n_recall_records = in.value("n_recall_records", std::size_t{0});
  doc.n_translation_records = in.value("n_translation_records", std::size_t{0});
}

ScoreDocument load_scores(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MetricsError("cannot read " + path.string());
  try {
    return json::parse(in).get<ScoreDocument>();
  } catch (const json::exception& e) {
    throw MetricsError(path.string() + ": " + e.what());
  }
}

void save_scores(const ScoreDocument& doc, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw MetricsError("cannot write " + path.string());
  out << json(doc).dump(2) << '\n';
}

OutcomeIndex index_outcomes(std::span<const ResultRecord> records,
                            const std::optional<NormalizationPolicy>& rejudge) {
  std::vector<RecallOutcome> recall;
  std::vector<TranslationOutcome> translation;
  std::optional<std::pair<Variant, std::string>> recall_setting;
  for (const auto& r : records) {
    const bool ok = rejudge ? contains_answer(r.completion.completion_text,
                                              r.prompt.expected_answer, *rejudge)
                            : r.correct;
    if (r.prompt.task == Task::recall) {
      const std::pair setting{r.prompt.variant.value_or(Variant::base),
                              r.prompt.pivot_lang.value_or("")};
      if (!recall_setting) {
        recall_setting = setting;
      } else if (*recall_setting != setting) {
        throw MetricsError("recall records mix variants (" +
                           std::string(to_string(recall_setting->first)) + " and " +
                           std::string(to_string(setting.first)) + "); score them separately");
      }
      recall.push_back({r.prompt.fact_id, r.prompt.target_lang, ok});
    } else {
      translation.push_back({r.prompt.fact_id, r.prompt.source_lang, r.prompt.target_lang,
                             r.prompt.role.value_or(EntityRole::subject), ok});
    }
  }
  return OutcomeIndex(recall, translation);
}

std::vector<std::string> record_languages(std::span<const ResultRecord> records) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : records) {
    for (const auto* lang : {&r.prompt.source_lang, &r.prompt.target_lang}) {
      if (seen.insert(*lang).second) out.push_back(*lang);
    }
  }
  return out;
}

ScoreDocument score_results(std::span<const ResultRecord> records,
                            std::vector<std::string> sources, const ScoreOptions& options) {
  const OutcomeIndex outcomes = index_outcomes(records, options.rejudge);

  ScoreDocument doc;
  doc.sources = std::move(sources);
  doc.languages = options.languages.empty() ? record_languages(records) : options.languages;
  doc.rejudged = options.rejudge.has_value();

  std::set<std::string> models;
  std::set<std::uint64_t> seeds;
  std::optional<NormalizationPolicy> recorded_policy;
  for (const auto& r : records) {
    models.insert(r.completion.backend_id);
    seeds.insert(r.run_seed);
    if (r.prompt.task == Task::recall) {
      ++doc.n_recall_records;
      doc.variant = r.prompt.variant.value_or(Variant::base);
      doc.pivot = r.prompt.pivot_lang;
    } else {
      ++doc.n_translation_records;
    }
    if (!options.rejudge) {
      if (recorded_policy && *recorded_policy != r.policy) {
        throw MetricsError("records were judged under different normalization policies; "
                           "re-judge them with one policy");
      }
      recorded_policy = r.policy;
    }
  }
  doc.policy = options.rejudge ? *options.rejudge : recorded_policy.value_or(NormalizationPolicy{});
  for (const auto& m : models) doc.model += (doc.model.empty() ? "" : "+") + m;
  doc.seeds.assign(seeds.begin(), seeds.end());

  for (const auto& lang : doc.languages) {
    doc.recall_accuracy[lang] = recall_accuracy(outcomes, lang);
  }
  for (const auto& pair : enumerate_pairs(doc.languages)) {
    doc.pairs.push_back(compute_pair_metrics(outcomes, pair));
  }
  return doc;
}

PartitionSummary partition_results(const OutcomeIndex& outcomes,
                                   std::span<const std::string> languages) {
  if (!outcomes.has_recall() || !outcomes.has_translation()) {
    throw MetricsError("partition needs both recall and translation results");
  }
  PartitionSummary summary;
  std::vector<FactFlags> all;
  for (const auto& pair : enumerate_pairs(languages)) {
    Classification c = classify_facts(outcomes, pair);
    summary.per_pair.push_back({pair, partition_counts(c.flags), c.excluded});
    summary.excluded += c.excluded;
    all.insert(all.end(), std::make_move_iterator(c.flags.begin()),
               std::make_move_iterator(c.flags.end()));
  }
  summary.overall = partition_counts(all);
  return summary;
}

std::vector<CorrelationRow> correlate(const ScoreDocument& doc) {
  using Getter = std::optional<double> PairMetrics::*;
  const std::pair<const char*, Getter> metrics[] = {{"align_sub", &PairMetrics::align_sub},
                                                    {"align_obj", &PairMetrics::align_obj},
                                                    {"align_both", &PairMetrics::align_both}};
  std::vector<CorrelationRow> rows;
  for (const auto& [name, field] : metrics) {
    CorrelationRow row;
    row.model = doc.model;
    row.metric = name;
    std::vector<double> x, y;
    for (const auto& p : doc.pairs) {
      const auto& align = p.*field;
      if (!align || !p.co) {
        ++row.n_undefined;
        continue;
      }
      x.push_back(*align);
      y.push_back(*p.co);
    }
    row.n_pairs = x.size();
    if (x.size() >= 3) row.result = pearson(x, y);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace xprobe
