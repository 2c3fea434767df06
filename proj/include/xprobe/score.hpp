#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xprobe/eval_runner.hpp"
#include "xprobe/metrics.hpp"

namespace xprobe {

inline constexpr int kScoreSchemaVersion = 1;

/// Contents of metrics.json: per-language recall accuracy and per-pair metrics
/// for one model and one recall variant, with provenance.
struct ScoreDocument {
  std::string model;
  std::optional<Variant> variant;
  std::optional<std::string> pivot;
  NormalizationPolicy policy;
  bool rejudged = false;
  std::vector<std::string> languages;
  std::vector<std::string> sources;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::optional<double>> recall_accuracy;
  std::vector<PairMetrics> pairs;
  std::size_t n_recall_records = 0;
  std::size_t n_translation_records = 0;

  /// Mean of the defined per-language accuracies.
  std::optional<double> mean_recall_accuracy() const;
  /// Mean of the defined per-pair CO values.
  std::optional<double> mean_consistency() const;
};

void to_json(nlohmann::json& out, const ScoreDocument& doc);
void from_json(const nlohmann::json& in, ScoreDocument& doc);

ScoreDocument load_scores(const std::filesystem::path& path);
void save_scores(const ScoreDocument& doc, const std::filesystem::path& path);

struct ScoreOptions {
  /// Languages to score, in order; empty takes them from the records.
  std::vector<std::string> languages;
  /// Re-judge every completion under this policy instead of the recorded one.
  std::optional<NormalizationPolicy> rejudge;
};

/// Outcomes from judged records. Recall records must share one variant/pivot.
OutcomeIndex index_outcomes(std::span<const ResultRecord> records,
                            const std::optional<NormalizationPolicy>& rejudge = std::nullopt);

ScoreDocument score_results(std::span<const ResultRecord> records,
                            std::vector<std::string> sources, const ScoreOptions& options = {});

/// Languages seen in the records, in order of first appearance.
std::vector<std::string> record_languages(std::span<const ResultRecord> records);

struct PairPartition {
  LanguagePair pair;
  PartitionReport report;
  std::size_t excluded = 0;
};

struct PartitionSummary {
  PartitionReport overall;
  std::vector<PairPartition> per_pair;
  std::size_t excluded = 0;
};

/// C/I/A/N over every pair of `languages`; needs both recall and translation outcomes.
PartitionSummary partition_results(const OutcomeIndex& outcomes,
                                   std::span<const std::string> languages);

struct CorrelationRow {
  std::string model;
  std::string metric;  // align_sub | align_obj | align_both, always against co
  std::optional<PearsonResult> result;
  std::size_t n_pairs = 0;
  std::size_t n_undefined = 0;  // pairs dropped for an undefined co or align value
};

std::vector<CorrelationRow> correlate(const ScoreDocument& doc);

}  // namespace xprobe
