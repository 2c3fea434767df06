#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "xprobe/lens_analyzer.hpp"
#include "xprobe/score.hpp"

namespace xprobe {

/// "+13.7%", "-2.0%", "0.0%"; "n/a" when undefined.
std::string format_improvement(const std::optional<double>& percent);

struct VariantScores {
  Variant variant = Variant::base;
  std::filesystem::path source;
  ScoreDocument scores;
};

struct ImprovementRow {
  std::string metric;  // ACC or CO
  std::map<Variant, std::optional<double>> value;
  std::map<Variant, std::optional<double>> improvement;  // percent over base, treated variants only
};

struct LanguageAccRow {
  std::string language;
  std::map<Variant, std::optional<double>> acc;
};

/// language -> attribute (e.g. family, script) -> value
using LanguageGroups = std::map<std::string, std::map<std::string, std::string>>;

LanguageGroups load_language_groups(const std::filesystem::path& path);

struct GroupAccRow {
  std::string attribute;
  std::string group;
  std::vector<std::string> languages;
  std::map<Variant, std::optional<double>> acc;
  std::map<Variant, std::optional<double>> improvement;
};

struct LensSummary {
  Variant base = Variant::base;
  Variant treated = Variant::subinj;
  std::optional<double> share_lower;
  std::optional<double> mean_delta_rank;
  std::optional<double> mean_delta_prob;
  std::vector<std::string> unmatched;
};

LensSummary summarize(const VariantComparison& comparison);

struct ReportBundle {
  std::string model;
  std::vector<std::string> languages;
  std::vector<VariantScores> variants;  // base first
  std::vector<LanguageAccRow> acc_by_language;
  std::vector<PairMetrics> pairs;  // from the base scores
  std::vector<CorrelationRow> correlation;
  std::vector<ImprovementRow> improvements;
  std::vector<GroupAccRow> groups;
  std::optional<PartitionSummary> partition;
  std::optional<LensSummary> lens;
};

nlohmann::json to_json(const ReportBundle& bundle);

struct ReportInputs {
  std::filesystem::path base;
  std::optional<std::filesystem::path> subsub;
  std::optional<std::filesystem::path> subinj;
  std::optional<std::filesystem::path> groups;
};

/// Throws MetricsError when a file is missing or the variants cover different languages.
ReportBundle build_report(const ReportInputs& inputs);

/// Tab-separated table: one line per metric, variant values then improvements over base.
std::string render_improvement_table(const ReportBundle& bundle);

/// report.json, improvements.csv, acc_by_language.csv, pairs.csv, correlation.csv and,
/// when present, groups.csv.
void write_report(const ReportBundle& bundle, const std::filesystem::path& dir);

void write_pairs_csv(std::span<const PairMetrics> pairs, const std::filesystem::path& path);
void write_correlation_csv(std::span<const CorrelationRow> rows, const std::filesystem::path& path);
void write_partition_csv(const PartitionSummary& summary, const std::filesystem::path& path);
void write_bounds_csv(const BoundReport& report, const std::filesystem::path& path);

}  // namespace xprobe
