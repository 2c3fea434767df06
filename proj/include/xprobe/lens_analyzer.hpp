#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xprobe/common.hpp"

namespace xprobe {

inline constexpr std::string_view kTraceSchema = "lens-trace/1";

/// Languages tracked besides the input language when none are given.
std::vector<std::string> default_tracked_targets();

struct TraceHeader {
  std::string model;
  int n_layers = 0;
  long long vocab_size = 0;
  std::vector<std::string> targets;
  int first_layer = 0;  // 0 = embedding output, 1 = first block
  nlohmann::json extra = nlohmann::json::object();
};

void to_json(nlohmann::json& out, const TraceHeader& header);

struct LayerPoint {
  int layer = 0;
  long long rank = 1;
  double prob = 0.0;
};

struct LensTraceRecord {
  std::string fact_id;
  std::string input_language;
  Variant variant = Variant::base;
  std::string target_language;
  long long target_token_id = 0;
  std::string target_token_text;
  std::vector<LayerPoint> per_layer;
};

void to_json(nlohmann::json& out, const LensTraceRecord& record);

struct Trace {
  TraceHeader header;
  std::vector<LensTraceRecord> records;
  std::vector<int> layer_axis() const;
};

/// Parses and validates a lens-trace/1 document. Errors carry the line number.
Trace parse_trace(std::string_view text, const std::string& source = "<trace>");
Trace load_trace(const std::filesystem::path& path);
void save_trace(const Trace& trace, const std::filesystem::path& path);

struct CurveKey {
  std::string input_language;
  Variant variant = Variant::base;
  std::string target_language;

  auto operator<=>(const CurveKey&) const = default;
};

struct CurveTable {
  CurveKey key;
  std::vector<int> layers;
  std::vector<double> mean_rank;
  std::vector<double> median_rank;
  std::vector<double> mean_prob;
  std::size_t n = 0;
};

/// Aggregates the records matching `key`; nullopt for an empty group.
std::optional<CurveTable> curve(std::span<const LensTraceRecord> records, const CurveKey& key);

/// One table per grouping present in the records, in key order.
std::vector<CurveTable> curves(std::span<const LensTraceRecord> records);

struct DeltaRow {
  std::string input_language;
  std::string target_language;
  int layer = 0;
  double base_mean_rank = 0.0;
  double treated_mean_rank = 0.0;
  double delta_mean_rank = 0.0;  // treated - base
  double delta_mean_prob = 0.0;
  bool treated_lower = false;
};

struct VariantComparison {
  Variant base = Variant::base;
  Variant treated = Variant::subinj;
  std::vector<DeltaRow> rows;
  /// Groupings present on only one side, as "input_language/target_language".
  std::vector<std::string> unmatched;
  /// Share of (grouping, layer) rows where the treated mean rank is lower.
  std::optional<double> share_lower() const;
};

/// Matches curves on (input_language, target_language). Throws TraceError on an axis mismatch.
VariantComparison compare_variants(std::span<const CurveTable> base,
                                   std::span<const CurveTable> treated);

void write_curves_csv(std::span<const CurveTable> tables, const std::filesystem::path& path);
void write_deltas_csv(const VariantComparison& comparison, const std::filesystem::path& path);

}  // namespace xprobe
