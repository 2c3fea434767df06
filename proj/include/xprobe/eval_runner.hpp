#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "xprobe/fact_store.hpp"
#include "xprobe/model_gateway.hpp"
#include "xprobe/normalize.hpp"
#include "xprobe/prompt_forge.hpp"

namespace xprobe {

inline constexpr int kResultSchemaVersion = 1;
inline constexpr std::string_view kDefaultPivot = "eng_Latn";

/// One judged completion; self-describing so it can be re-scored without the run config.
struct ResultRecord {
  PromptSpec prompt;
  CompletionRecord completion;
  bool correct = false;
  NormalizationPolicy policy;
  std::uint64_t run_seed = 0;
  std::size_t shots = 0;
};

void to_json(nlohmann::json& out, const ResultRecord& record);
void from_json(const nlohmann::json& in, ResultRecord& record);

/// Identity of a record within a run: (fact, direction, role) or (fact, language, variant, pivot).
std::string record_key(const PromptSpec& spec);

struct RunConfig {
  Task task = Task::recall;
  std::vector<std::string> languages;  // empty selects every declared language
  Variant variant = Variant::base;
  std::optional<std::string> pivot;    // defaults to eng_Latn for non-base variants
  std::size_t shots = 3;
  std::uint64_t seed = 0;
  GenParams params = GenParams::defaults_for(Task::recall);
  std::size_t parallelism = 4;
  std::filesystem::path output;
  RecallOptions recall_options;
  NormalizationPolicy policy;
  LanguageLabels labels = LanguageLabels::bundled();

  /// Languages the run covers, in dataset order. Throws RunError on unknown codes.
  std::vector<std::string> selected_languages(const FactStore& store) const;
  std::optional<std::string> effective_pivot() const;
  /// Throws RunError when the config cannot run against `store`.
  void check(const FactStore& store) const;
};

/// Counts for a run without building prompts or calling a model.
struct RunPlan {
  std::vector<std::string> languages;
  std::vector<LanguagePair> pairs;
  std::size_t prompts = 0;
  /// Sum over pairs of facts realized in both languages; the C/I/A/N universe.
  std::size_t evaluated_fact_pairs = 0;
  /// Facts left out of at least one pair or language for missing realizations.
  std::size_t skipped_facts = 0;
};

RunPlan plan_run(const FactStore& store, const RunConfig& config);

struct PromptJob {
  PromptSpec spec;
  std::string key;
};

/// Every prompt of the run in canonical order: per pair, both directions, both
/// roles (translation); per language (recall). Exemplars are sampled with a
/// seed derived from (run seed, fact id).
std::vector<PromptJob> build_jobs(const FactStore& store, const RunConfig& config);

struct RunSummary {
  std::size_t planned = 0;
  std::size_t skipped_existing = 0;
  std::size_t written = 0;
  std::size_t failed = 0;
  std::vector<std::string> failures;  // first few error messages
  bool complete() const { return failed == 0; }
};

/// Runs (or resumes) the evaluation into `config.output`. Records already in
/// the log are not repeated; a torn final line is discarded. When items fail
/// after retries a resume marker line is appended and the run can be repeated.
RunSummary run_evaluation(const FactStore& store, Gateway& gateway, const RunConfig& config);

struct ResultLog {
  std::vector<ResultRecord> records;
  std::size_t resume_markers = 0;
  bool torn_tail = false;
};

/// Reads a results.jsonl file. Malformed lines other than a torn final line throw RunError.
ResultLog read_results(const std::filesystem::path& path);

/// Writes one PromptSpec per line with `targets`: object surfaces for the
/// tracked languages (plus the prompt language) where the fact realizes them.
std::size_t emit_prompts(const FactStore& store, const RunConfig& config,
                         const std::vector<std::string>& tracked,
                         const std::filesystem::path& out);

}  // namespace xprobe
