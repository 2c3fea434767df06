#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "xprobe/common.hpp"
#include "xprobe/normalize.hpp"

namespace xprobe {

/// True iff normalize(target) occurs contiguously in normalize(completion).
/// Throws std::invalid_argument for an empty target.
bool contains_answer(std::string_view completion, std::string_view target,
                     const NormalizationPolicy& policy = {});

/// Mean of the indicators; nullopt for an empty list.
std::optional<double> directional_accuracy(std::span<const bool> flags);

/// (acc_ab + acc_ba) / 2. Both inputs must lie in [0, 1].
double align_score(double acc_ab, double acc_ba);

/// 100 * (treated - base) / base, or nullopt when base is 0.
std::optional<double> relative_improvement(double base, double treated);

struct RecallOutcome {
  std::string fact_id;
  std::string language;
  bool correct = false;
};

struct TranslationOutcome {
  std::string fact_id;
  std::string source;
  std::string target;
  EntityRole role = EntityRole::subject;
  bool correct = false;
};

/// Lookup over judged outcomes. Duplicate keys throw MetricsError.
class OutcomeIndex {
 public:
  OutcomeIndex(std::span<const RecallOutcome> recall, std::span<const TranslationOutcome> translation);

  std::optional<bool> recall(std::string_view fact_id, std::string_view language) const;
  std::optional<bool> translation(std::string_view fact_id, std::string_view source,
                                  std::string_view target, EntityRole role) const;

  /// Fact ids in order of first appearance across both outcome lists.
  const std::vector<std::string>& fact_ids() const { return fact_ids_; }
  bool has_recall() const { return !recall_.empty(); }
  bool has_translation() const { return !translation_.empty(); }

  /// Throws MetricsError if both kinds are present and cover different fact ids.
  void require_same_facts() const;

 private:
  std::map<std::pair<std::string, std::string>, bool, std::less<>> recall_;
  std::map<std::tuple<std::string, std::string, std::string, EntityRole>, bool, std::less<>>
      translation_;
  std::vector<std::string> fact_ids_;
  std::vector<std::string> recall_ids_;
  std::vector<std::string> translation_ids_;
};

/// Per-fact membership for one language pair.
struct FactFlags {
  // Indices into trans_ok.
  enum : std::size_t { subject_ab = 0, subject_ba = 1, object_ab = 2, object_ba = 3 };

  std::string fact_id;
  LanguagePair pair;
  bool recall_correct_a = false;
  bool recall_correct_b = false;
  std::array<bool, 4> trans_ok{};

  bool consistent() const { return recall_correct_a && recall_correct_b; }
  bool aligned() const { return trans_ok[0] || trans_ok[1] || trans_ok[2] || trans_ok[3]; }
};

struct Classification {
  std::vector<FactFlags> flags;
  std::size_t excluded = 0;  // facts without both recalls and all four translations
};

Classification classify_facts(const OutcomeIndex& outcomes, const LanguagePair& pair);

/// Jaccard index of the two languages' correctly recalled fact sets; nullopt
/// when no fact is correct in either. Mixed pairs throw MetricsError.
std::optional<double> consistency(std::span<const FactFlags> flags);

struct PairMetrics {
  LanguagePair pair;
  std::optional<double> acc_sub_ab, acc_sub_ba;
  std::optional<double> acc_obj_ab, acc_obj_ba;
  std::optional<double> acc_both_ab, acc_both_ba;
  std::optional<double> align_sub, align_obj, align_both;
  std::optional<double> co;
  std::size_t n_facts_evaluated = 0;   // facts with all four translation outcomes
  std::size_t n_recall_evaluated = 0;  // facts recalled in both languages
  std::size_t n_excluded = 0;          // facts seen for the pair but incomplete
  std::size_t co_intersection = 0;
  std::size_t co_union = 0;
};

void to_json(nlohmann::json& out, const PairMetrics& metrics);
void from_json(const nlohmann::json& in, PairMetrics& metrics);

PairMetrics compute_pair_metrics(const OutcomeIndex& outcomes, const LanguagePair& pair);

/// ACC(l) over facts with a recall outcome in `language`.
std::optional<double> recall_accuracy(const OutcomeIndex& outcomes, std::string_view language);

struct PartitionReport {
  std::size_t total = 0;
  std::size_t consistent = 0;
  std::size_t inconsistent = 0;
  std::size_t aligned = 0;
  std::size_t non_aligned = 0;
  std::size_t consistent_aligned = 0;
  std::size_t consistent_non_aligned = 0;
  std::size_t inconsistent_non_aligned = 0;

  std::optional<double> share(std::size_t count) const;
  /// Among consistent facts: aligned / non-aligned shares.
  std::optional<double> consistent_aligned_share() const;
  std::optional<double> consistent_non_aligned_share() const;
  /// Among non-aligned facts: consistent / inconsistent shares.
  std::optional<double> non_aligned_consistent_share() const;
  std::optional<double> non_aligned_inconsistent_share() const;
};

PartitionReport partition_counts(std::span<const FactFlags> flags);

/// Facts x pairs, the number of per-pair fact evaluations of a complete run.
std::size_t expected_partition_total(std::size_t n_facts, std::size_t n_languages);

struct PearsonResult {
  double r = 0.0;
  double p = 1.0;  // two-sided, Student t with n-2 degrees of freedom
  std::size_t n = 0;
};

/// Throws MetricsError unless the lengths match and are >= 3; nullopt on zero variance.
std::optional<PearsonResult> pearson(std::span<const double> x, std::span<const double> y);

struct BoundRow {
  LanguagePair pair;
  double co = 0.0;
  double align_obj = 0.0;
  bool violated = false;  // co > align_obj
};

struct BoundReport {
  std::vector<BoundRow> rows;
  std::size_t skipped = 0;  // pairs with undefined co or align_obj
  std::optional<double> violation_rate() const;
};

BoundReport bound_report(std::span<const PairMetrics> metrics);

}  // namespace xprobe
