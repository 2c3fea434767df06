#include "xprobe/metrics.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <set>
#include <stdexcept>

namespace xprobe {
namespace {

using nlohmann::json;

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_opt(const json& in, const char* key) {
  if (!in.contains(key) || in.at(key).is_null()) return std::nullopt;
  return in.at(key).get<double>();
}

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> align_opt(const std::optional<double>& ab, const std::optional<double>& ba) {
  if (!ab || !ba) return std::nullopt;
  return align_score(*ab, *ba);
}

void note_id(std::vector<std::string>& ids, std::set<std::string, std::less<>>& seen,
             const std::string& id) {
  if (seen.insert(id).second) ids.push_back(id);
}

// Same hits / n arithmetic as directional_accuracy.
struct Tally {
  std::size_t hits = 0;
  std::size_t n = 0;
  void add(bool ok) {
    hits += ok ? 1 : 0;
    ++n;
  }
  std::optional<double> value() const { return ratio(hits, n); }
};

}  // namespace

bool contains_answer(std::string_view completion, std::string_view target,
                     const NormalizationPolicy& policy) {
  if (target.empty()) throw std::invalid_argument("contains_answer: empty target");
  const std::string needle = normalize(target, policy);
  if (needle.empty()) return true;
  return normalize(completion, policy).find(needle) != std::string::npos;
}

std::optional<double> directional_accuracy(std::span<const bool> flags) {
  const auto hits = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
  return ratio(hits, flags.size());
}

double align_score(double acc_ab, double acc_ba) {
  if (!(acc_ab >= 0.0 && acc_ab <= 1.0) || !(acc_ba >= 0.0 && acc_ba <= 1.0)) {
    throw MetricsError("align_score: accuracies must lie in [0, 1]");
  }
  return (acc_ab + acc_ba) / 2.0;
}

std::optional<double> relative_improvement(double base, double treated) {
  if (base == 0.0) return std::nullopt;
  return 100.0 * (treated - base) / base;
}

OutcomeIndex::OutcomeIndex(std::span<const RecallOutcome> recall,
                           std::span<const TranslationOutcome> translation) {
  std::set<std::string, std::less<>> seen_all, seen_recall, seen_translation;
  for (const auto& o : recall) {
    if (!recall_.emplace(std::pair{o.fact_id, o.language}, o.correct).second) {
      throw MetricsError("duplicate recall outcome for fact " + o.fact_id + " in " + o.language);
    }
    note_id(fact_ids_, seen_all, o.fact_id);
    note_id(recall_ids_, seen_recall, o.fact_id);
  }
  for (const auto& o : translation) {
    if (!translation_.emplace(std::tuple{o.fact_id, o.source, o.target, o.role}, o.correct).second) {
      throw MetricsError("duplicate translation outcome for fact " + o.fact_id + " " + o.source +
                         "->" + o.target + " " + std::string(to_string(o.role)));
    }
    note_id(fact_ids_, seen_all, o.fact_id);
    note_id(translation_ids_, seen_translation, o.fact_id);
  }
}

std::optional<bool> OutcomeIndex::recall(std::string_view fact_id, std::string_view language) const {
  auto it = recall_.find(std::pair{std::string(fact_id), std::string(language)});
  if (it == recall_.end()) return std::nullopt;
  return it->second;
}

std::optional<bool> OutcomeIndex::translation(std::string_view fact_id, std::string_view source,
                                              std::string_view target, EntityRole role) const {
  auto it = translation_.find(
      std::tuple{std::string(fact_id), std::string(source), std::string(target), role});
  if (it == translation_.end()) return std::nullopt;
  return it->second;
}

void OutcomeIndex::require_same_facts() const {
  if (recall_.empty() || translation_.empty()) return;
  std::set<std::string> r(recall_ids_.begin(), recall_ids_.end());
  std::set<std::string> t(translation_ids_.begin(), translation_ids_.end());
  if (r == t) return;
  std::vector<std::string> diff;
  std::set_symmetric_difference(r.begin(), r.end(), t.begin(), t.end(), std::back_inserter(diff));
  throw MetricsError("recall and translation results cover different facts (e.g. " + diff.front() +
                     ", " + std::to_string(diff.size()) + " ids differ)");
}

Classification classify_facts(const OutcomeIndex& outcomes, const LanguagePair& pair) {
  outcomes.require_same_facts();
  Classification out;
  for (const auto& id : outcomes.fact_ids()) {
    const auto ra = outcomes.recall(id, pair.a);
    const auto rb = outcomes.recall(id, pair.b);
    const std::array<std::optional<bool>, 4> t{
        outcomes.translation(id, pair.a, pair.b, EntityRole::subject),
        outcomes.translation(id, pair.b, pair.a, EntityRole::subject),
        outcomes.translation(id, pair.a, pair.b, EntityRole::object),
        outcomes.translation(id, pair.b, pair.a, EntityRole::object)};
    const bool any = ra || rb || std::any_of(t.begin(), t.end(), [](auto v) { return v.has_value(); });
    if (!any) continue;
    const bool complete =
        ra && rb && std::all_of(t.begin(), t.end(), [](auto v) { return v.has_value(); });
    if (!complete) {
      ++out.excluded;
      continue;
    }
    FactFlags f;
    f.fact_id = id;
    f.pair = pair;
    f.recall_correct_a = *ra;
    f.recall_correct_b = *rb;
    for (std::size_t i = 0; i < 4; ++i) f.trans_ok[i] = *t[i];
    out.flags.push_back(std::move(f));
  }
  return out;
}

std::optional<double> consistency(std::span<const FactFlags> flags) {
  std::size_t both = 0, either = 0;
  for (const auto& f : flags) {
    if (f.pair != flags.front().pair) {
      throw MetricsError("consistency: flags mix pairs " + flags.front().pair.a + "/" +
                         flags.front().pair.b + " and " + f.pair.a + "/" + f.pair.b);
    }
    both += (f.recall_correct_a && f.recall_correct_b) ? 1 : 0;
    either += (f.recall_correct_a || f.recall_correct_b) ? 1 : 0;
  }
  return ratio(both, either);
}

void to_json(json& out, const PairMetrics& m) {
  out = json{{"lang_a", m.pair.a},
             {"lang_b", m.pair.b},
             {"acc_sub_ab", opt(m.acc_sub_ab)},
             {"acc_sub_ba", opt(m.acc_sub_ba)},
             {"acc_obj_ab", opt(m.acc_obj_ab)},
             {"acc_obj_ba", opt(m.acc_obj_ba)},
             {"acc_both_ab", opt(m.acc_both_ab)},
             {"acc_both_ba", opt(m.acc_both_ba)},
             {"align_sub", opt(m.align_sub)},
             {"align_obj", opt(m.align_obj)},
             {"align_both", opt(m.align_both)},
             {"co", opt(m.co)},
             {"co_intersection", m.co_intersection},
             {"co_union", m.co_union},
             {"n_facts_evaluated", m.n_facts_evaluated},
             {"n_recall_evaluated", m.n_recall_evaluated},
             {"n_excluded", m.n_excluded}};
}

void from_json(const json& in, PairMetrics& m) {
  m = PairMetrics{};
  m.pair = {in.at("lang_a").get<std::string>(), in.at("lang_b").get<std::string>()};
  m.acc_sub_ab = read_opt(in, "acc_sub_ab");
  m.acc_sub_ba = read_opt(in, "acc_sub_ba");
  m.acc_obj_ab = read_opt(in, "acc_obj_ab");
  m.acc_obj_ba = read_opt(in, "acc_obj_ba");
  m.acc_both_ab = read_opt(in, "acc_both_ab");
  m.acc_both_ba = read_opt(in, "acc_both_ba");
  m.align_sub = read_opt(in, "align_sub");
  m.align_obj = read_opt(in, "align_obj");
  m.align_both = read_opt(in, "align_both");
  m.co = read_opt(in, "co");
  m.co_intersection = in.value("co_intersection", std::size_t{0});
  m.co_union = in.value("co_union", std::size_t{0});
  m.n_facts_evaluated = in.value("n_facts_evaluated", std::size_t{0});
  m.n_recall_evaluated = in.value("n_recall_evaluated", std::size_t{0});
  m.n_excluded = in.value("n_excluded", std::size_t{0});
}

PairMetrics compute_pair_metrics(const OutcomeIndex& outcomes, const LanguagePair& pair) {
  PairMetrics m;
  m.pair = pair;
  Tally sub_ab, sub_ba, obj_ab, obj_ba, both_ab, both_ba;
  std::set<std::string> excluded;

  for (const auto& id : outcomes.fact_ids()) {
    const auto sab = outcomes.translation(id, pair.a, pair.b, EntityRole::subject);
    const auto sba = outcomes.translation(id, pair.b, pair.a, EntityRole::subject);
    const auto oab = outcomes.translation(id, pair.a, pair.b, EntityRole::object);
    const auto oba = outcomes.translation(id, pair.b, pair.a, EntityRole::object);
    if (sab && sba && oab && oba) {
      sub_ab.add(*sab);
      sub_ba.add(*sba);
      obj_ab.add(*oab);
      obj_ba.add(*oba);
      both_ab.add(*sab && *oab);
      both_ba.add(*sba && *oba);
    } else if (sab || sba || oab || oba) {
      excluded.insert(id);
    }

    const auto ra = outcomes.recall(id, pair.a);
    const auto rb = outcomes.recall(id, pair.b);
    if (ra && rb) {
      ++m.n_recall_evaluated;
      m.co_intersection += (*ra && *rb) ? 1 : 0;
      m.co_union += (*ra || *rb) ? 1 : 0;
    } else if (ra || rb) {
      excluded.insert(id);
    }
  }

  m.n_facts_evaluated = sub_ab.n;
  m.acc_sub_ab = sub_ab.value();
  m.acc_sub_ba = sub_ba.value();
  m.acc_obj_ab = obj_ab.value();
  m.acc_obj_ba = obj_ba.value();
  m.acc_both_ab = both_ab.value();
  m.acc_both_ba = both_ba.value();
  m.align_sub = align_opt(m.acc_sub_ab, m.acc_sub_ba);
  m.align_obj = align_opt(m.acc_obj_ab, m.acc_obj_ba);
  m.align_both = align_opt(m.acc_both_ab, m.acc_both_ba);
  m.co = ratio(m.co_intersection, m.co_union);
  m.n_excluded = excluded.size();
  return m;
}

std::optional<double> recall_accuracy(const OutcomeIndex& outcomes, std::string_view language) {
  Tally t;
  for (const auto& id : outcomes.fact_ids()) {
    if (auto r = outcomes.recall(id, language)) t.add(*r);
  }
  return t.value();
}

std::optional<double> PartitionReport::share(std::size_t count) const { return ratio(count, total); }

std::optional<double> PartitionReport::consistent_aligned_share() const {
  return ratio(consistent_aligned, consistent);
}

std::optional<double> PartitionReport::consistent_non_aligned_share() const {
  return ratio(consistent_non_aligned, consistent);
}

std::optional<double> PartitionReport::non_aligned_consistent_share() const {
  return ratio(consistent_non_aligned, non_aligned);
}

std::optional<double> PartitionReport::non_aligned_inconsistent_share() const {
  return ratio(inconsistent_non_aligned, non_aligned);
}

PartitionReport partition_counts(std::span<const FactFlags> flags) {
  PartitionReport r;
  for (const auto& f : flags) {
    ++r.total;
    const bool c = f.consistent();
    const bool a = f.aligned();
    ++(c ? r.consistent : r.inconsistent);
    ++(a ? r.aligned : r.non_aligned);
    if (c && a) ++r.consistent_aligned;
    if (c && !a) ++r.consistent_non_aligned;
    if (!c && !a) ++r.inconsistent_non_aligned;
  }
  return r;
}

std::size_t expected_partition_total(std::size_t n_facts, std::size_t n_languages) {
  const std::size_t pairs = n_languages < 2 ? 0 : n_languages * (n_languages - 1) / 2;
  return n_facts * pairs;
}

std::optional<PearsonResult> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw MetricsError("pearson: length mismatch (" + std::to_string(x.size()) + " vs " +
                       std::to_string(y.size()) + ")");
  }
  const std::size_t n = x.size();
  if (n < 3) throw MetricsError("pearson: need at least 3 points");

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;

  PearsonResult out;
  out.n = n;
  out.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(n - 2);
  const double one_minus_r2 = 1.0 - out.r * out.r;
  if (one_minus_r2 <= 0.0) {
    out.p = 0.0;
  } else {
    const double t = std::abs(out.r) * std::sqrt(df / one_minus_r2);
    const boost::math::students_t dist(df);
    out.p = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, t)), 0.0, 1.0);
  }
  return out;
}

std::optional<double> BoundReport::violation_rate() const {
  const auto violated = static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [](const BoundRow& r) { return r.violated; }));
  return ratio(violated, rows.size());
}

BoundReport bound_report(std::span<const PairMetrics> metrics) {
  BoundReport report;
  for (const auto& m : metrics) {
    if (!m.co || !m.align_obj) {
      ++report.skipped;
      continue;
    }
    report.rows.push_back({m.pair, *m.co, *m.align_obj, *m.co > *m.align_obj});
  }
  return report;
}

}  // namespace xprobe
