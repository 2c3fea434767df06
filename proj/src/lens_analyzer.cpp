#include "xprobe/lens_analyzer.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

#include "xprobe/csv.hpp"

namespace xprobe {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what) {
  throw TraceError(source + ":" + std::to_string(line) + ": " + what);
}

TraceHeader parse_header(const json& doc, const std::string& source, std::size_t line) {
  if (!doc.is_object()) fail(source, line, "header is not an object");
  if (doc.value("schema", std::string{}) != kTraceSchema) {
    fail(source, line, "header schema must be \"" + std::string(kTraceSchema) + "\"");
  }
  TraceHeader h;
  try {
    h.model = doc.at("model").get<std::string>();
    h.n_layers = doc.at("n_layers").get<int>();
    h.vocab_size = doc.at("vocab_size").get<long long>();
    h.targets = doc.at("targets").get<std::vector<std::string>>();
    h.first_layer = doc.value("first_layer", 0);
  } catch (const json::exception& e) {
    fail(source, line, std::string("header: ") + e.what());
  }
  if (h.n_layers < 1) fail(source, line, "header: n_layers must be positive");
  if (h.vocab_size < 1) fail(source, line, "header: vocab_size must be positive");
  if (h.first_layer != 0 && h.first_layer != 1) fail(source, line, "header: first_layer must be 0 or 1");
  if (h.targets.empty()) fail(source, line, "header: targets is empty");
  for (const auto& [key, value] : doc.items()) {
    if (key != "schema" && key != "model" && key != "n_layers" && key != "vocab_size" &&
        key != "targets" && key != "first_layer") {
      h.extra[key] = value;
    }
  }
  return h;
}

LensTraceRecord parse_record(const json& doc, const TraceHeader& h, const std::string& source,
                             std::size_t line) {
  LensTraceRecord r;
  try {
    r.fact_id = doc.at("fact_id").get<std::string>();
    r.input_language = doc.at("input_language").get<std::string>();
    r.variant = parse_variant(doc.at("variant").get<std::string>());
    r.target_language = doc.at("target_language").get<std::string>();
    r.target_token_id = doc.at("target_token_id").get<long long>();
    r.target_token_text = doc.at("target_token_text").get<std::string>();
    for (const auto& p : doc.at("per_layer")) {
      r.per_layer.push_back({p.at("layer").get<int>(), p.at("rank").get<long long>(),
                             p.at("prob").get<double>()});
    }
  } catch (const json::exception& e) {
    fail(source, line, e.what());
  } catch (const Error& e) {
    fail(source, line, e.what());
  }
  if (std::find(h.targets.begin(), h.targets.end(), r.target_language) == h.targets.end()) {
    fail(source, line, "target_language " + r.target_language + " is not in the header targets");
  }
  if (r.per_layer.empty()) fail(source, line, "per_layer is empty");
  if (r.per_layer.front().layer != h.first_layer) {
    fail(source, line, "layers must start at " + std::to_string(h.first_layer));
  }
  for (std::size_t i = 0; i < r.per_layer.size(); ++i) {
    const auto& p = r.per_layer[i];
    const std::string at = " at layer " + std::to_string(p.layer);
    if (i > 0 && p.layer <= r.per_layer[i - 1].layer) fail(source, line, "layers not strictly increasing" + at);
    if (p.layer > h.n_layers) fail(source, line, "layer exceeds n_layers" + at);
    if (p.rank < 1) fail(source, line, "rank below 1" + at);
    if (p.rank > h.vocab_size) fail(source, line, "rank exceeds vocab_size" + at);
    if (!(p.prob >= 0.0 && p.prob <= 1.0)) fail(source, line, "prob outside [0,1]" + at);
  }
  return r;
}

std::vector<int> axis_of(const LensTraceRecord& r) {
  std::vector<int> out;
  out.reserve(r.per_layer.size());
  for (const auto& p : r.per_layer) out.push_back(p.layer);
  return out;
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

}  // namespace

std::vector<std::string> default_tracked_targets() {
  return {"eng_Latn", "fra_Latn", "spa_Latn", "zho_Hans", "jpn_Jpan", "kor_Kore"};
}

void to_json(json& out, const TraceHeader& header) {
  out = header.extra;
  out["schema"] = kTraceSchema;
  out["model"] = header.model;
  out["n_layers"] = header.n_layers;
  out["vocab_size"] = header.vocab_size;
  out["targets"] = header.targets;
  out["first_layer"] = header.first_layer;
}

void to_json(json& out, const LensTraceRecord& record) {
  json layers = json::array();
  for (const auto& p : record.per_layer) {
    layers.push_back({{"layer", p.layer}, {"rank", p.rank}, {"prob", p.prob}});
  }
  out = json{{"fact_id", record.fact_id},
             {"input_language", record.input_language},
             {"variant", to_string(record.variant)},
             {"target_language", record.target_language},
             {"target_token_id", record.target_token_id},
             {"target_token_text", record.target_token_text},
             {"per_layer", std::move(layers)}};
}

std::vector<int> Trace::layer_axis() const {
  return records.empty() ? std::vector<int>{} : axis_of(records.front());
}

Trace parse_trace(std::string_view text, const std::string& source) {
  Trace trace;
  bool have_header = false;
  std::vector<int> axis;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() : end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& e) {
      fail(source, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!have_header) {
      trace.header = parse_header(doc, source, line_no);
      have_header = true;
      continue;
    }
    LensTraceRecord r = parse_record(doc, trace.header, source, line_no);
    if (trace.records.empty()) {
      axis = axis_of(r);
    } else if (axis_of(r) != axis) {
      fail(source, line_no, "layer axis differs from the first record");
    }
    trace.records.push_back(std::move(r));
  }
  if (!have_header || trace.records.empty()) throw TraceError(source + ": no records");
  return trace;
}

Trace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError("cannot read " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_trace(text, path.string());
}

void save_trace(const Trace& trace, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TraceError("cannot write " + path.string());
  out << json(trace.header).dump() << '\n';
  for (const auto& r : trace.records) out << json(r).dump() << '\n';
}

std::optional<CurveTable> curve(std::span<const LensTraceRecord> records, const CurveKey& key) {
  std::vector<const LensTraceRecord*> group;
  for (const auto& r : records) {
    if (r.input_language == key.input_language && r.variant == key.variant &&
        r.target_language == key.target_language) {
      group.push_back(&r);
    }
  }
  if (group.empty()) return std::nullopt;

  CurveTable t;
  t.key = key;
  t.n = group.size();
  t.layers = axis_of(*group.front());
  const std::size_t width = t.layers.size();
  for (const auto* r : group) {
    if (axis_of(*r) != t.layers) {
      throw TraceError("record " + r->fact_id + " has a different layer axis");
    }
  }
  for (std::size_t i = 0; i < width; ++i) {
    std::vector<double> ranks;
    double rank_sum = 0.0, prob_sum = 0.0;
    for (const auto* r : group) {
      const auto& p = r->per_layer[i];
      ranks.push_back(static_cast<double>(p.rank));
      rank_sum += static_cast<double>(p.rank);
      prob_sum += p.prob;
    }
    const double n = static_cast<double>(group.size());
    t.mean_rank.push_back(rank_sum / n);
    t.median_rank.push_back(median(std::move(ranks)));
    t.mean_prob.push_back(prob_sum / n);
  }
  return t;
}

std::vector<CurveTable> curves(std::span<const LensTraceRecord> records) {
  std::set<CurveKey> keys;
  for (const auto& r : records) keys.insert({r.input_language, r.variant, r.target_language});
  std::vector<CurveTable> out;
  for (const auto& key : keys) out.push_back(*curve(records, key));
  return out;
}

std::optional<double> VariantComparison::share_lower() const {
  if (rows.empty()) return std::nullopt;
  const auto lower = std::count_if(rows.begin(), rows.end(),
                                   [](const DeltaRow& r) { return r.treated_lower; });
  return static_cast<double>(lower) / static_cast<double>(rows.size());
}

VariantComparison compare_variants(std::span<const CurveTable> base,
                                   std::span<const CurveTable> treated) {
  using Group = std::pair<std::string, std::string>;
  auto index = [](std::span<const CurveTable> tables, const char* side,
                  std::optional<Variant>& variant) {
    std::map<Group, const CurveTable*> out;
    for (const auto& t : tables) {
      if (variant && *variant != t.key.variant) {
        throw TraceError(std::string(side) + " curves mix variants");
      }
      variant = t.key.variant;
      out[{t.key.input_language, t.key.target_language}] = &t;
    }
    return out;
  };
  std::optional<Variant> base_variant, treated_variant;
  const auto b = index(base, "base", base_variant);
  const auto t = index(treated, "treated", treated_variant);

  VariantComparison cmp;
  cmp.base = base_variant.value_or(Variant::base);
  cmp.treated = treated_variant.value_or(Variant::subinj);
  for (const auto& [group, bt] : b) {
    auto it = t.find(group);
    if (it == t.end()) {
      cmp.unmatched.push_back(group.first + "/" + group.second);
      continue;
    }
    const CurveTable& tt = *it->second;
    if (bt->layers != tt.layers) {
      throw TraceError("layer axis mismatch for " + group.first + "/" + group.second);
    }
    for (std::size_t i = 0; i < bt->layers.size(); ++i) {
      DeltaRow row;
      row.input_language = group.first;
      row.target_language = group.second;
      row.layer = bt->layers[i];
      row.base_mean_rank = bt->mean_rank[i];
      row.treated_mean_rank = tt.mean_rank[i];
      row.delta_mean_rank = tt.mean_rank[i] - bt->mean_rank[i];
      row.delta_mean_prob = tt.mean_prob[i] - bt->mean_prob[i];
      row.treated_lower = tt.mean_rank[i] < bt->mean_rank[i];
      cmp.rows.push_back(row);
    }
  }
  for (const auto& [group, tt] : t) {
    if (!b.contains(group)) cmp.unmatched.push_back(group.first + "/" + group.second);
  }
  return cmp;
}

void write_curves_csv(std::span<const CurveTable> tables, const std::filesystem::path& path) {
  CsvWriter csv(path, {"input_language", "variant", "target_language", "layer", "mean_rank",
                       "median_rank", "mean_prob", "n"});
  for (const auto& t : tables) {
    for (std::size_t i = 0; i < t.layers.size(); ++i) {
      csv.row({t.key.input_language, std::string(to_string(t.key.variant)), t.key.target_language,
               std::to_string(t.layers[i]), format_number(t.mean_rank[i]),
               format_number(t.median_rank[i]), format_number(t.mean_prob[i]),
               std::to_string(t.n)});
    }
  }
}

void write_deltas_csv(const VariantComparison& cmp, const std::filesystem::path& path) {
  CsvWriter csv(path, {"input_language", "target_language", "base_variant", "treated_variant",
                       "layer", "base_mean_rank", "treated_mean_rank", "delta_mean_rank",
                       "delta_mean_prob", "treated_lower"});
  for (const auto& r : cmp.rows) {
    csv.row({r.input_language, r.target_language, std::string(to_string(cmp.base)),
             std::string(to_string(cmp.treated)), std::to_string(r.layer),
             format_number(r.base_mean_rank), format_number(r.treated_mean_rank),
             format_number(r.delta_mean_rank), format_number(r.delta_mean_prob),
             r.treated_lower ? "1" : "0"});
  }
}

}  // namespace xprobe
