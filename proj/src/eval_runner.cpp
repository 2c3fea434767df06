#include "xprobe/eval_runner.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <unordered_set>

#include "xprobe/digest.hpp"
#include "xprobe/metrics.hpp"

namespace xprobe {
namespace {

using nlohmann::json;

constexpr std::size_t kMaxReportedFailures = 5;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RunError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool recall_eligible(const Fact& fact, const FactStore& store, std::string_view language,
                     Variant variant, const std::optional<std::string>& pivot) {
  return fact.realized_in(language) && store.template_for(fact.relation, language) &&
         (variant == Variant::base || fact.has(EntityRole::subject, *pivot));
}

ResultRecord judge(const PromptJob& job, CompletionRecord completion, const RunConfig& config) {
  ResultRecord record;
  record.prompt = job.spec;
  record.correct = contains_answer(completion.completion_text, job.spec.expected_answer,
                                   config.policy);
  record.completion = std::move(completion);
  record.policy = config.policy;
  record.run_seed = config.seed;
  record.shots = config.shots;
  return record;
}

}  // namespace

void to_json(json& out, const ResultRecord& record) {
  out = record.prompt;
  out["prompt"] = out["text"];
  out.erase("text");
  out["schema_version"] = kResultSchemaVersion;
  out["completion"] = record.completion.completion_text;
  out["backend_id"] = record.completion.backend_id;
  out["params"] = record.completion.params;
  out["cached"] = record.completion.cached;
  out["latency_ms"] = record.completion.latency_ms;
  out["fallback"] = record.completion.fallback;
  out["correct"] = record.correct;
  out["policy"] = record.policy;
  out["run_seed"] = record.run_seed;
  out["shots"] = record.shots;
}

void from_json(const json& in, ResultRecord& record) {
  const int version = in.at("schema_version").get<int>();
  if (version != kResultSchemaVersion) {
    throw RunError("unsupported result schema_version " + std::to_string(version));
  }
  json spec = in;
  spec["text"] = in.at("prompt");
  record.prompt = spec.get<PromptSpec>();
  record.completion = CompletionRecord{};
  record.completion.prompt_text = record.prompt.text;
  record.completion.completion_text = in.at("completion").get<std::string>();
  record.completion.backend_id = in.at("backend_id").get<std::string>();
  record.completion.params = in.at("params").get<GenParams>();
  record.completion.cached = in.value("cached", false);
  record.completion.latency_ms = in.value("latency_ms", 0.0);
  record.completion.fallback = in.value("fallback", false);
  record.correct = in.at("correct").get<bool>();
  record.policy = in.at("policy").get<NormalizationPolicy>();
  record.run_seed = in.value("run_seed", std::uint64_t{0});
  record.shots = in.value("shots", std::size_t{0});
}

std::string record_key(const PromptSpec& spec) {
  if (spec.task == Task::translation) {
    return "t|" + spec.fact_id + "|" + spec.source_lang + "|" + spec.target_lang + "|" +
           std::string(to_string(spec.role.value_or(EntityRole::subject)));
  }
  return "r|" + spec.fact_id + "|" + spec.target_lang + "|" +
         std::string(to_string(spec.variant.value_or(Variant::base))) + "|" +
         spec.pivot_lang.value_or("");
}

std::vector<std::string> RunConfig::selected_languages(const FactStore& store) const {
  if (languages.empty()) return store.languages();
  std::set<std::string> wanted;
  for (const auto& lang : languages) {
    if (!store.declares(lang)) throw RunError("language " + lang + " is not declared by the dataset");
    wanted.insert(lang);
  }
  std::vector<std::string> out;
  for (const auto& lang : store.languages()) {
    if (wanted.contains(lang)) out.push_back(lang);
  }
  return out;
}

std::optional<std::string> RunConfig::effective_pivot() const {
  if (variant == Variant::base) return std::nullopt;
  return pivot.value_or(std::string(kDefaultPivot));
}

void RunConfig::check(const FactStore& store) const {
  if (parallelism < 1) throw RunError("parallelism must be >= 1");
  params.check();
  if (auto p = effective_pivot(); p && !store.declares(*p)) {
    throw RunError("pivot language " + *p + " is not declared by the dataset");
  }
  const auto langs = selected_languages(store);
  if (task == Task::translation) {
    if (langs.size() < 2) throw RunError("translation needs at least two languages");
    if (auto missing = labels.missing(langs); !missing.empty()) {
      throw RunError("no translation label for language " + missing.front());
    }
  }
}

RunPlan plan_run(const FactStore& store, const RunConfig& config) {
  config.check(store);
  RunPlan plan;
  plan.languages = config.selected_languages(store);
  plan.pairs = enumerate_pairs(plan.languages);

  std::set<std::string> skipped;
  for (const auto& pair : plan.pairs) {
    for (const auto& fact : store.facts()) {
      if (fact.realized_in(pair.a) && fact.realized_in(pair.b)) {
        ++plan.evaluated_fact_pairs;
      } else {
        skipped.insert(fact.id);
      }
    }
  }

  if (config.task == Task::translation) {
    plan.prompts = 4 * plan.evaluated_fact_pairs;
  } else {
    const auto pivot = config.effective_pivot();
    for (const auto& lang : plan.languages) {
      for (const auto& fact : store.facts()) {
        if (recall_eligible(fact, store, lang, config.variant, pivot)) {
          ++plan.prompts;
        } else {
          skipped.insert(fact.id);
        }
      }
    }
  }
  plan.skipped_facts = skipped.size();
  return plan;
}

std::vector<PromptJob> build_jobs(const FactStore& store, const RunConfig& config) {
  config.check(store);
  const auto languages = config.selected_languages(store);
  std::vector<PromptJob> jobs;
  auto push = [&](PromptSpec spec) {
    std::string key = record_key(spec);
    jobs.push_back({std::move(spec), std::move(key)});
  };

  if (config.task == Task::translation) {
    for (const auto& pair : enumerate_pairs(languages)) {
      for (const auto& [src, tgt] : {std::pair{pair.a, pair.b}, std::pair{pair.b, pair.a}}) {
        for (EntityRole role : {EntityRole::subject, EntityRole::object}) {
          const TranslationCriterion criterion{src, tgt, role};
          for (const auto& fact : store.facts()) {
            if (!fact.realized_in(src) || !fact.realized_in(tgt)) continue;
            const auto exemplars = sample_exemplars(store, criterion, config.shots, fact.id,
                                                    fact_seed(config.seed, fact.id));
            push(build_translation_prompt(fact, role, src, tgt, exemplars, config.labels));
          }
        }
      }
    }
    return jobs;
  }

  const auto pivot = config.effective_pivot();
  for (const auto& lang : languages) {
    for (const auto& fact : store.facts()) {
      if (!recall_eligible(fact, store, lang, config.variant, pivot)) continue;
      RecallCriterion criterion{fact.relation, lang, std::nullopt};
      if (config.recall_options.transform_exemplars) criterion.pivot = pivot;
      const auto exemplars = sample_exemplars(store, criterion, config.shots, fact.id,
                                              fact_seed(config.seed, fact.id));
      push(build_recall_prompt(fact, lang, config.variant, pivot, exemplars, store,
                               config.recall_options));
    }
  }
  return jobs;
}

ResultLog read_results(const std::filesystem::path& path) {
  const std::string content = read_file(path);
  ResultLog log;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    const std::size_t end = content.find('\n', pos);
    const bool last = end == std::string::npos;
    const std::string line = content.substr(pos, last ? std::string::npos : end - pos);
    pos = last ? content.size() : end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json doc = json::parse(line);
      if (doc.value("resume_marker", false)) {
        ++log.resume_markers;
        continue;
      }
      log.records.push_back(doc.get<ResultRecord>());
    } catch (const std::exception& e) {
      if (last) {
        log.torn_tail = true;
        break;
      }
      throw RunError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

RunSummary run_evaluation(const FactStore& store, Gateway& gateway, const RunConfig& config) {
  if (config.output.empty()) throw RunError("run needs an output path");
  const auto jobs = build_jobs(store, config);

  RunSummary summary;
  summary.planned = jobs.size();

  std::unordered_set<std::string> done;
  if (std::filesystem::exists(config.output)) {
    const ResultLog existing = read_results(config.output);
    for (const auto& r : existing.records) done.insert(record_key(r.prompt));
    std::string content = read_file(config.output);
    if (existing.torn_tail) {
      content.erase(content.rfind('\n') == std::string::npos ? 0 : content.rfind('\n') + 1);
    } else if (!content.empty() && content.back() != '\n') {
      content.push_back('\n');
    }
    std::ofstream rewrite(config.output, std::ios::binary | std::ios::trunc);
    rewrite << content;
  } else if (config.output.has_parent_path()) {
    std::filesystem::create_directories(config.output.parent_path());
  }

  std::ofstream log(config.output, std::ios::binary | std::ios::app);
  if (!log) throw RunError("cannot open " + config.output.string() + " for appending");

  // Batches follow the natural grouping: one (pair, direction, role) or one language.
  auto group_of = [](const PromptSpec& s) {
    return s.source_lang + "|" + s.target_lang + "|" +
           std::string(s.role ? to_string(*s.role) : "");
  };

  std::vector<const PromptJob*> batch;
  auto flush = [&] {
    if (batch.empty()) return;
    std::vector<std::string> prompts;
    prompts.reserve(batch.size());
    for (const auto* job : batch) prompts.push_back(job->spec.text);
    auto completions = gateway.complete_batch(prompts, config.params, config.parallelism);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (!completions[i].ok()) {
        ++summary.failed;
        if (summary.failures.size() < kMaxReportedFailures) {
          summary.failures.push_back(batch[i]->key + ": " + *completions[i].error);
        }
        continue;
      }
      log << json(judge(*batch[i], std::move(completions[i]), config)).dump() << '\n';
      ++summary.written;
    }
    log.flush();
    batch.clear();
  };

  for (const auto& job : jobs) {
    if (done.contains(job.key)) {
      ++summary.skipped_existing;
      continue;
    }
    if (!batch.empty() && group_of(batch.front()->spec) != group_of(job.spec)) flush();
    batch.push_back(&job);
  }
  flush();

  if (summary.failed > 0) {
    log << json{{"schema_version", kResultSchemaVersion},
                {"resume_marker", true},
                {"missing", summary.failed}}
               .dump()
        << '\n';
  }
  if (!log) throw RunError("write to " + config.output.string() + " failed");
  return summary;
}

std::size_t emit_prompts(const FactStore& store, const RunConfig& config,
                         const std::vector<std::string>& tracked,
                         const std::filesystem::path& out) {
  const auto jobs = build_jobs(store, config);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  std::ofstream file(out, std::ios::binary | std::ios::trunc);
  if (!file) throw RunError("cannot write " + out.string());
  for (const auto& job : jobs) {
    const Fact& fact = store.at(job.spec.fact_id);
    json line = job.spec;
    json targets = json::object();
    std::vector<std::string> langs{job.spec.target_lang};
    langs.insert(langs.end(), tracked.begin(), tracked.end());
    for (const auto& lang : langs) {
      if (const std::string* obj = fact.surface(EntityRole::object, lang)) targets[lang] = *obj;
    }
    line["targets"] = std::move(targets);
    file << line.dump() << '\n';
  }
  return jobs.size();
}

}  // namespace xprobe
