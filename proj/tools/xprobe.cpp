#include <cstdio>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "xprobe/csv.hpp"
#include "xprobe/eval_runner.hpp"
#include "xprobe/lens_analyzer.hpp"
#include "xprobe/report.hpp"
#include "xprobe/score.hpp"

namespace fs = std::filesystem;
using namespace xprobe;

namespace {

struct PolicyFlags {
  bool verbatim = false;
  bool no_nfc = false;
  bool no_casefold = false;
  bool no_collapse = false;

  void add(CLI::App* app) {
    app->add_flag("--verbatim", verbatim, "Judge by plain byte-level substring match");
    app->add_flag("--no-nfc", no_nfc, "Skip Unicode canonical composition");
    app->add_flag("--no-casefold", no_casefold, "Keep case when judging");
    app->add_flag("--no-collapse-ws", no_collapse, "Keep whitespace runs when judging");
  }

  NormalizationPolicy policy() const {
    if (verbatim) return NormalizationPolicy::verbatim();
    NormalizationPolicy p;
    if (no_nfc) p.unicode_form = NormalizationPolicy::UnicodeForm::none;
    if (no_casefold) p.casefold = false;
    if (no_collapse) p.collapse_whitespace = false;
    return p;
  }

  bool any() const { return verbatim || no_nfc || no_casefold || no_collapse; }
};

std::vector<ResultRecord> read_all(const std::vector<std::string>& paths) {
  std::vector<ResultRecord> out;
  for (const auto& p : paths) {
    ResultLog log = read_results(p);
    if (log.torn_tail) std::cerr << "warning: " << p << " ends in a partial line; ignored\n";
    if (log.resume_markers) {
      std::cerr << "warning: " << p << " is incomplete (" << log.resume_markers
                << " resume marker(s)); rerun `xprobe run` to fill it\n";
    }
    std::move(log.records.begin(), log.records.end(), std::back_inserter(out));
  }
  return out;
}

std::string opt_str(const std::optional<double>& v) { return v ? format_number(*v) : "undefined"; }

std::shared_ptr<Backend> make_backend(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "mock" && !arg.empty()) return std::make_shared<MockBackend>(MockBackend::load(arg));
  if (kind == "http" && !arg.empty()) return std::make_shared<HttpBackend>(HttpBackend::from_env(arg));
  throw CLI::ValidationError("--backend", "expected mock:<fixture.json> or http:<model>, got " + spec);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xprobe: crosslingual factual-recall consistency and alignment probes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "xprobe 0.1.0");

  // validate
  std::string dataset;
  bool strict = false;
  auto* validate_cmd = app.add_subcommand("validate", "Check a dataset for missing realizations and templates");
  validate_cmd->add_option("--dataset", dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  validate_cmd->add_flag("--strict", strict, "Exit 1 when any issue is found");

  // run
  RunConfig config;
  std::string task = "recall", variant = "base", backend, cache_dir, labels_path, emit_path, out_path;
  std::vector<std::string> tracked;
  std::optional<int> max_tokens;
  std::optional<double> temperature;
  std::optional<std::int64_t> gen_seed;
  std::vector<std::string> stops;
  bool dry_run = false, keep_exemplars = false, dedup = false;
  PolicyFlags run_policy;
  auto* run_cmd = app.add_subcommand("run", "Build prompts, query a backend and log judged results");
  run_cmd->add_option("--dataset", dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  run_cmd->add_option("--task", task, "translation or recall")->check(CLI::IsMember({"translation", "recall"}));
  run_cmd->add_option("--languages", config.languages, "Language codes (default: all declared)")->delimiter(',');
  run_cmd->add_option("--variant", variant, "Recall prompt variant")->check(CLI::IsMember({"base", "subsub", "subinj"}));
  run_cmd->add_option("--pivot", config.pivot, "Pivot language for subsub/subinj (default eng_Latn)");
  run_cmd->add_option("--shots", config.shots, "Exemplars per prompt")->capture_default_str();
  run_cmd->add_option("--seed", config.seed, "Run seed for exemplar sampling")->capture_default_str();
  run_cmd->add_option("--backend", backend, "mock:<fixture.json> or http:<model>");
  run_cmd->add_option("--cache", cache_dir, "Response cache directory");
  run_cmd->add_option("--parallelism", config.parallelism, "Concurrent requests")->capture_default_str()->check(CLI::PositiveNumber);
  run_cmd->add_option("--max-new-tokens", max_tokens, "Generation budget");
  run_cmd->add_option("--temperature", temperature, "Sampling temperature (0 = greedy)");
  run_cmd->add_option("--gen-seed", gen_seed, "Seed forwarded to the backend");
  run_cmd->add_option("--stop", stops, "Stop sequence (repeatable)");
  run_cmd->add_option("--labels", labels_path, "JSON file of language code -> prompt label overrides");
  run_cmd->add_flag("--keep-exemplars", keep_exemplars, "Leave exemplar subjects untransformed in subsub/subinj prompts");
  run_cmd->add_flag("--dedup-injection", dedup, "Render identical native/pivot subjects once under subinj");
  run_cmd->add_flag("--dry-run", dry_run, "Print pair and prompt counts without calling a model");
  run_cmd->add_option("--emit-prompts", emit_path, "Write PromptSpec lines for lens extraction instead of running");
  run_cmd->add_option("--targets", tracked, "Tracked target languages for --emit-prompts")->delimiter(',');
  run_cmd->add_option("--out", out_path, "Results file (JSON lines)");
  run_policy.add(run_cmd);

  // score
  std::vector<std::string> results;
  std::vector<std::string> score_langs;
  bool rejudge = false;
  std::string csv_path;
  PolicyFlags score_policy;
  auto* score_cmd = app.add_subcommand("score", "Compute per-language and per-pair metrics from results");
  score_cmd->add_option("--results", results, "Result files")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--languages", score_langs, "Languages in order (default: as seen)")->delimiter(',');
  score_cmd->add_flag("--rejudge", rejudge, "Re-judge completions under the given normalization flags");
  score_cmd->add_option("--out", out_path, "metrics.json path")->required();
  score_cmd->add_option("--csv", csv_path, "Also write per-pair metrics as CSV");
  score_policy.add(score_cmd);

  // correlate
  std::vector<std::string> metric_files;
  auto* correlate_cmd = app.add_subcommand("correlate", "Pearson correlation of Align scores with CO over pairs");
  correlate_cmd->add_option("--metrics", metric_files, "metrics.json files")->required()->check(CLI::ExistingFile);
  correlate_cmd->add_option("--out", out_path, "CSV output");

  // partition
  PolicyFlags partition_policy;
  auto* partition_cmd = app.add_subcommand("partition", "Consistent/inconsistent x aligned/non-aligned fact partition");
  partition_cmd->add_option("--results", results, "Recall and translation result files")->required()->check(CLI::ExistingFile);
  partition_cmd->add_option("--languages", score_langs, "Languages (default: as seen)")->delimiter(',');
  partition_cmd->add_flag("--rejudge", rejudge, "Re-judge completions under the given normalization flags");
  partition_cmd->add_option("--out", out_path, "CSV output");
  partition_policy.add(partition_cmd);

  // bounds
  std::string metrics_file;
  auto* bounds_cmd = app.add_subcommand("bounds", "Pairs where CO exceeds Align^obj");
  bounds_cmd->add_option("--metrics", metrics_file, "metrics.json")->required()->check(CLI::ExistingFile);
  bounds_cmd->add_option("--out", out_path, "CSV output");

  // lens
  std::vector<std::string> traces;
  std::string lens_base = "base", lens_treated = "subinj";
  auto* lens_cmd = app.add_subcommand("lens", "Rank and probability curves from logit-lens traces");
  lens_cmd->add_option("--trace", traces, "lens-trace/1 files")->required()->check(CLI::ExistingFile);
  lens_cmd->add_option("--base", lens_base, "Reference variant")->check(CLI::IsMember({"base", "subsub", "subinj"}))->capture_default_str();
  lens_cmd->add_option("--treated", lens_treated, "Compared variant")->check(CLI::IsMember({"base", "subsub", "subinj"}))->capture_default_str();
  lens_cmd->add_option("--out", out_path, "Output directory for curves.csv and variant_deltas.csv")->required();

  // report
  std::string base_scores, subsub_scores, subinj_scores, groups_path;
  auto* report_cmd = app.add_subcommand("report", "Base vs SubSub vs SubInj comparison tables");
  report_cmd->add_option("--base", base_scores, "Base metrics.json")->required();
  report_cmd->add_option("--subsub", subsub_scores, "SubSub metrics.json");
  report_cmd->add_option("--subinj", subinj_scores, "SubInj metrics.json");
  report_cmd->add_option("--groups", groups_path, "JSON of language -> {attribute: group}");
  report_cmd->add_option("--results", results, "Result files for the partition table");
  report_cmd->add_option("--trace", traces, "lens-trace/1 files for the lens summary");
  report_cmd->add_option("--out", out_path, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*validate_cmd) {
      const FactStore store = load_dataset(dataset);
      const auto issues = validate(store);
      for (const auto& issue : issues) std::cout << issue.message() << '\n';
      std::cout << issues.size() << (issues.size() == 1 ? " issue" : " issues") << '\n';
      return strict && !issues.empty() ? 1 : 0;
    }

    if (*run_cmd) {
      const FactStore store = load_dataset(dataset);
      config.task = parse_task(task);
      config.variant = parse_variant(variant);
      if (config.task == Task::translation && config.variant != Variant::base) {
        throw CLI::ValidationError("--variant", "applies to recall only");
      }
      config.params = GenParams::defaults_for(config.task);
      if (max_tokens) config.params.max_new_tokens = *max_tokens;
      if (temperature) config.params.temperature = *temperature;
      if (!stops.empty()) config.params.stop_sequences = stops;
      config.params.seed = gen_seed;
      config.recall_options.transform_exemplars = !keep_exemplars;
      config.recall_options.dedup_injection = dedup;
      config.policy = run_policy.policy();
      if (!labels_path.empty()) {
        config.labels = LanguageLabels::bundled().with_overrides(LanguageLabels::load(labels_path));
      }

      if (dry_run) {
        const RunPlan plan = plan_run(store, config);
        std::cout << "languages: " << plan.languages.size() << '\n'
                  << "pairs: " << plan.pairs.size() << '\n'
                  << "evaluated facts: " << plan.evaluated_fact_pairs << '\n'
                  << "prompts: " << plan.prompts << '\n'
                  << "skipped facts: " << plan.skipped_facts << '\n';
        return 0;
      }
      if (!emit_path.empty()) {
        if (tracked.empty()) tracked = default_tracked_targets();
        const std::size_t n = emit_prompts(store, config, tracked, emit_path);
        std::cout << "wrote " << n << " prompts to " << emit_path << '\n';
        return 0;
      }
      if (backend.empty()) throw CLI::RequiredError("--backend");
      if (out_path.empty()) throw CLI::RequiredError("--out");
      config.output = out_path;
      std::optional<ResponseCache> cache;
      if (!cache_dir.empty()) cache.emplace(cache_dir);
      Gateway gateway(make_backend(backend), std::move(cache));
      const RunSummary s = run_evaluation(store, gateway, config);
      std::cout << "planned " << s.planned << ", already logged " << s.skipped_existing
                << ", written " << s.written << ", failed " << s.failed << '\n';
      for (const auto& f : s.failures) std::cerr << "failed: " << f << '\n';
      if (!s.complete()) {
        std::cerr << "error: " << s.failed << " prompt(s) failed; rerun the same command to resume\n";
        return 1;
      }
      return 0;
    }

    if (*score_cmd) {
      const auto records = read_all(results);
      ScoreOptions options{score_langs, std::nullopt};
      if (rejudge) options.rejudge = score_policy.policy();
      else if (score_policy.any()) throw CLI::ValidationError("normalization flags need --rejudge");
      const ScoreDocument doc = score_results(records, results, options);
      save_scores(doc, out_path);
      if (!csv_path.empty()) write_pairs_csv(doc.pairs, csv_path);
      for (const auto& lang : doc.languages) {
        std::cout << "ACC " << lang << ' ' << opt_str(doc.recall_accuracy.at(lang)) << '\n';
      }
      for (const auto& p : doc.pairs) {
        std::cout << p.pair.a << '-' << p.pair.b << " align_sub " << opt_str(p.align_sub)
                  << " align_obj " << opt_str(p.align_obj) << " align_both "
                  << opt_str(p.align_both) << " co " << opt_str(p.co) << '\n';
      }
      std::cout << "wrote " << out_path << '\n';
      return 0;
    }

    if (*correlate_cmd) {
      std::vector<CorrelationRow> rows;
      for (const auto& f : metric_files) {
        auto part = correlate(load_scores(f));
        rows.insert(rows.end(), part.begin(), part.end());
      }
      for (const auto& r : rows) {
        std::cout << r.model << ' ' << r.metric << " vs co: ";
        if (r.result) {
          std::cout << "r=" << format_number(r.result->r) << " p=" << format_number(r.result->p);
        } else {
          std::cout << "undefined";
        }
        std::cout << " (n=" << r.n_pairs << ", undefined pairs " << r.n_undefined << ")\n";
      }
      if (!out_path.empty()) write_correlation_csv(rows, out_path);
      return 0;
    }

    if (*partition_cmd) {
      const auto records = read_all(results);
      std::optional<NormalizationPolicy> policy;
      if (rejudge) policy = partition_policy.policy();
      const OutcomeIndex outcomes = index_outcomes(records, policy);
      const auto langs = score_langs.empty() ? record_languages(records) : score_langs;
      const PartitionSummary s = partition_results(outcomes, langs);
      const auto& o = s.overall;
      std::cout << "total " << o.total << " consistent " << o.consistent << " inconsistent "
                << o.inconsistent << " aligned " << o.aligned << " non-aligned " << o.non_aligned
                << " excluded " << s.excluded << '\n'
                << "consistent: aligned " << opt_str(o.consistent_aligned_share())
                << " non-aligned " << opt_str(o.consistent_non_aligned_share()) << '\n'
                << "non-aligned: consistent " << opt_str(o.non_aligned_consistent_share())
                << " inconsistent " << opt_str(o.non_aligned_inconsistent_share()) << '\n';
      if (!out_path.empty()) write_partition_csv(s, out_path);
      return 0;
    }

    if (*bounds_cmd) {
      const ScoreDocument doc = load_scores(metrics_file);
      const BoundReport report = bound_report(doc.pairs);
      for (const auto& r : report.rows) {
        if (r.violated) {
          std::cout << r.pair.a << '-' << r.pair.b << " co " << format_number(r.co)
                    << " > align_obj " << format_number(r.align_obj) << '\n';
        }
      }
      std::cout << "violation rate " << opt_str(report.violation_rate()) << " over "
                << report.rows.size() << " pairs (" << report.skipped << " skipped)\n";
      if (!out_path.empty()) write_bounds_csv(report, out_path);
      return 0;
    }

    if (*lens_cmd) {
      std::vector<LensTraceRecord> records;
      std::vector<int> axis;
      for (const auto& f : traces) {
        Trace t = load_trace(f);
        if (!axis.empty() && t.layer_axis() != axis) throw TraceError(f + ": layer axis differs from " + traces.front());
        axis = t.layer_axis();
        std::move(t.records.begin(), t.records.end(), std::back_inserter(records));
      }
      const auto tables = curves(records);
      const fs::path dir = out_path;
      write_curves_csv(tables, dir / "curves.csv");
      std::vector<CurveTable> b, t;
      for (const auto& table : tables) {
        if (table.key.variant == parse_variant(lens_base)) b.push_back(table);
        if (table.key.variant == parse_variant(lens_treated)) t.push_back(table);
      }
      std::cout << tables.size() << " curves over " << axis.size() << " layers\n";
      if (!b.empty() && !t.empty()) {
        const VariantComparison cmp = compare_variants(b, t);
        write_deltas_csv(cmp, dir / "variant_deltas.csv");
        for (const auto& u : cmp.unmatched) std::cerr << "warning: no counterpart for " << u << '\n';
        std::cout << lens_treated << " rank below " << lens_base << " on "
                  << opt_str(cmp.share_lower()) << " of grouping-layers\n";
      } else {
        std::cerr << "warning: traces lack " << (b.empty() ? lens_base : lens_treated)
                  << " records; variant_deltas.csv not written\n";
      }
      return 0;
    }

    if (*report_cmd) {
      ReportInputs inputs;
      inputs.base = base_scores;
      if (!subsub_scores.empty()) inputs.subsub = subsub_scores;
      if (!subinj_scores.empty()) inputs.subinj = subinj_scores;
      if (!groups_path.empty()) inputs.groups = groups_path;
      ReportBundle bundle = build_report(inputs);
      if (!results.empty()) {
        const auto records = read_all(results);
        bundle.partition = partition_results(index_outcomes(records), bundle.languages);
      }
      if (!traces.empty()) {
        std::vector<LensTraceRecord> records;
        for (const auto& f : traces) {
          Trace tr = load_trace(f);
          std::move(tr.records.begin(), tr.records.end(), std::back_inserter(records));
        }
        std::vector<CurveTable> b, t;
        const Variant treated = inputs.subinj ? Variant::subinj : Variant::subsub;
        for (auto& table : curves(records)) {
          if (table.key.variant == Variant::base) b.push_back(table);
          if (table.key.variant == treated) t.push_back(table);
        }
        if (!b.empty() && !t.empty()) bundle.lens = summarize(compare_variants(b, t));
      }
      write_report(bundle, out_path);
      std::cout << render_improvement_table(bundle);
      std::cout << "wrote " << (fs::path(out_path) / "report.json").string() << '\n';
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
