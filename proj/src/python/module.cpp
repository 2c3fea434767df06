#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "xprobe/digest.hpp"
#include "xprobe/eval_runner.hpp"
#include "xprobe/lens_analyzer.hpp"
#include "xprobe/report.hpp"
#include "xprobe/score.hpp"

namespace py = pybind11;
using namespace xprobe;

namespace {

py::object to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

NormalizationPolicy make_policy(bool nfc, bool casefold, bool collapse_whitespace) {
  NormalizationPolicy p;
  p.unicode_form = nfc ? NormalizationPolicy::UnicodeForm::canonical_compose
                       : NormalizationPolicy::UnicodeForm::none;
  p.casefold = casefold;
  p.collapse_whitespace = collapse_whitespace;
  return p;
}

RunConfig make_config(const std::string& task, const std::vector<std::string>& languages,
                      const std::string& variant, const std::optional<std::string>& pivot,
                      std::size_t shots, std::uint64_t seed) {
  RunConfig c;
  c.task = parse_task(task);
  c.languages = languages;
  c.variant = parse_variant(variant);
  c.pivot = pivot;
  c.shots = shots;
  c.seed = seed;
  c.params = GenParams::defaults_for(c.task);
  return c;
}

nlohmann::json curve_json(const CurveTable& t) {
  return {{"input_language", t.key.input_language},
          {"variant", to_string(t.key.variant)},
          {"target_language", t.key.target_language},
          {"layers", t.layers},
          {"mean_rank", t.mean_rank},
          {"median_rank", t.median_rank},
          {"mean_prob", t.mean_prob},
          {"n", t.n}};
}

std::vector<LensTraceRecord> load_records(const std::vector<std::filesystem::path>& paths) {
  std::vector<LensTraceRecord> out;
  for (const auto& p : paths) {
    Trace t = load_trace(p);
    std::move(t.records.begin(), t.records.end(), std::back_inserter(out));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_xprobe, m) {
  m.doc() = "Crosslingual consistency and alignment probing core";

  auto base_error = py::register_exception<Error>(m, "XprobeError");
  py::register_exception<DatasetError>(m, "DatasetError", base_error.ptr());
  py::register_exception<PromptError>(m, "PromptError", base_error.ptr());
  py::register_exception<MetricsError>(m, "MetricsError", base_error.ptr());
  py::register_exception<TraceError>(m, "TraceError", base_error.ptr());
  py::register_exception<RunError>(m, "RunError", base_error.ptr());
  py::register_exception<GatewayError>(m, "GatewayError", base_error.ptr());

  m.def("validate_dataset", [](const std::filesystem::path& root) {
    std::vector<std::string> out;
    for (const auto& issue : validate(load_dataset(root))) out.push_back(issue.message());
    return out;
  }, py::arg("root"), "Issue messages for a dataset directory.");

  m.def("enumerate_pairs", [](const std::vector<std::string>& languages) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& p : enumerate_pairs(languages)) out.emplace_back(p.a, p.b);
    return out;
  }, py::arg("languages"));

  m.def("fact_seed", &fact_seed, py::arg("run_seed"), py::arg("fact_id"));

  m.def("render_base", &render_base, py::arg("template"), py::arg("subject"));
  m.def("apply_subsub", &apply_subsub, py::arg("template"), py::arg("subject_native"),
        py::arg("subject_pivot"));
  m.def("apply_subinj", &apply_subinj, py::arg("template"), py::arg("subject_native"),
        py::arg("subject_pivot"), py::arg("dedup") = false);

  m.def("normalize", [](std::string_view text, bool nfc, bool casefold, bool collapse) {
    return normalize(text, make_policy(nfc, casefold, collapse));
  }, py::arg("text"), py::arg("nfc") = true, py::arg("casefold") = true,
     py::arg("collapse_whitespace") = true);

  m.def("contains_answer", [](std::string_view completion, std::string_view target, bool nfc,
                              bool casefold, bool collapse) {
    return contains_answer(completion, target, make_policy(nfc, casefold, collapse));
  }, py::arg("completion"), py::arg("target"), py::arg("nfc") = true, py::arg("casefold") = true,
     py::arg("collapse_whitespace") = true);

  m.def("relative_improvement", &relative_improvement, py::arg("base"), py::arg("treated"));
  m.def("format_improvement", &format_improvement, py::arg("percent"));

  m.def("pearson", [](const std::vector<double>& x, const std::vector<double>& y) -> py::object {
    const auto r = pearson(x, y);
    if (!r) return py::none();
    return py::make_tuple(r->r, r->p, r->n);
  }, py::arg("x"), py::arg("y"), "(r, p, n), or None when either side has zero variance.");

  m.def("plan_run", [](const std::filesystem::path& dataset, const std::string& task,
                       const std::vector<std::string>& languages, const std::string& variant,
                       const std::optional<std::string>& pivot) {
    const RunPlan plan = plan_run(load_dataset(dataset), make_config(task, languages, variant, pivot, 3, 0));
    py::dict d;
    d["languages"] = plan.languages;
    d["pairs"] = plan.pairs.size();
    d["prompts"] = plan.prompts;
    d["evaluated_fact_pairs"] = plan.evaluated_fact_pairs;
    d["skipped_facts"] = plan.skipped_facts;
    return d;
  }, py::arg("dataset"), py::arg("task") = "recall", py::arg("languages") = std::vector<std::string>{},
     py::arg("variant") = "base", py::arg("pivot") = std::nullopt);

  m.def("build_prompts", [](const std::filesystem::path& dataset, const std::string& task,
                            const std::vector<std::string>& languages, const std::string& variant,
                            const std::optional<std::string>& pivot, std::size_t shots,
                            std::uint64_t seed) {
    const auto jobs = build_jobs(load_dataset(dataset), make_config(task, languages, variant, pivot, shots, seed));
    nlohmann::json out = nlohmann::json::array();
    for (const auto& job : jobs) out.push_back(job.spec);
    return to_py(out);
  }, py::arg("dataset"), py::arg("task") = "recall", py::arg("languages") = std::vector<std::string>{},
     py::arg("variant") = "base", py::arg("pivot") = std::nullopt, py::arg("shots") = 3,
     py::arg("seed") = 0);

  m.def("emit_prompts", [](const std::filesystem::path& dataset, const std::filesystem::path& out,
                           const std::string& variant, const std::optional<std::string>& pivot,
                           const std::vector<std::string>& languages,
                           const std::vector<std::string>& targets, std::size_t shots,
                           std::uint64_t seed) {
    return emit_prompts(load_dataset(dataset),
                        make_config("recall", languages, variant, pivot, shots, seed),
                        targets.empty() ? default_tracked_targets() : targets, out);
  }, py::arg("dataset"), py::arg("out"), py::arg("variant") = "base", py::arg("pivot") = std::nullopt,
     py::arg("languages") = std::vector<std::string>{}, py::arg("targets") = std::vector<std::string>{},
     py::arg("shots") = 3, py::arg("seed") = 0);

  m.def("run_mock", [](const std::filesystem::path& dataset, const std::filesystem::path& fixture,
                       const std::filesystem::path& out, const std::string& task,
                       const std::vector<std::string>& languages, const std::string& variant,
                       const std::optional<std::string>& pivot, std::size_t shots,
                       std::uint64_t seed) {
    RunConfig c = make_config(task, languages, variant, pivot, shots, seed);
    c.output = out;
    Gateway gateway(std::make_shared<MockBackend>(MockBackend::load(fixture)));
    const FactStore store = load_dataset(dataset);
    RunSummary s;
    {
      py::gil_scoped_release release;
      s = run_evaluation(store, gateway, c);
    }
    py::dict d;
    d["planned"] = s.planned;
    d["skipped_existing"] = s.skipped_existing;
    d["written"] = s.written;
    d["failed"] = s.failed;
    return d;
  }, py::arg("dataset"), py::arg("fixture"), py::arg("out"), py::arg("task") = "recall",
     py::arg("languages") = std::vector<std::string>{}, py::arg("variant") = "base",
     py::arg("pivot") = std::nullopt, py::arg("shots") = 3, py::arg("seed") = 0,
     "Runs against a mock fixture and returns the run summary.");

  m.def("score", [](const std::vector<std::filesystem::path>& results,
                    const std::vector<std::string>& languages) {
    std::vector<ResultRecord> records;
    std::vector<std::string> sources;
    for (const auto& p : results) {
      auto log = read_results(p);
      std::move(log.records.begin(), log.records.end(), std::back_inserter(records));
      sources.push_back(p.string());
    }
    return to_py(score_results(records, sources, {languages, std::nullopt}));
  }, py::arg("results"), py::arg("languages") = std::vector<std::string>{},
     "Metrics document (as written to metrics.json) for result files.");

  m.def("load_trace", [](const std::filesystem::path& path) {
    const Trace t = load_trace(path);
    py::dict d;
    d["header"] = to_py(t.header);
    d["records"] = to_py(t.records);
    d["layers"] = t.layer_axis();
    return d;
  }, py::arg("path"));

  m.def("curves", [](const std::vector<std::filesystem::path>& traces) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& t : curves(load_records(traces))) out.push_back(curve_json(t));
    return to_py(out);
  }, py::arg("traces"));

  m.def("compare_variants", [](const std::vector<std::filesystem::path>& traces,
                               const std::string& base, const std::string& treated) {
    std::vector<CurveTable> b, t;
    for (auto& table : curves(load_records(traces))) {
      if (table.key.variant == parse_variant(base)) b.push_back(table);
      else if (table.key.variant == parse_variant(treated)) t.push_back(table);
    }
    const VariantComparison cmp = compare_variants(b, t);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : cmp.rows) {
      rows.push_back({{"input_language", r.input_language},
                      {"target_language", r.target_language},
                      {"layer", r.layer},
                      {"delta_mean_rank", r.delta_mean_rank},
                      {"delta_mean_prob", r.delta_mean_prob},
                      {"treated_lower", r.treated_lower}});
    }
    py::dict d;
    d["rows"] = to_py(rows);
    d["share_lower"] = cmp.share_lower() ? py::cast(*cmp.share_lower()) : py::none();
    d["unmatched"] = cmp.unmatched;
    return d;
  }, py::arg("traces"), py::arg("base") = "base", py::arg("treated") = "subinj");

  m.def("report", [](const std::filesystem::path& base, const std::optional<std::filesystem::path>& subsub,
                     const std::optional<std::filesystem::path>& subinj,
                     const std::optional<std::filesystem::path>& groups) {
    return to_py(to_json(build_report({base, subsub, subinj, groups})));
  }, py::arg("base"), py::arg("subsub") = std::nullopt, py::arg("subinj") = std::nullopt,
     py::arg("groups") = std::nullopt);
}
