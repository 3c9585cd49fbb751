// scot: command-line driver for speculative chain-of-thought runs.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scot/scot.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitBackend = 3;
constexpr int kExitSchema = 4;
constexpr int kExitManifest = 5;

/// Flags shared by every command that talks to backends; unset flags keep the
/// config file's values.
struct Overrides {
  std::optional<int> n;
  std::optional<double> temperature;
  std::optional<std::int64_t> draft_max_tokens;
  std::optional<std::int64_t> cot_max_tokens;
  std::optional<int> parallelism;
  std::optional<std::int64_t> seed;
  std::optional<std::string> dataset_name;
  bool single_draft = false;
  bool no_error_correction = false;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--n", n, "drafts per question, 1..9 (config default 5)");
    cmd.add_option("--temperature", temperature,
                   "sampling temperature for drafts and target (default 0.6)");
    cmd.add_option("--draft-max-tokens", draft_max_tokens, "draft length cap (default 5000)");
    cmd.add_option("--cot-max-tokens", cot_max_tokens, "target CoT cap (default 20480)");
    cmd.add_option("--parallelism", parallelism, "questions in flight (default 1)");
    cmd.add_option("--seed", seed, "base seed; draft i uses seed + i (default 0)");
    cmd.add_option("--dataset-name", dataset_name,
                   "dataset label recorded in traces (default: dataset file stem)");
    cmd.add_flag("--single-draft", single_draft, "ablation: draft one chain only");
    cmd.add_flag("--no-error-correction", no_error_correction,
                 "ablation: drop the all-wrong option, never rethink");
  }

  void apply(scot::RunConfig& rc, const std::string& dataset_path) const {
    auto& p = rc.pipeline;
    if (n) {
      if (*n < 1 || *n > scot::kMaxDraftCount)
        throw scot::ConfigError("--n", "must be in 1..9 (single-digit option labels)");
      p.n = *n;
    }
    if (temperature) {
      if (*temperature < 0) throw scot::ConfigError("--temperature", "must be >= 0");
      p.draft_params.temperature = *temperature;
      p.target_params.temperature = *temperature;
    }
    if (draft_max_tokens) p.draft_params.max_new_tokens = *draft_max_tokens;
    if (cot_max_tokens) p.target_params.max_new_tokens = *cot_max_tokens;
    if (parallelism) p.question_parallelism = *parallelism;
    if (seed) p.base_seed = *seed;
    if (single_draft) p.single_draft = true;
    if (no_error_correction) p.error_correction = false;
    if (dataset_name) {
      p.dataset = *dataset_name;
    } else if (p.dataset == scot::PipelineConfig{}.dataset && !dataset_path.empty()) {
      p.dataset = std::filesystem::path(dataset_path).stem().string();
    }
    try {
      p.validate();
    } catch (const scot::InvalidArgument& e) {
      throw scot::ConfigError("pipeline", e.what());
    }
  }
};

scot::RunConfig load_config(const std::string& path, const Overrides& ov,
                            const std::string& dataset_path) {
  auto rc = scot::load_run_config(path);
  ov.apply(rc, dataset_path);
  return rc;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw scot::Error("cannot write " + path);
  return out;
}

int cmd_run(const std::string& config, const std::string& dataset, const std::string& mode_s,
            const std::string& out_path, const Overrides& ov) {
  const auto rc = load_config(config, ov, dataset);
  const auto mode = scot::parse_run_mode(mode_s);
  const auto questions = scot::load_dataset(dataset);
  const auto ep = scot::make_endpoints(rc);
  const auto traces = scot::run_batch(questions, rc.pipeline, ep, mode);
  scot::write_trace_file(out_path, {rc.pipeline.dataset, mode, scot::utc_timestamp()}, traces);

  const auto ok = std::count_if(traces.begin(), traces.end(),
                                [](const scot::ReasoningTrace& t) { return t.ok(); });
  std::cout << traces.size() << " traces written to " << out_path << " (" << ok
            << " succeeded)\n";
  if (traces.empty()) return kExitOk;
  if (ok == 0) {
    std::cerr << "error: every question failed; first failure: " << *traces.front().failure
              << '\n';
    return kExitBackend;
  }
  scot::print_report(std::cout, scot::aggregate(traces));
  return kExitOk;
}

int cmd_report(const std::string& traces_path, const std::string& vanilla_path,
               const std::string& selection_path, const std::string& json_out) {
  const auto scot_file = scot::read_trace_file(traces_path);
  if (scot_file.traces.empty()) throw scot::EmptyTraceSet();
  std::optional<scot::TraceFile> vanilla;
  if (!vanilla_path.empty()) vanilla = scot::read_trace_file(vanilla_path);
  const auto report =
      scot::aggregate(scot_file.traces, vanilla ? &vanilla->traces : nullptr);
  scot::print_report(std::cout, report);

  auto j = scot::to_json(report);
  if (!selection_path.empty()) {
    const auto acc = scot::selection_accuracy_by_class(scot::read_selection_eval(selection_path));
    std::cout << std::fixed << std::setprecision(1) << "selection class 1  "
              << 100.0 * acc.class1 << "% of " << acc.class1_count << '\n'
              << "selection class 2  " << 100.0 * acc.class2 << "% of " << acc.class2_count
              << '\n';
    j["selection_accuracy"] = {{"class1", acc.class1},
                               {"class2", acc.class2},
                               {"class1_count", acc.class1_count},
                               {"class2_count", acc.class2_count}};
  }
  if (!json_out.empty()) open_out(json_out) << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_bench_chains(const std::string& config, const std::string& dataset,
                     const std::vector<int>& n_values, const std::string& csv_out,
                     const Overrides& ov) {
  for (int n : n_values)
    if (n < 1 || n > scot::kMaxDraftCount)
      throw scot::ConfigError("--n-values", "n = " + std::to_string(n) +
                                                " is outside 1..9 (single-digit option labels)");
  auto rc = load_config(config, ov, dataset);
  const auto questions = scot::load_dataset(dataset);
  const auto ep = scot::make_endpoints(rc);

  std::ostringstream csv;
  csv << "n,accuracy,mean_latency_s\n";
  for (int n : n_values) {
    rc.pipeline.n = n;
    const auto traces = scot::run_batch(questions, rc.pipeline, ep, scot::RunMode::SCoT);
    if (traces.empty()) {
      csv << n << ",,\n";
      continue;
    }
    const auto r = scot::aggregate(traces);
    csv << n << ',' << std::setprecision(6) << r.accuracy << ',' << r.mean_latency_s << '\n';
  }
  std::cout << csv.str();
  if (!csv_out.empty()) open_out(csv_out) << csv.str();
  return kExitOk;
}

scot::EvaluationManifest load_manifest(const std::string& path) {
  return path.empty() ? scot::EvaluationManifest{} : scot::EvaluationManifest::load(path);
}

int cmd_make_align_data(const std::string& config, const std::string& dataset,
                        const std::string& out_path, const std::string& manifest,
                        const Overrides& ov) {
  const auto rc = load_config(config, ov, dataset);
  const auto questions = scot::load_dataset(dataset);
  const auto m = load_manifest(manifest);
  m.require_disjoint(questions);
  const auto ep = scot::make_endpoints(rc);
  const auto built = scot::build_alignment_data(questions, *ep.answer, rc.pipeline, m);
  auto out = open_out(out_path);
  scot::write_alignment_jsonl(out, built.records);
  std::cout << built.records.size() << " records written to " << out_path << '\n'
            << "skipped: " << built.skipped_open << " unclosed think block, "
            << built.skipped_error << " backend error\n";
  for (const auto& e : built.errors) std::cerr << "  " << e << '\n';
  return kExitOk;
}

int cmd_make_select_data(const std::string& config, const std::string& dataset,
                         const std::string& out_path, const std::string& manifest,
                         const Overrides& ov) {
  const auto rc = load_config(config, ov, dataset);
  const auto questions = scot::load_dataset(dataset);
  const auto m = load_manifest(manifest);
  m.require_disjoint(questions);
  const auto ep = scot::make_endpoints(rc);
  const auto records = scot::build_selection_data(questions, *ep.draft, rc.pipeline,
                                                  scot::grade_answer, m,
                                                  rc.label_answer_max_tokens);
  auto out = open_out(out_path);
  scot::write_selection_jsonl(out, records);
  const auto none = std::count_if(records.begin(), records.end(), [&](const auto& r) {
    return r.label_set == std::set<int>{r.n + 1};
  });
  const auto failed = std::count_if(records.begin(), records.end(),
                                    [](const auto& r) { return r.all_drafts_failed; });
  std::cout << records.size() << " records written to " << out_path << '\n'
            << "class 1 (some draft correct): " << records.size() - none
            << ", class 2 (none correct): " << none << ", all drafts failed: " << failed
            << '\n';
  return kExitOk;
}

int cmd_make_sim_dataset(const std::string& name, std::size_t count, double hard_fraction,
                         const std::string& out_path) {
  if (hard_fraction < 0 || hard_fraction > 1)
    throw scot::ConfigError("--hard-fraction", "must be in [0, 1]");
  auto out = open_out(out_path);
  scot::write_dataset(out, scot::make_sim_dataset(name, count, hard_fraction));
  std::cout << count << " questions written to " << out_path << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speculative chain-of-thought runner: draft with a small model, select "
               "with the target, rethink when every draft is wrong."};
  app.require_subcommand(1);

  std::string config, dataset, out, mode = "scot", manifest;
  Overrides ov;

  auto* run = app.add_subcommand("run", "run a dataset and write traces");
  run->add_option("--config", config, "run configuration JSON")->required();
  run->add_option("--dataset", dataset, "questions JSONL {id, question, answer}")->required();
  run->add_option("--mode", mode, "scot or vanilla")
      ->check(CLI::IsMember({"scot", "vanilla"}))
      ->capture_default_str();
  run->add_option("--out", out, "trace JSONL output")->required();
  ov.add_to(*run);

  std::string traces, vanilla, selection, json_out;
  auto* report = app.add_subcommand("report", "summarize trace files");
  report->add_option("--traces", traces, "trace file to summarize")->required();
  report->add_option("--vanilla", vanilla, "paired vanilla trace file (adds r and r')");
  report->add_option("--selection-records", selection,
                     "JSONL of {label_set, chosen_index, n} for per-class selection accuracy");
  report->add_option("--json", json_out, "also write the report as JSON");

  std::vector<int> n_values{1, 2, 3, 4, 5, 6, 7, 8};
  std::string csv_out;
  auto* bench = app.add_subcommand("bench-chains", "accuracy and latency per draft count");
  bench->add_option("--config", config, "run configuration JSON")->required();
  bench->add_option("--dataset", dataset, "questions JSONL")->required();
  bench->add_option("--n-values", n_values, "draft counts to sweep (default 1..8)")
      ->delimiter(',');
  bench->add_option("--out", csv_out, "CSV output (also printed)");
  ov.add_to(*bench);

  auto* align = app.add_subcommand("make-align-data",
                                   "target-generated chains for draft alignment tuning");
  align->add_option("--config", config, "run configuration JSON")->required();
  align->add_option("--dataset", dataset, "training questions JSONL")->required();
  align->add_option("--out", out, "records JSONL output")->required();
  align->add_option("--manifest", manifest, "held-out evaluation ids, one per line");
  ov.add_to(*align);

  auto* select = app.add_subcommand("make-select-data",
                                    "labeled selection prompts for selector tuning");
  select->add_option("--config", config, "run configuration JSON")->required();
  select->add_option("--dataset", dataset, "training questions JSONL with answers")->required();
  select->add_option("--out", out, "records JSONL output")->required();
  select->add_option("--manifest", manifest, "held-out evaluation ids, one per line");
  ov.add_to(*select);

  std::string sim_name = "sim";
  std::size_t sim_count = 100;
  double hard_fraction = 0.0;
  auto* simdata = app.add_subcommand("make-sim-dataset",
                                     "synthetic questions answerable by the sim backend");
  simdata->add_option("--name", sim_name, "dataset name, used in ids")->capture_default_str();
  simdata->add_option("--count", sim_count, "number of questions")->capture_default_str();
  simdata->add_option("--hard-fraction", hard_fraction,
                      "share of questions no simulated draft can solve")
      ->capture_default_str();
  simdata->add_option("--out", out, "questions JSONL output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config, dataset, mode, out, ov);
    if (*report) return cmd_report(traces, vanilla, selection, json_out);
    if (*bench) return cmd_bench_chains(config, dataset, n_values, csv_out, ov);
    if (*align) return cmd_make_align_data(config, dataset, out, manifest, ov);
    if (*select) return cmd_make_select_data(config, dataset, out, manifest, ov);
    if (*simdata) return cmd_make_sim_dataset(sim_name, sim_count, hard_fraction, out);
  } catch (const scot::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const scot::SchemaMismatch& e) {
    std::cerr << "schema mismatch: " << e.what() << '\n';
    return kExitSchema;
  } catch (const scot::ManifestOverlap& e) {
    std::cerr << "evaluation manifest check failed: " << e.what() << '\n';
    return kExitManifest;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
