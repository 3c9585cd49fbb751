#pragma once

// JSON-lines persistence for traces, reports and selection evaluation records.
//
// Trace file layout: one metadata header line (the only place a timestamp
// appears), then one ReasoningTrace object per line.

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "scot/core.hpp"
#include "scot/metrics.hpp"

namespace scot {

using ordered_json = nlohmann::ordered_json;

inline constexpr int kTraceSchemaVersion = 1;
inline constexpr std::string_view kTraceSchema = "scot.trace";

inline std::string_view to_string(CotSourceKind k) {
  switch (k) {
    case CotSourceKind::DraftAccepted: return "draft_accepted";
    case CotSourceKind::TargetRethink: return "target_rethink";
    case CotSourceKind::VanillaTarget: return "vanilla_target";
  }
  return "";
}

inline RunMode parse_run_mode(std::string_view s) {
  if (s == "scot") return RunMode::SCoT;
  if (s == "vanilla") return RunMode::Vanilla;
  throw SchemaMismatch("unknown mode '" + std::string(s) + "'");
}

inline CotSourceKind parse_cot_source(std::string_view s) {
  if (s == "draft_accepted") return CotSourceKind::DraftAccepted;
  if (s == "target_rethink") return CotSourceKind::TargetRethink;
  if (s == "vanilla_target") return CotSourceKind::VanillaTarget;
  throw SchemaMismatch("unknown cot_source '" + std::string(s) + "'");
}

template <class T>
ordered_json optional_json(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

inline ordered_json to_json(const ReasoningTrace& t) {
  ordered_json drafts = ordered_json::array();
  for (const auto& d : t.drafts)
    drafts.push_back({{"index", d.index},
                      {"text", d.text},
                      {"token_count", d.token_count},
                      {"latency_ms", d.latency_ms},
                      {"truncated", d.truncated}});

  ordered_json selection = nullptr;
  if (t.selection) {
    ordered_json scores = ordered_json::object();
    for (const auto& [idx, s] : t.selection->scores)
      scores[std::to_string(idx)] = s;
    selection = {{"chosen_index", t.selection->chosen_index},
                 {"scores", scores},
                 {"latency_ms", t.selection->latency_ms},
                 {"fallback_used", t.selection->fallback_used}};
  }

  ordered_json source = {{"kind", to_string(t.cot_source.kind)}};
  if (t.cot_source.kind == CotSourceKind::DraftAccepted)
    source["index"] = t.cot_source.draft_index;

  const auto& s = t.stage_latencies_ms;
  return {{"schema_version", kTraceSchemaVersion},
          {"question_id", t.question_id},
          {"dataset", t.dataset},
          {"mode", to_string(t.mode)},
          {"n", t.n},
          {"drafts", drafts},
          {"selection", selection},
          {"cot_source", source},
          {"final_cot", t.final_cot},
          {"answer_text", t.answer_text},
          {"extracted_answer", optional_json(t.extracted_answer)},
          {"l_M", t.l_M},
          {"l_Md", t.l_Md},
          {"answer_tokens", t.answer_tokens},
          {"stage_latencies_ms",
           {{"drafting", s.drafting_ms},
            {"selection", s.selection_ms},
            {"target_thinking", s.target_thinking_ms},
            {"answering", s.answering_ms}}},
          {"total_latency_ms", t.total_latency_ms},
          {"correct", optional_json(t.correct)},
          {"failure", optional_json(t.failure)}};
}

inline ReasoningTrace trace_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != kTraceSchemaVersion)
      throw SchemaMismatch("unsupported trace schema_version");
    ReasoningTrace t;
    t.question_id = j.at("question_id").get<std::string>();
    t.dataset = j.at("dataset").get<std::string>();
    t.mode = parse_run_mode(j.at("mode").get<std::string>());
    t.n = j.at("n").get<int>();
    for (const auto& d : j.at("drafts"))
      t.drafts.push_back({d.at("index").get<int>(), d.at("text").get<std::string>(),
                          d.at("token_count").get<std::int64_t>(),
                          d.at("latency_ms").get<double>(),
                          d.at("truncated").get<bool>()});
    if (const auto& sel = j.at("selection"); !sel.is_null()) {
      SelectionOutcome o;
      o.chosen_index = sel.at("chosen_index").get<int>();
      for (const auto& [k, v] : sel.at("scores").items())
        o.scores.emplace(std::stoi(k), v.get<double>());
      o.latency_ms = sel.at("latency_ms").get<double>();
      o.fallback_used = sel.at("fallback_used").get<bool>();
      t.selection = o;
    }
    const auto& src = j.at("cot_source");
    t.cot_source.kind = parse_cot_source(src.at("kind").get<std::string>());
    t.cot_source.draft_index = src.value("index", 0);
    t.final_cot = j.at("final_cot").get<std::string>();
    t.answer_text = j.at("answer_text").get<std::string>();
    if (!j.at("extracted_answer").is_null())
      t.extracted_answer = j.at("extracted_answer").get<std::string>();
    t.l_M = j.at("l_M").get<std::int64_t>();
    t.l_Md = j.at("l_Md").get<std::int64_t>();
    t.answer_tokens = j.at("answer_tokens").get<std::int64_t>();
    const auto& s = j.at("stage_latencies_ms");
    t.stage_latencies_ms = {s.at("drafting").get<double>(),
                            s.at("selection").get<double>(),
                            s.at("target_thinking").get<double>(),
                            s.at("answering").get<double>()};
    t.total_latency_ms = j.at("total_latency_ms").get<double>();
    if (!j.at("correct").is_null()) t.correct = j.at("correct").get<bool>();
    if (!j.at("failure").is_null()) t.failure = j.at("failure").get<std::string>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(std::string("malformed trace record: ") + e.what());
  }
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

struct TraceFileHeader {
  std::string dataset;
  RunMode mode = RunMode::SCoT;
  std::string created_at;
};

inline void write_traces(std::ostream& out, const TraceFileHeader& header,
                         const std::vector<ReasoningTrace>& traces) {
  ordered_json h = {{"schema", kTraceSchema},
                    {"schema_version", kTraceSchemaVersion},
                    {"dataset", header.dataset},
                    {"mode", to_string(header.mode)},
                    {"created_at", header.created_at}};
  out << h.dump() << '\n';
  for (const auto& t : traces) out << to_json(t).dump() << '\n';
}

inline void write_trace_file(const std::string& path, const TraceFileHeader& header,
                             const std::vector<ReasoningTrace>& traces) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_traces(out, header, traces);
}

struct TraceFile {
  TraceFileHeader header;
  std::vector<ReasoningTrace> traces;
};

inline TraceFile read_trace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  TraceFile file;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaMismatch(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (lineno == 1) {
      if (j.value("schema", "") != kTraceSchema ||
          j.value("schema_version", 0) != kTraceSchemaVersion)
        throw SchemaMismatch(path + ": not a version " +
                             std::to_string(kTraceSchemaVersion) +
                             " trace file");
      file.header.dataset = j.value("dataset", "");
      file.header.mode = parse_run_mode(j.value("mode", ""));
      file.header.created_at = j.value("created_at", "");
      continue;
    }
    try {
      file.traces.push_back(trace_from_json(j));
    } catch (const SchemaMismatch& e) {
      throw SchemaMismatch(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (lineno == 0) throw SchemaMismatch(path + ": empty trace file");
  return file;
}

// ---- reports --------------------------------------------------------------

inline ordered_json to_json(const RunReport& r) {
  ordered_json j = {{"dataset", r.dataset},
                    {"mode", to_string(r.mode)},
                    {"num_questions", r.num_questions},
                    {"num_failed", r.num_failed},
                    {"num_graded", r.num_graded},
                    {"accuracy", r.accuracy},
                    {"mean_latency_s", r.mean_latency_s},
                    {"mean_l_M", r.mean_l_M},
                    {"mean_l_Md", r.mean_l_Md},
                    {"mean_answer_tokens", r.mean_answer_tokens},
                    {"throughput_s", r.throughput_s},
                    {"speedup_r", optional_json(r.speedup_r)},
                    {"throughput_ratio", optional_json(r.throughput_ratio)}};
  if (r.latency_fractions)
    j["latency_fractions"] = {{"target", r.latency_fractions->target},
                              {"draft", r.latency_fractions->draft},
                              {"selection", r.latency_fractions->selection}};
  else
    j["latency_fractions"] = nullptr;
  return j;
}

inline void print_report(std::ostream& os, const RunReport& r) {
  auto fixed = [](double v, int p) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(p) << v;
    return s.str();
  };
  os << "dataset            " << r.dataset << '\n'
     << "mode               " << to_string(r.mode) << '\n'
     << "questions          " << r.num_questions << " (" << r.num_failed
     << " failed)\n"
     << "accuracy           " << fixed(100.0 * r.accuracy, 1) << "% of "
     << r.num_graded << " graded\n"
     << "mean latency t     " << fixed(r.mean_latency_s, 1) << " s\n"
     << "mean l_M           " << fixed(r.mean_l_M, 1) << '\n'
     << "mean l_Md          " << fixed(r.mean_l_Md, 1) << '\n'
     << "mean answer tokens " << fixed(r.mean_answer_tokens, 1) << '\n'
     << "throughput s       " << fixed(r.throughput_s, 1) << " tok/s\n";
  if (r.speedup_r) os << "speed-up r         " << fixed(*r.speedup_r, 2) << '\n';
  if (r.throughput_ratio)
    os << "throughput r'      " << fixed(*r.throughput_ratio, 2) << '\n';
  if (r.latency_fractions) {
    const auto& f = *r.latency_fractions;
    os << "latency split      target " << fixed(100 * f.target, 1) << "% / draft "
       << fixed(100 * f.draft, 1) << "% / selection "
       << fixed(100 * f.selection, 1) << "% (sum "
       << fixed(f.target + f.draft + f.selection, 3) << ")\n";
  }
}

// ---- selection evaluation records -----------------------------------------

/// JSON-lines of {"label_set": [...], "chosen_index": k, "n": n}. Extra
/// fields (ids, prompts) are ignored, so labeled selection data with a
/// chosen_index column reads directly.
inline std::vector<SelectionEvalRecord> read_selection_eval(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::vector<SelectionEvalRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      SelectionEvalRecord r;
      for (const auto& v : j.at("label_set")) r.label_set.insert(v.get<int>());
      r.chosen_index = j.at("chosen_index").get<int>();
      r.n = j.at("n").get<int>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaMismatch(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace scot
