#include "fcucr/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fcucr/checkpoint.hpp"
#include "fcucr/errors.hpp"

namespace fcucr {

using nlohmann::ordered_json;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  write_file(p, text);
}

ordered_json summary_json(const DatasetSummary& s) {
  return ordered_json{{"users", s.users}, {"items", s.items}, {"sessions", s.sessions},
                      {"mean_length", s.mean_length}};
}

ordered_json manifest_object(const Manifest& m) {
  ordered_json config = ordered_json::object();
  for (const auto& k : config_keys()) config[std::string(k.name)] = get_config_value(m.spec, k.name);
  ordered_json out{{"tool_version", m.version},
                   {"seed", m.spec.run.seed},
                   {"dataset_fingerprint", hex64(m.dataset_fingerprint)},
                   {"config", config}};
  if (!m.start_time.empty()) out["start_time"] = m.start_time;
  return out;
}

ordered_json histogram_json(const ProbabilityHistogram& h) {
  return ordered_json{{"separation", h.separation},
                      {"positives", h.pos_count},
                      {"negatives", h.neg_count},
                      {"pos_mass", h.pos_mass},
                      {"neg_mass", h.neg_mass}};
}

}  // namespace

std::string manifest_json(const Manifest& manifest) { return manifest_object(manifest).dump(2); }

DatasetSummary cmd_prepare(const PrepareOptions& options) {
  RawLog log = read_tsv(options.input, RawLogOptions{options.drop_labels});
  Dataset d;
  d.catalog_size = static_cast<int>(log.catalog_size());
  d.raw_item_ids = std::move(log.raw_item_ids);
  d.raw_client_ids = std::move(log.raw_client_ids);
  d.clients = build_splits(segment_sessions(log.interactions, options.gap_seconds));
  write_bundle(d, options.output);
  const DatasetSummary s = summarize(d);
  ordered_json j = summary_json(s);
  j["fingerprint"] = hex64(fingerprint(d));
  write_text(options.output / "summary.json", j.dump(2) + "\n");
  return s;
}

DatasetSummary cmd_prepare_synthetic(const SyntheticConfig& config, const std::filesystem::path& output) {
  SyntheticDataset syn = gen_synthetic(config);
  write_bundle(syn.dataset, output);
  const DatasetSummary s = summarize(syn.dataset);
  ordered_json j = summary_json(s);
  j["fingerprint"] = hex64(fingerprint(syn.dataset));
  j["clusters"] = syn.cluster_of;
  write_text(output / "summary.json", j.dump(2) + "\n");
  return s;
}

RunOutcome run_with_dataset(const ExperimentSpec& spec, const Dataset& dataset) {
  validate(spec.run);
  RunOutcome out;
  out.manifest.spec = spec;
  out.manifest.dataset_fingerprint = fingerprint(dataset);
  if (spec.run.record_timing) out.manifest.start_time = utc_now();

  ExperimentHooks hooks;
  const std::filesystem::path dir = spec.output;
  if (!dir.empty()) hooks.checkpoint_dir = dir / "checkpoint";
  out.result = run_experiment(spec.run, dataset, hooks);
  if (dir.empty()) return out;

  std::filesystem::create_directories(dir);
  {
    std::ostringstream csv;
    write_rounds_csv(csv, out.result.rounds, spec.run.record_timing);
    write_text(dir / "rounds.csv", csv.str());
  }
  {
    std::ostringstream csv;
    csv << "round,hr10_first,ndcg10_first\n";
    for (const auto& p : forgetting_curve(out.result.rounds)) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g\n", p.round, p.hr, p.ndcg);
      csv << buf;
    }
    write_text(dir / "forgetting.csv", csv.str());
  }
  {
    std::ostringstream csv;
    write_histogram_csv(csv, out.result.histogram);
    write_text(dir / "histogram.csv", csv.str());
  }
  const RoundReport& last = out.result.rounds.back();
  ordered_json summary{
      {"manifest", manifest_object(out.manifest)},
      {"rounds_executed", static_cast<int>(out.result.rounds.size()) - 1},
      {"early_stopped", out.result.early_stopped},
      {"best_round", out.result.best_round},
      {"best_val_hr10", out.result.best_val_hr},
      {"final",
       {{"hr10_test", last.hr_test},
        {"ndcg10_test", last.ndcg_test},
        {"hr10_first", last.hr_first},
        {"ndcg10_first", last.ndcg_first},
        {"hr10_val", last.hr_val},
        {"ndcg10_val", last.ndcg_val}}},
      {"histogram", histogram_json(out.result.histogram)}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  return out;
}

RunOutcome cmd_run(const ExperimentSpec& spec) {
  validate(spec.run);
  if (spec.dataset.empty()) throw ConfigError("no dataset given (key 'dataset')");
  const Dataset dataset = read_bundle(spec.dataset);
  return run_with_dataset(spec, dataset);
}

std::vector<SweepRow> cmd_sweep(const ExperimentSpec& spec, const std::string& parameter,
                                const std::vector<std::string>& values) {
  const auto& allowed = sweep_parameters();
  if (std::find(allowed.begin(), allowed.end(), parameter) == allowed.end()) {
    throw ConfigError("cannot sweep '" + parameter + "'; choose one of k, lambda, window, transfer_interval, ldp_std");
  }
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<ExperimentSpec> specs;
  for (const auto& v : values) {
    ExperimentSpec s = spec;
    set_config_value(s, parameter, v);
    validate(s.run);
    if (!spec.output.empty()) s.output = (std::filesystem::path(spec.output) / (parameter + "-" + v)).string();
    specs.push_back(std::move(s));
  }
  if (spec.dataset.empty()) throw ConfigError("no dataset given (key 'dataset')");
  const Dataset dataset = read_bundle(spec.dataset);

  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    rows.push_back(SweepRow{values[i], run_with_dataset(specs[i], dataset)});
  }
  if (!spec.output.empty()) {
    std::ostringstream csv;
    csv << "parameter,value,rounds,best_round,hr10_test,ndcg10_test,hr10_first,ndcg10_first,"
           "separation,mean_round_seconds\n";
    for (const auto& row : rows) {
      const auto& res = row.outcome.result;
      const RoundReport& last = res.rounds.back();
      double secs = 0.0;
      for (std::size_t r = 1; r < res.rounds.size(); ++r) secs += res.rounds[r].seconds();
      const std::size_t executed = res.rounds.size() - 1;
      if (executed > 0) secs /= static_cast<double>(executed);
      if (!spec.run.record_timing) secs = 0.0;
      char buf[512];
      std::snprintf(buf, sizeof buf, "%s,%s,%zu,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.6f\n",
                    parameter.c_str(), row.value.c_str(), executed, res.best_round, last.hr_test,
                    last.ndcg_test, last.hr_first, last.ndcg_first, res.histogram.separation, secs);
      csv << buf;
    }
    write_text(std::filesystem::path(spec.output) / "sweep.csv", csv.str());
  }
  return rows;
}

OfflineEval cmd_eval(const ExperimentSpec& spec, const std::filesystem::path& checkpoint_dir) {
  validate(spec.run);
  if (spec.dataset.empty()) throw ConfigError("no dataset given (key 'dataset')");
  const Dataset dataset = read_bundle(spec.dataset);
  Federation fed(spec.run, dataset);
  fed.load_checkpoint(checkpoint_dir);
  const RoundReport rep = fed.evaluate(0);
  OfflineEval out{rep.hr_test, rep.ndcg_test, rep.hr_first, rep.ndcg_first, fed.test_histogram()};
  ordered_json j{{"hr10_test", out.hr_test},
                 {"ndcg10_test", out.ndcg_test},
                 {"hr10_first", out.hr_first},
                 {"ndcg10_first", out.ndcg_first},
                 {"histogram", histogram_json(out.histogram)}};
  write_text(checkpoint_dir / "eval.json", j.dump(2) + "\n");
  return out;
}

}  // namespace fcucr
