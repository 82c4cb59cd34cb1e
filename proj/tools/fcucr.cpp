// Command-line driver: prepare | run | sweep | eval.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fcucr/config.hpp"
#include "fcucr/errors.hpp"
#include "fcucr/runner.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

// Registers one --flag per config key on `cmd`. Values are applied after the
// config file so flags take precedence.
std::map<std::string, CLI::Option*> add_config_flags(CLI::App& cmd, std::map<std::string, std::string>& storage) {
  std::map<std::string, CLI::Option*> opts;
  for (const auto& key : fcucr::config_keys()) {
    const std::string name(key.name);
    opts[name] = cmd.add_option("--" + fcucr::flag_name(name), storage[name], std::string(key.help));
  }
  return opts;
}

fcucr::ExperimentSpec resolve(const std::string& config_path, const std::map<std::string, CLI::Option*>& opts,
                              const std::map<std::string, std::string>& storage) {
  fcucr::ExperimentSpec spec;
  if (!config_path.empty()) spec = fcucr::load_config(config_path);
  for (const auto& [name, opt] : opts) {
    if (opt->count() > 0) fcucr::set_config_value(spec, name, storage.at(name));
  }
  return spec;
}

void print_summary(const fcucr::DatasetSummary& s) {
  std::cout << "users " << s.users << "\nitems " << s.items << "\nsessions " << s.sessions
            << "\nmean_length " << s.mean_length << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated continual sequential recommendation simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", fcucr::kToolVersion);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "segment a TSV log (or synthesize data) into a dataset bundle");
  fcucr::PrepareOptions prep;
  std::string prep_in, prep_out;
  std::vector<std::string> drop_labels;
  bool synthetic = false;
  fcucr::SyntheticConfig syn;
  prepare->add_option("--input", prep_in, "client<TAB>item<TAB>timestamp[<TAB>label] log");
  prepare->add_option("--output", prep_out, "bundle directory")->required();
  prepare->add_option("--gap-seconds", prep.gap_seconds, "inactivity gap that starts a new session")
      ->capture_default_str();
  prepare->add_option("--drop-label", drop_labels, "skip rows carrying this label (repeatable)");
  prepare->add_flag("--synthetic", synthetic, "generate a synthetic drifting-preference dataset");
  prepare->add_option("--n-clients", syn.n_clients)->capture_default_str();
  prepare->add_option("--catalog-size", syn.catalog_size)->capture_default_str();
  prepare->add_option("--n-sessions", syn.n_sessions)->capture_default_str();
  prepare->add_option("--session-length", syn.session_length)->capture_default_str();
  prepare->add_option("--n-clusters", syn.n_clusters)->capture_default_str();
  prepare->add_option("--drift-rate", syn.drift_rate)->capture_default_str();
  prepare->add_option("--synthetic-seed", syn.seed)->capture_default_str();

  // run
  auto* run = app.add_subcommand("run", "run one experiment");
  std::string run_config;
  std::map<std::string, std::string> run_values;
  run->add_option("--config", run_config, "key = value config file");
  auto run_opts = add_config_flags(*run, run_values);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run one experiment per parameter value");
  std::string sweep_config, sweep_param;
  std::vector<std::string> sweep_values;
  std::map<std::string, std::string> sweep_store;
  sweep->add_option("--config", sweep_config, "key = value config file");
  sweep->add_option("--param", sweep_param, "k | lambda | window | transfer_interval | ldp_std")->required();
  sweep->add_option("--values", sweep_values, "values to sweep")->required()->delimiter(',');
  auto sweep_opts = add_config_flags(*sweep, sweep_store);

  // eval
  auto* eval = app.add_subcommand("eval", "re-evaluate a saved checkpoint");
  std::string eval_config, eval_ckpt;
  std::map<std::string, std::string> eval_store;
  eval->add_option("--config", eval_config, "key = value config file");
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint directory")->required();
  auto eval_opts = add_config_flags(*eval, eval_store);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*prepare) {
      fcucr::DatasetSummary s;
      if (synthetic) {
        s = fcucr::cmd_prepare_synthetic(syn, prep_out);
      } else {
        if (prep_in.empty()) throw fcucr::ConfigError("prepare needs --input or --synthetic");
        prep.input = prep_in;
        prep.output = prep_out;
        prep.drop_labels.insert(drop_labels.begin(), drop_labels.end());
        s = fcucr::cmd_prepare(prep);
      }
      print_summary(s);
    } else if (*run) {
      const auto spec = resolve(run_config, run_opts, run_values);
      const auto out = fcucr::cmd_run(spec);
      const auto& last = out.result.rounds.back();
      std::cout << "rounds " << out.result.rounds.size() - 1 << "\nhr10_test " << last.hr_test
                << "\nndcg10_test " << last.ndcg_test << "\nhr10_first " << last.hr_first << "\n";
    } else if (*sweep) {
      const auto spec = resolve(sweep_config, sweep_opts, sweep_store);
      const auto rows = fcucr::cmd_sweep(spec, sweep_param, sweep_values);
      for (const auto& row : rows) {
        std::cout << sweep_param << "=" << row.value << " hr10_test "
                  << row.outcome.result.rounds.back().hr_test << "\n";
      }
    } else if (*eval) {
      const auto spec = resolve(eval_config, eval_opts, eval_store);
      const auto out = fcucr::cmd_eval(spec, eval_ckpt);
      std::cout << "hr10_test " << out.hr_test << "\nndcg10_test " << out.ndcg_test << "\n";
    }
  } catch (const fcucr::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const fcucr::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
