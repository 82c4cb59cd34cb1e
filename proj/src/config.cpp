#include "fcucr/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

#include "fcucr/errors.hpp"

namespace fcucr {

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"dataset", "dataset bundle directory"},
      {"output", "report directory"},
      {"lambda", "distillation loss weight"},
      {"k", "prototypes retrieved per client"},
      {"epochs", "local epochs per round"},
      {"rounds", "communication rounds"},
      {"lr", "Adam learning rate"},
      {"dim", "embedding / hidden state size"},
      {"hidden", "prediction head width"},
      {"negatives", "sampled negatives per position"},
      {"window", "knowledge-base window in rounds (0 = unbounded)"},
      {"transfer_interval", "rounds between prototype transfers"},
      {"ldp_std", "Laplace noise std on uploaded parameters"},
      {"ldp_prototypes", "also noise uploaded prototypes"},
      {"patience", "early-stopping patience in rounds (0 = off)"},
      {"seed", "master seed"},
      {"no_transfer", "disable prototype transfer"},
      {"distill_target", "all | prototype"},
      {"reset_shared_optimizer", "reset encoder Adam state every round"},
      {"persist_head_optimizer", "keep head Adam state across rounds"},
      {"reuse_last_session", "exhausted clients retrain on their last session"},
      {"eval_candidates", "0 = rank full catalog, else sampled candidates"},
      {"threads", "worker threads for client phases"},
      {"record_timing", "write wall-clock seconds into reports"},
  };
  return keys;
}

std::string flag_name(std::string_view key) {
  std::string out(key);
  for (char& c : out)
    if (c == '_') c = '-';
  return out;
}

namespace {

std::string valid_keys() {
  std::string out;
  for (const auto& k : config_keys()) {
    if (!out.empty()) out += ", ";
    out += k.name;
  }
  return out;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw ConfigError("invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'");
}

template <class T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v);
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

void set_config_value(ExperimentSpec& spec, std::string_view key, std::string_view value) {
  RunConfig& c = spec.run;
  value = trim(value);
  if (key == "dataset") spec.dataset = std::string(value);
  else if (key == "output") spec.output = std::string(value);
  else if (key == "lambda") c.lambda = parse_number<double>(key, value);
  else if (key == "k") c.k = parse_number<int>(key, value);
  else if (key == "epochs") c.epochs = parse_number<int>(key, value);
  else if (key == "rounds") c.rounds = parse_number<int>(key, value);
  else if (key == "lr") c.lr = parse_number<double>(key, value);
  else if (key == "dim") c.dim = parse_number<int>(key, value);
  else if (key == "hidden") c.hidden = parse_number<int>(key, value);
  else if (key == "negatives") c.negatives = parse_number<int>(key, value);
  else if (key == "window") c.window = parse_number<int>(key, value);
  else if (key == "transfer_interval") c.transfer_interval = parse_number<int>(key, value);
  else if (key == "ldp_std") c.ldp_std = parse_number<double>(key, value);
  else if (key == "ldp_prototypes") c.ldp_prototypes = parse_bool(key, value);
  else if (key == "patience") c.patience = parse_number<int>(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "no_transfer") c.no_transfer = parse_bool(key, value);
  else if (key == "distill_target") {
    if (value == "all") c.distill_target = DistillTarget::kAllPositions;
    else if (value == "prototype") c.distill_target = DistillTarget::kPrototype;
    else bad_value(key, value);
  }
  else if (key == "reset_shared_optimizer") c.reset_shared_optimizer = parse_bool(key, value);
  else if (key == "persist_head_optimizer") c.persist_head_optimizer = parse_bool(key, value);
  else if (key == "reuse_last_session") c.reuse_last_session = parse_bool(key, value);
  else if (key == "eval_candidates") c.eval_candidates = parse_number<int>(key, value);
  else if (key == "threads") c.threads = parse_number<int>(key, value);
  else if (key == "record_timing") c.record_timing = parse_bool(key, value);
  else throw ConfigError("unknown config key '" + std::string(key) + "'; valid keys: " + valid_keys());
}

std::string get_config_value(const ExperimentSpec& spec, std::string_view key) {
  const RunConfig& c = spec.run;
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  if (key == "dataset") return spec.dataset;
  if (key == "output") return spec.output;
  if (key == "lambda") return fmt_double(c.lambda);
  if (key == "k") return std::to_string(c.k);
  if (key == "epochs") return std::to_string(c.epochs);
  if (key == "rounds") return std::to_string(c.rounds);
  if (key == "lr") return fmt_double(c.lr);
  if (key == "dim") return std::to_string(c.dim);
  if (key == "hidden") return std::to_string(c.hidden);
  if (key == "negatives") return std::to_string(c.negatives);
  if (key == "window") return std::to_string(c.window);
  if (key == "transfer_interval") return std::to_string(c.transfer_interval);
  if (key == "ldp_std") return fmt_double(c.ldp_std);
  if (key == "ldp_prototypes") return b(c.ldp_prototypes);
  if (key == "patience") return std::to_string(c.patience);
  if (key == "seed") return std::to_string(c.seed);
  if (key == "no_transfer") return b(c.no_transfer);
  if (key == "distill_target") return c.distill_target == DistillTarget::kPrototype ? "prototype" : "all";
  if (key == "reset_shared_optimizer") return b(c.reset_shared_optimizer);
  if (key == "persist_head_optimizer") return b(c.persist_head_optimizer);
  if (key == "reuse_last_session") return b(c.reuse_last_session);
  if (key == "eval_candidates") return std::to_string(c.eval_candidates);
  if (key == "threads") return std::to_string(c.threads);
  if (key == "record_timing") return b(c.record_timing);
  throw ConfigError("unknown config key '" + std::string(key) + "'; valid keys: " + valid_keys());
}

void apply_config(ExperimentSpec& spec, std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    set_config_value(spec, trim(view.substr(0, eq)), view.substr(eq + 1));
  }
}

ExperimentSpec load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  ExperimentSpec spec;
  apply_config(spec, in);
  return spec;
}

std::string format_config(const ExperimentSpec& spec) {
  std::string out;
  for (const auto& k : config_keys()) {
    out += std::string(k.name) + " = " + get_config_value(spec, k.name) + "\n";
  }
  return out;
}

}  // namespace fcucr
