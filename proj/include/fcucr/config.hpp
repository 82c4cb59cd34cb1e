#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "fcucr/federation.hpp"

namespace fcucr {

// A run configuration plus where its data lives and where reports go.
struct ExperimentSpec {
  RunConfig run;
  std::string dataset;
  std::string output;
};

struct ConfigKey {
  std::string_view name;  // config key; the CLI flag is --name with '_' -> '-'
  std::string_view help;
};

const std::vector<ConfigKey>& config_keys();

std::string flag_name(std::string_view key);

// Throws ConfigError listing the valid keys when `key` is unknown, or naming
// the key when the value does not parse.
void set_config_value(ExperimentSpec& spec, std::string_view key, std::string_view value);
std::string get_config_value(const ExperimentSpec& spec, std::string_view key);

// `key = value` lines; '#' starts a comment.
void apply_config(ExperimentSpec& spec, std::istream& in);
ExperimentSpec load_config(const std::filesystem::path& path);

// Canonical `key = value` text in config_keys() order.
std::string format_config(const ExperimentSpec& spec);

}  // namespace fcucr
