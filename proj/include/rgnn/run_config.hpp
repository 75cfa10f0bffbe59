#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rgnn/model.hpp"
#include "rgnn/taskgen.hpp"
#include "rgnn/train.hpp"

namespace rgnn {

/// Everything a run needs, resolvable from defaults, a flat `key = value` file, and flags.
/// Defaults are the best column of the tuned hyperparameter grid.
struct RunConfig {
  GeneratorConfig generator;
  double train_fraction = 0.8;
  ModelConfig model;
  TrainConfig train;
  std::string out_dir = "run";

  RunConfig();
};

/// Keys accepted by apply_setting, in serialization order.
const std::vector<std::string>& run_config_keys();

/// Throws ConfigError for unknown keys or malformed values. Setting `task` also sets model.in_dim.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

std::vector<std::pair<std::string, std::string>> to_key_values(const RunConfig& config);

void write_run_config(std::ostream& out, const RunConfig& config);

/// Applies every `key = value` line onto `base`. Blank lines and lines starting with '#' are skipped.
RunConfig read_run_config(std::istream& in, RunConfig base = {});

std::vector<std::uint64_t> parse_seed_list(std::string_view text);
std::vector<int> parse_int_list(std::string_view text);

}  // namespace rgnn
