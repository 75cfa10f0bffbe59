#include "rgnn/run_config.hpp"

#include <charconv>
#include <istream>
#include <ostream>

#include "rgnn/io.hpp"

namespace rgnn {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename Int>
Int parse_integer(std::string_view key, std::string_view text) {
  Int value{};
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw ConfigError("'" + std::string(key) + "' expects an integer, got '" + std::string(text) + "'");
  }
  return value;
}

double parse_real(std::string_view key, std::string_view text) {
  try {
    return parse_double(text);
  } catch (const ConfigError&) {
    throw ConfigError("'" + std::string(key) + "' expects a number, got '" + std::string(text) + "'");
  }
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
  if (text == "0" || text == "false" || text == "no" || text == "off") return false;
  throw ConfigError("'" + std::string(key) + "' expects a boolean, got '" + std::string(text) + "'");
}

std::string join(const auto& values) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ',';
    out += std::to_string(v);
  }
  return out;
}

template <typename Int>
std::vector<Int> parse_list(std::string_view text) {
  std::vector<Int> out;
  if (trim(text).empty()) throw UsageError("empty list");
  while (true) {
    const auto comma = text.find(',');
    auto item = trim(text.substr(0, comma));
    if (item.empty()) throw UsageError("empty item in list");
    Int value{};
    auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (ec != std::errc() || end != item.data() + item.size()) {
      throw UsageError("malformed list item '" + std::string(item) + "'");
    }
    out.push_back(value);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace

RunConfig::RunConfig() { model.in_dim = feature_dim(generator.task); }

std::vector<std::uint64_t> parse_seed_list(std::string_view text) { return parse_list<std::uint64_t>(text); }
std::vector<int> parse_int_list(std::string_view text) { return parse_list<int>(text); }

const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> keys = {
      "task",        "graph_size",   "num_graphs",   "data_seed",    "train_fraction",      "conv",
      "embed_dim",   "hidden_factor", "dropout",     "gin_epsilon",  "baseline_layers",     "input_skip",
      "gru_state_from_skip", "decoder_sees_input", "epochs", "lr", "l2",        "clip_norm",
      "clip_value",  "train_rounds", "weight_decay", "lr_factor",    "lr_patience",         "min_lr",
      "seeds",       "out_dir"};
  return keys;
}

void apply_setting(RunConfig& c, std::string_view key, std::string_view raw) {
  const auto value = trim(raw);
  if (key == "task") {
    try {
      c.generator.task = parse_task(value);
    } catch (const UsageError& e) {
      throw ConfigError(e.what());
    }
    c.model.in_dim = feature_dim(c.generator.task);
  } else if (key == "graph_size") {
    c.generator.graph_size = parse_integer<int>(key, value);
  } else if (key == "num_graphs") {
    c.generator.num_graphs = parse_integer<int>(key, value);
  } else if (key == "data_seed") {
    c.generator.seed = parse_integer<std::uint64_t>(key, value);
  } else if (key == "train_fraction") {
    c.train_fraction = parse_real(key, value);
  } else if (key == "conv") {
    try {
      c.model.conv = parse_conv(value);
    } catch (const UsageError& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "embed_dim") {
    c.model.embed_dim = parse_integer<int>(key, value);
  } else if (key == "hidden_factor") {
    c.model.hidden_factor = parse_integer<int>(key, value);
  } else if (key == "dropout") {
    c.model.dropout = parse_real(key, value);
  } else if (key == "gin_epsilon") {
    c.model.gin_epsilon = parse_real(key, value);
  } else if (key == "baseline_layers") {
    c.model.baseline_layers = parse_integer<int>(key, value);
  } else if (key == "input_skip") {
    c.model.input_skip = parse_bool(key, value);
  } else if (key == "gru_state_from_skip") {
    c.model.gru_state_from_skip = parse_bool(key, value);
  } else if (key == "decoder_sees_input") {
    c.model.decoder_sees_input = parse_bool(key, value);
  } else if (key == "epochs") {
    c.train.epochs = parse_integer<int>(key, value);
  } else if (key == "lr") {
    c.train.initial_lr = parse_real(key, value);
  } else if (key == "l2") {
    c.train.l2_coeff = parse_real(key, value);
  } else if (key == "clip_norm") {
    c.train.clip_norm = parse_real(key, value);
  } else if (key == "clip_value") {
    c.train.clip_value = parse_real(key, value);
  } else if (key == "train_rounds") {
    c.train.train_rounds = parse_integer<int>(key, value);
  } else if (key == "weight_decay") {
    c.train.weight_decay = parse_real(key, value);
  } else if (key == "lr_factor") {
    c.train.scheduler.factor = parse_real(key, value);
  } else if (key == "lr_patience") {
    c.train.scheduler.patience = parse_integer<int>(key, value);
  } else if (key == "min_lr") {
    c.train.scheduler.min_lr = parse_real(key, value);
  } else if (key == "seeds") {
    try {
      c.train.seeds = parse_seed_list(value);
    } catch (const UsageError& e) {
      throw ConfigError(std::string("'seeds': ") + e.what());
    }
  } else if (key == "out_dir") {
    c.out_dir = std::string(value);
  } else {
    throw ConfigError("unknown configuration key '" + std::string(key) + "'");
  }
}

std::vector<std::pair<std::string, std::string>> to_key_values(const RunConfig& c) {
  const auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {
      {"task", std::string(task_name(c.generator.task))},
      {"graph_size", std::to_string(c.generator.graph_size)},
      {"num_graphs", std::to_string(c.generator.num_graphs)},
      {"data_seed", std::to_string(c.generator.seed)},
      {"train_fraction", format_double(c.train_fraction)},
      {"conv", std::string(conv_name(c.model.conv))},
      {"embed_dim", std::to_string(c.model.embed_dim)},
      {"hidden_factor", std::to_string(c.model.hidden_factor)},
      {"dropout", format_double(c.model.dropout)},
      {"gin_epsilon", format_double(c.model.gin_epsilon)},
      {"baseline_layers", std::to_string(c.model.baseline_layers)},
      {"input_skip", b(c.model.input_skip)},
      {"gru_state_from_skip", b(c.model.gru_state_from_skip)},
      {"decoder_sees_input", b(c.model.decoder_sees_input)},
      {"epochs", std::to_string(c.train.epochs)},
      {"lr", format_double(c.train.initial_lr)},
      {"l2", format_double(c.train.l2_coeff)},
      {"clip_norm", format_double(c.train.clip_norm)},
      {"clip_value", format_double(c.train.clip_value)},
      {"train_rounds", std::to_string(c.train.train_rounds)},
      {"weight_decay", format_double(c.train.weight_decay)},
      {"lr_factor", format_double(c.train.scheduler.factor)},
      {"lr_patience", std::to_string(c.train.scheduler.patience)},
      {"min_lr", format_double(c.train.scheduler.min_lr)},
      {"seeds", join(c.train.seeds)},
      {"out_dir", c.out_dir},
  };
}

void write_run_config(std::ostream& out, const RunConfig& config) {
  for (const auto& [key, value] : to_key_values(config)) out << key << " = " << value << '\n';
}

RunConfig read_run_config(std::istream& in, RunConfig base) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    auto text = trim(line);
    if (text.empty() || text.front() == '#' || text.front() == '[') continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(number) + " is not 'key = value'");
    }
    apply_setting(base, trim(text.substr(0, eq)), text.substr(eq + 1));
  }
  return base;
}

}  // namespace rgnn
