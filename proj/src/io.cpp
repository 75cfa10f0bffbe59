#include "rgnn/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "json.hpp"

namespace rgnn {

using nlohmann::json;

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("cannot format double");
  return std::string(buf, end);
}

double parse_double(std::string_view text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double value = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw ConfigError("malformed number '" + std::string(text) + "'");
  }
  return value;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw ConfigError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------------------------
// Datasets

std::string graph_to_json_line(const Graph& g) {
  json edges = json::array();
  for (const auto& e : g.edges()) edges.push_back({e.u, e.v});
  json features = json::array();
  for (int v = 0; v < g.num_nodes(); ++v) {
    json row = json::array();
    for (Eigen::Index c = 0; c < g.features().cols(); ++c) row.push_back(g.features()(v, c));
    features.push_back(std::move(row));
  }
  json record;
  record["num_nodes"] = g.num_nodes();
  record["edges"] = std::move(edges);
  record["features"] = std::move(features);
  record["labels"] = g.labels();
  record["task_tag"] = task_name(g.task());
  return record.dump();
}

Graph graph_from_json_line(std::string_view line) {
  json record;
  try {
    record = json::parse(line);
    const int n = record.at("num_nodes").get<int>();
    std::vector<Edge> edges;
    for (const auto& e : record.at("edges")) {
      if (e.size() != 2) throw ConfigError("edge must be a pair");
      edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    }
    const auto& rows = record.at("features");
    if (static_cast<int>(rows.size()) != n) throw ConfigError("feature row count differs from num_nodes");
    const auto width = rows.empty() ? 0 : rows.at(0).size();
    Matrix features(n, static_cast<Eigen::Index>(width));
    for (int v = 0; v < n; ++v) {
      if (rows.at(v).size() != width) throw ConfigError("ragged feature rows");
      for (std::size_t c = 0; c < width; ++c) features(v, static_cast<Eigen::Index>(c)) = rows.at(v).at(c).get<double>();
    }
    auto labels = record.at("labels").get<std::vector<int>>();
    Task task = parse_task(record.at("task_tag").get<std::string>());
    return Graph(n, std::move(edges), std::move(features), std::move(labels), task);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed dataset record: ") + e.what());
  } catch (const UsageError& e) {
    throw ConfigError(std::string("invalid graph in dataset: ") + e.what());
  }
}

void write_dataset(std::ostream& out, std::span<const Graph> graphs) {
  for (const auto& g : graphs) out << graph_to_json_line(g) << '\n';
}

std::vector<Graph> read_dataset(std::istream& in) {
  std::vector<Graph> graphs;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    try {
      graphs.push_back(graph_from_json_line(line));
      validate_task_graph(graphs.back());
      if (oracle_labels(graphs.back()) != graphs.back().labels()) throw ConfigError("labels disagree with the task");
    } catch (const std::exception& e) {
      throw ConfigError("dataset line " + std::to_string(line_number) + ": " + e.what());
    }
  }
  return graphs;
}

void save_dataset(const std::filesystem::path& path, std::span<const Graph> graphs) {
  std::ostringstream out;
  write_dataset(out, graphs);
  write_file(path, out.str());
}

std::vector<Graph> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset " + path.string());
  return read_dataset(in);
}

// ---------------------------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr std::string_view kCheckpointMagic = "rgnn-checkpoint";
constexpr int kCheckpointVersion = 1;

std::string expect_key(std::istream& in, std::string_view key) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("checkpoint truncated before '" + std::string(key) + "'");
  const auto space = line.find(' ');
  if (line.substr(0, space) != key) throw ConfigError("checkpoint expected '" + std::string(key) + "', got: " + line);
  return space == std::string::npos ? std::string() : line.substr(space + 1);
}

long long parse_int(const std::string& text) {
  long long value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) throw ConfigError("malformed integer '" + text + "'");
  return value;
}

std::uint64_t parse_uint(const std::string& text) {
  std::uint64_t value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) throw ConfigError("malformed integer '" + text + "'");
  return value;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& c) {
  const auto& m = c.config;
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "task " << task_name(c.task) << '\n';
  out << "in_dim " << m.in_dim << '\n';
  out << "seed " << c.seed << '\n';
  out << "epoch " << c.epoch << '\n';
  out << "validation_loss " << format_double(c.validation_loss) << '\n';
  out << "conv " << conv_name(m.conv) << '\n';
  out << "embed_dim " << m.embed_dim << '\n';
  out << "hidden_factor " << m.hidden_factor << '\n';
  out << "dropout " << format_double(m.dropout) << '\n';
  out << "gin_epsilon " << format_double(m.gin_epsilon) << '\n';
  out << "out_classes " << m.out_classes << '\n';
  out << "baseline_layers " << m.baseline_layers << '\n';
  out << "input_skip " << int{m.input_skip} << '\n';
  out << "gru_state_from_skip " << int{m.gru_state_from_skip} << '\n';
  out << "decoder_sees_input " << int{m.decoder_sees_input} << '\n';
  out << "parameters " << c.params.size() << '\n';
  for (const auto& e : c.params) {
    out << "param " << e.name << ' ' << (e.is_bias ? "bias" : "weight") << ' ' << e.value.rows() << ' '
        << e.value.cols() << '\n';
    for (Eigen::Index r = 0; r < e.value.rows(); ++r) {
      for (Eigen::Index k = 0; k < e.value.cols(); ++k) {
        if (k) out << ' ';
        out << format_double(e.value(r, k));
      }
      out << '\n';
    }
  }
  out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header.rfind(kCheckpointMagic, 0) != 0) throw ConfigError("not a checkpoint file");
  if (parse_int(header.substr(kCheckpointMagic.size() + 1)) != kCheckpointVersion) {
    throw ConfigError("unsupported checkpoint version: " + header);
  }
  Checkpoint c;
  c.task = parse_task(expect_key(in, "task"));
  c.config.in_dim = static_cast<int>(parse_int(expect_key(in, "in_dim")));
  c.seed = parse_uint(expect_key(in, "seed"));
  c.epoch = static_cast<int>(parse_int(expect_key(in, "epoch")));
  c.validation_loss = parse_double(expect_key(in, "validation_loss"));
  c.config.conv = parse_conv(expect_key(in, "conv"));
  c.config.embed_dim = static_cast<int>(parse_int(expect_key(in, "embed_dim")));
  c.config.hidden_factor = static_cast<int>(parse_int(expect_key(in, "hidden_factor")));
  c.config.dropout = parse_double(expect_key(in, "dropout"));
  c.config.gin_epsilon = parse_double(expect_key(in, "gin_epsilon"));
  c.config.out_classes = static_cast<int>(parse_int(expect_key(in, "out_classes")));
  c.config.baseline_layers = static_cast<int>(parse_int(expect_key(in, "baseline_layers")));
  c.config.input_skip = parse_int(expect_key(in, "input_skip")) != 0;
  c.config.gru_state_from_skip = parse_int(expect_key(in, "gru_state_from_skip")) != 0;
  c.config.decoder_sees_input = parse_int(expect_key(in, "decoder_sees_input")) != 0;
  if (c.config.in_dim != feature_dim(c.task)) throw ConfigError("checkpoint in_dim does not match its task");

  // Build the layout from the config and fill it, so names and shapes are checked against the model.
  Model layout(c.config);
  c.params = layout.parameters();
  const auto count = parse_int(expect_key(in, "parameters"));
  if (count != static_cast<long long>(c.params.size())) throw ConfigError("checkpoint parameter count mismatch");
  for (auto& e : c.params) {
    std::istringstream spec(expect_key(in, "param"));
    std::string name, kind;
    Eigen::Index rows = 0, cols = 0;
    spec >> name >> kind >> rows >> cols;
    if (name != e.name || rows != e.value.rows() || cols != e.value.cols() || (kind == "bias") != e.is_bias) {
      throw ConfigError("checkpoint parameter '" + name + "' does not match expected '" + e.name + "'");
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      std::string line;
      if (!std::getline(in, line)) throw ConfigError("checkpoint truncated inside " + name);
      std::istringstream values(line);
      std::string token;
      for (Eigen::Index k = 0; k < cols; ++k) {
        if (!(values >> token)) throw ConfigError("checkpoint row too short in " + name);
        e.value(r, k) = parse_double(token);
      }
    }
  }
  expect_key(in, "end");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ostringstream out;
  write_checkpoint(out, checkpoint);
  write_file(path, out.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

// ---------------------------------------------------------------------------------------------
// Metrics

void write_history_csv(std::ostream& out, std::span<const EpochRecord> history) {
  out << "epoch,train_loss,validation_loss,validation_accuracy,lr,best_validation_loss\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.validation_loss) << ','
        << format_double(r.validation_accuracy) << ',' << format_double(r.lr) << ','
        << format_double(r.best_validation_loss) << '\n';
  }
}

void write_extrapolation_csv(std::ostream& out, std::span<const ExtrapolationRow> rows) {
  out << "n,rounds,graphs,checkpoints,accuracy_mean,accuracy_std,f1_mean,f1_std\n";
  for (const auto& r : rows) {
    out << r.n << ',' << r.rounds << ',' << r.graphs << ',' << r.f1_per_checkpoint.size() << ','
        << format_double(r.accuracy.mean) << ',' << format_double(r.accuracy.std) << ',' << format_double(r.f1.mean)
        << ',' << format_double(r.f1.std) << '\n';
  }
}

void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> points) {
  out << "rounds,accuracy,f1\n";
  for (const auto& p : points) {
    out << p.rounds << ',' << format_double(p.accuracy) << ',' << format_double(p.f1) << '\n';
  }
}

// ---------------------------------------------------------------------------------------------
// Traces

void write_trace_jsonl(std::ostream& out, std::span<const RoundTrace> trace) {
  for (const auto& t : trace) {
    json record;
    record["round"] = t.round;
    record["predictions"] = t.predictions;
    record["state_rms"] = t.state_rms;
    out << record.dump() << '\n';
  }
}

void write_dot_frame(std::ostream& out, const Graph& g, std::span<const int> predictions, int round) {
  if (static_cast<int>(predictions.size()) != g.num_nodes()) throw UsageError("one prediction per node required");
  out << "graph round_" << round << " {\n";
  out << "  label=\"round " << round << "\";\n";
  out << "  node [shape=circle, style=filled];\n";
  const int flag_column = g.task() == Task::PrefixSum ? 1 : 0;
  for (int v = 0; v < g.num_nodes(); ++v) {
    const bool positive = predictions[v] == 1;
    const bool flagged = g.features().cols() > flag_column && g.features()(v, flag_column) > 0.0;
    out << "  " << v << " [label=\"" << v << "\", fillcolor=\"" << (positive ? "#d62728" : "#e0e0e0") << '"';
    if (flagged) out << ", penwidth=3";
    out << "];\n";
  }
  for (const auto& e : g.edges()) out << "  " << e.u << " -- " << e.v << ";\n";
  out << "}\n";
}

// ---------------------------------------------------------------------------------------------

std::string git_blob_hash(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, digest, &length);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return hex.str();
}

}  // namespace rgnn
