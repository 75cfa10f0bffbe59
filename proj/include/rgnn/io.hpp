#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rgnn/model.hpp"
#include "rgnn/train.hpp"

namespace rgnn {

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

// Datasets: JSON lines, one graph per line with fields num_nodes, edges, features, labels, task_tag.
std::string graph_to_json_line(const Graph& g);
Graph graph_from_json_line(std::string_view line);
void write_dataset(std::ostream& out, std::span<const Graph> graphs);
/// Parses and validates every graph (connectivity and flag schema included).
std::vector<Graph> read_dataset(std::istream& in);
void save_dataset(const std::filesystem::path& path, std::span<const Graph> graphs);
std::vector<Graph> load_dataset(const std::filesystem::path& path);

// Checkpoints: versioned line-oriented text, parameters at full precision.
void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Metrics tables.
void write_history_csv(std::ostream& out, std::span<const EpochRecord> history);
void write_extrapolation_csv(std::ostream& out, std::span<const ExtrapolationRow> rows);
void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> points);

// Per-round traces.
void write_trace_jsonl(std::ostream& out, std::span<const RoundTrace> trace);
/// Graphviz description of one round; predicted-positive nodes are filled, flagged input nodes drawn bold.
void write_dot_frame(std::ostream& out, const Graph& g, std::span<const int> predictions, int round);

/// Git blob object id: SHA-1 over "blob <size>\0" followed by the content, in lowercase hex.
std::string git_blob_hash(std::string_view content);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace rgnn
