#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "rgnn/graph.hpp"

namespace rgnn {

struct GeneratorConfig {
  Task task = Task::PrefixSum;
  int num_graphs = 200;
  int graph_size = 10;
  std::uint64_t seed = 1;
};

/// Random tree: node i attaches to a uniform earlier node, then labels are shuffled so no
/// index is structurally privileged.
Graph gen_tree(int n, Rng& rng);

/// Tree with two marked nodes (feature column 0); label 1 on the tree path between them, endpoints included.
Graph gen_path_finding(int n, Rng& rng);

/// out[i] = (bits[0] + ... + bits[i]) mod 2.
std::vector<int> oracle_prefix_sum(std::span<const int> bits);

/// Path 0-1-...-(n-1) with random bits in column 0 and the start flag (column 1) on a random endpoint.
Graph gen_prefix_sum(int n, Rng& rng);

/// Sparse connected graph with diameter >= n/4: a random Hamiltonian path plus floor(n/5)
/// short chords spanning at most 5 path positions. Labels are hop distance to the start mod 2.
/// Throws GenerationError if 20 attempts all miss the diameter bound.
Graph gen_distance(int n, Rng& rng);

Graph generate_graph(Task task, int n, Rng& rng);

std::vector<Graph> generate_dataset(const GeneratorConfig& config);

/// Labels derived from features and structure alone, using the task's exact solver.
std::vector<int> oracle_labels(const Graph& g);

/// Throws StructuralError when a graph is disconnected or its flag columns do not match the task schema.
void validate_task_graph(const Graph& g);

struct DatasetSplit {
  std::vector<Graph> train;
  std::vector<Graph> validation;
};

/// The first floor(train_fraction * N) graphs go to training, the remainder to validation.
/// Both sides are kept non-empty when N >= 2.
DatasetSplit split_dataset(std::vector<Graph> graphs, double train_fraction);

/// weight[c] = total_nodes / (2 * count_c).
std::array<double, 2> class_weights(std::span<const Graph> graphs);

}  // namespace rgnn
