#include "rgnn/taskgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace rgnn {

namespace {

std::vector<int> shuffled_identity(int n, Rng& rng) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());
  return order;
}

std::vector<int> nodes_with_flag(const Graph& g, int column) {
  std::vector<int> out;
  for (int v = 0; v < g.num_nodes(); ++v) {
    if (g.features()(v, column) != 0.0) out.push_back(v);
  }
  return out;
}

// Nodes on the unique tree path a..b, endpoints included.
std::vector<int> tree_path_labels(const Graph& g, int a, int b) {
  std::vector<int> parent(g.num_nodes(), -1);
  std::vector<int> queue{a};
  parent[a] = a;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    int v = queue[head];
    for (int w : g.neighbors(v)) {
      if (parent[w] < 0) {
        parent[w] = v;
        queue.push_back(w);
      }
    }
  }
  if (parent[b] < 0) throw StructuralError("marked nodes are not connected");
  std::vector<int> labels(g.num_nodes(), 0);
  for (int v = b; v != a; v = parent[v]) labels[v] = 1;
  labels[a] = 1;
  return labels;
}

}  // namespace

Graph gen_tree(int n, Rng& rng) {
  if (n < 2) throw UsageError("tree needs at least 2 nodes");
  auto relabel = shuffled_identity(n, rng);
  std::vector<Edge> edges;
  edges.reserve(n - 1);
  for (int i = 1; i < n; ++i) {
    int parent = rng.index(i);
    edges.push_back({relabel[i], relabel[parent]});
  }
  return Graph(n, std::move(edges));
}

Graph gen_path_finding(int n, Rng& rng) {
  if (n < 3) throw UsageError("path finding needs at least 3 nodes");
  Graph tree = gen_tree(n, rng);
  int a = rng.index(n);
  int b = rng.index(n - 1);
  if (b >= a) ++b;
  Matrix features = Matrix::Zero(n, 1);
  features(a, 0) = 1.0;
  features(b, 0) = 1.0;
  auto labels = tree_path_labels(tree, a, b);
  std::vector<Edge> edges(tree.edges().begin(), tree.edges().end());
  return Graph(n, std::move(edges), std::move(features), std::move(labels), Task::PathFinding);
}

std::vector<int> oracle_prefix_sum(std::span<const int> bits) {
  std::vector<int> out(bits.size());
  int parity = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    parity ^= bits[i] & 1;
    out[i] = parity;
  }
  return out;
}

Graph gen_prefix_sum(int n, Rng& rng) {
  if (n < 2) throw UsageError("prefix sum needs at least 2 nodes");
  std::vector<int> bits(n);
  for (auto& b : bits) b = rng.bernoulli(0.5) ? 1 : 0;
  const int start = rng.bernoulli(0.5) ? 0 : n - 1;
  std::vector<int> ordered(n);
  for (int i = 0; i < n; ++i) ordered[i] = bits[start == 0 ? i : n - 1 - i];
  auto prefix = oracle_prefix_sum(ordered);

  Matrix features = Matrix::Zero(n, 2);
  std::vector<int> labels(n);
  for (int v = 0; v < n; ++v) {
    features(v, 0) = bits[v];
    labels[v] = prefix[start == 0 ? v : n - 1 - v];
  }
  features(start, 1) = 1.0;
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
  return Graph(n, std::move(edges), std::move(features), std::move(labels), Task::PrefixSum);
}

Graph gen_distance(int n, Rng& rng) {
  if (n < 3) throw UsageError("distance needs at least 3 nodes");
  constexpr int kAttempts = 20;
  constexpr int kMaxSpan = 5;
  const int chords = n / 5;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    auto order = shuffled_identity(n, rng);
    std::set<Edge> edge_set;
    auto key = [](int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; };
    for (int i = 0; i + 1 < n; ++i) edge_set.insert(key(order[i], order[i + 1]));

    // Chords between path positions i and i+span, span in [2, 5].
    int added = 0;
    for (int tries = 0; added < chords && tries < 100 * n; ++tries) {
      int i = rng.index(n);
      int span = 2 + rng.index(kMaxSpan - 1);
      if (i + span >= n) continue;
      if (edge_set.insert(key(order[i], order[i + span])).second) ++added;
    }

    Graph structure(n, std::vector<Edge>(edge_set.begin(), edge_set.end()));
    if (!diameter_at_least(structure, (n + 3) / 4)) continue;

    const int start = rng.index(n);
    auto dist = bfs_distances(structure, start);
    Matrix features = Matrix::Zero(n, 1);
    features(start, 0) = 1.0;
    std::vector<int> labels(n);
    for (int v = 0; v < n; ++v) labels[v] = dist[v] % 2;
    return Graph(n, std::vector<Edge>(edge_set.begin(), edge_set.end()), std::move(features), std::move(labels),
                 Task::Distance);
  }
  throw GenerationError("distance graph of size " + std::to_string(n) + " missed the diameter bound " +
                        std::to_string(kAttempts) + " times");
}

Graph generate_graph(Task task, int n, Rng& rng) {
  switch (task) {
    case Task::PathFinding:
      return gen_path_finding(n, rng);
    case Task::PrefixSum:
      return gen_prefix_sum(n, rng);
    case Task::Distance:
      return gen_distance(n, rng);
  }
  throw UsageError("unknown task");
}

std::vector<Graph> generate_dataset(const GeneratorConfig& config) {
  if (config.num_graphs < 1) throw UsageError("num_graphs must be >= 1");
  if (config.graph_size < 3) throw UsageError("graph_size must be >= 3");
  Rng rng(config.seed);
  std::vector<Graph> graphs;
  graphs.reserve(config.num_graphs);
  for (int i = 0; i < config.num_graphs; ++i) graphs.push_back(generate_graph(config.task, config.graph_size, rng));
  return graphs;
}

std::vector<int> oracle_labels(const Graph& g) {
  switch (g.task()) {
    case Task::PathFinding: {
      auto marks = nodes_with_flag(g, 0);
      if (marks.size() != 2) throw StructuralError("path finding graph needs exactly two marked nodes");
      return tree_path_labels(g, marks[0], marks[1]);
    }
    case Task::PrefixSum: {
      auto starts = nodes_with_flag(g, 1);
      if (starts.size() != 1) throw StructuralError("prefix sum graph needs exactly one start node");
      auto dist = bfs_distances(g, starts[0]);
      std::vector<int> bits(g.num_nodes());
      for (int v = 0; v < g.num_nodes(); ++v) bits[dist[v]] = static_cast<int>(g.features()(v, 0));
      auto prefix = oracle_prefix_sum(bits);
      std::vector<int> labels(g.num_nodes());
      for (int v = 0; v < g.num_nodes(); ++v) labels[v] = prefix[dist[v]];
      return labels;
    }
    case Task::Distance: {
      auto starts = nodes_with_flag(g, 0);
      if (starts.size() != 1) throw StructuralError("distance graph needs exactly one start node");
      auto dist = bfs_distances(g, starts[0]);
      std::vector<int> labels(g.num_nodes());
      for (int v = 0; v < g.num_nodes(); ++v) labels[v] = dist[v] % 2;
      return labels;
    }
  }
  throw UsageError("unknown task");
}

void validate_task_graph(const Graph& g) {
  if (g.features().cols() != feature_dim(g.task())) {
    throw StructuralError("feature width " + std::to_string(g.features().cols()) + " does not match task " +
                          std::string(task_name(g.task())));
  }
  if (!is_connected(g)) throw StructuralError("graph is disconnected");
  for (int v = 0; v < g.num_nodes(); ++v) {
    for (int c = 0; c < g.features().cols(); ++c) {
      double f = g.features()(v, c);
      if (f != 0.0 && f != 1.0) throw StructuralError("features must be 0/1 flags");
    }
  }
  const int flag_column = g.task() == Task::PrefixSum ? 1 : 0;
  const std::size_t expected = g.task() == Task::PathFinding ? 2 : 1;
  if (nodes_with_flag(g, flag_column).size() != expected) throw StructuralError("wrong number of flagged nodes");
  if (g.task() == Task::PathFinding && g.edges().size() != static_cast<std::size_t>(g.num_nodes() - 1)) {
    throw StructuralError("path finding graph is not a tree");
  }
  if (g.task() == Task::PrefixSum) {
    for (int v = 0; v < g.num_nodes(); ++v) {
      if (g.degree(v) > 2) throw StructuralError("prefix sum graph is not a path");
    }
    auto start = nodes_with_flag(g, 1).front();
    if (g.num_nodes() > 1 && g.degree(start) != 1) throw StructuralError("prefix sum start is not an endpoint");
  }
}

DatasetSplit split_dataset(std::vector<Graph> graphs, double train_fraction) {
  if (graphs.empty()) throw UsageError("cannot split an empty dataset");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("train_fraction must lie in (0, 1)");
  const auto total = static_cast<std::ptrdiff_t>(graphs.size());
  auto cut = static_cast<std::ptrdiff_t>(std::floor(train_fraction * static_cast<double>(total) + 1e-9));
  if (total >= 2) cut = std::clamp<std::ptrdiff_t>(cut, 1, total - 1);
  DatasetSplit split;
  split.train.assign(std::make_move_iterator(graphs.begin()), std::make_move_iterator(graphs.begin() + cut));
  split.validation.assign(std::make_move_iterator(graphs.begin() + cut), std::make_move_iterator(graphs.end()));
  return split;
}

std::array<double, 2> class_weights(std::span<const Graph> graphs) {
  std::array<long long, 2> counts{0, 0};
  for (const auto& g : graphs) {
    for (int y : g.labels()) ++counts[y];
  }
  if (counts[0] == 0 || counts[1] == 0) throw UsageError("class weights need both classes present");
  const double total = static_cast<double>(counts[0] + counts[1]);
  return {total / (2.0 * static_cast<double>(counts[0])), total / (2.0 * static_cast<double>(counts[1]))};
}

}  // namespace rgnn
