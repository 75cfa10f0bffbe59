#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rgnn/common.hpp"

namespace rgnn {

enum class Task { PathFinding, PrefixSum, Distance };

std::string_view task_name(Task task);
/// Accepts "path_finding", "prefix_sum", "distance".
Task parse_task(std::string_view name);
/// Width of the per-node input feature vector for a task.
int feature_dim(Task task);

struct Edge {
  int u = 0;
  int v = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Undirected simple graph with per-node features and binary labels.
///
/// Edges are normalized to u < v and kept sorted. Adjacency is held as sorted per-node
/// neighbor lists in CSR form, so every traversal and aggregation visits neighbors in
/// ascending index order.
class Graph {
 public:
  Graph() = default;

  /// Structure only: zero-width features, all-zero labels.
  Graph(int num_nodes, std::vector<Edge> edges);

  Graph(int num_nodes, std::vector<Edge> edges, Matrix features, std::vector<int> labels, Task task);

  int num_nodes() const { return num_nodes_; }
  std::span<const Edge> edges() const { return edges_; }
  const Matrix& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  Task task() const { return task_; }

  std::span<const int> neighbors(int v) const;
  int degree(int v) const { return static_cast<int>(neighbors(v).size()); }

  /// CSR view: directed edge e in [offsets()[v], offsets()[v+1]) has receiver v and sender adjacency()[e].
  std::span<const int> offsets() const { return offsets_; }
  std::span<const int> adjacency() const { return adjacency_; }
  int num_directed_edges() const { return static_cast<int>(adjacency_.size()); }

  void set_labels(std::vector<int> labels);
  void set_features(Matrix features);

  friend bool operator==(const Graph& a, const Graph& b);

 private:
  void build();

  int num_nodes_ = 0;
  std::vector<Edge> edges_;
  Matrix features_;
  std::vector<int> labels_;
  Task task_ = Task::PathFinding;
  std::vector<int> offsets_;
  std::vector<int> adjacency_;
};

/// Sorted neighbor list of v. Throws UsageError when v is out of range.
std::vector<int> neighbors(const Graph& g, int v);

bool is_connected(const Graph& g);

/// Unweighted hop distances from s. Throws StructuralError when some node is unreachable.
std::vector<int> bfs_distances(const Graph& g, int s);

/// Largest eccentricity. Throws StructuralError on disconnected graphs.
int diameter(const Graph& g);

/// True iff diameter(g) >= bound. Uses a double BFS sweep as a witness before falling back
/// to the exact all-sources computation.
bool diameter_at_least(const Graph& g, int bound);

/// Relabels node v as p[v]; features and labels move with their node.
/// Throws UsageError unless p is a bijection on {0..n-1}.
Graph permute(const Graph& g, std::span<const int> p);

std::vector<int> inverse_permutation(std::span<const int> p);

Graph path_graph(int n);
Graph star_graph(int leaves);
Graph complete_graph(int n);

}  // namespace rgnn
