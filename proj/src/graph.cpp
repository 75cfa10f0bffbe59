#include "rgnn/graph.hpp"

#include <algorithm>
#include <sstream>

namespace rgnn {

std::string_view task_name(Task task) {
  switch (task) {
    case Task::PathFinding:
      return "path_finding";
    case Task::PrefixSum:
      return "prefix_sum";
    case Task::Distance:
      return "distance";
  }
  return "unknown";
}

Task parse_task(std::string_view name) {
  if (name == "path_finding") return Task::PathFinding;
  if (name == "prefix_sum") return Task::PrefixSum;
  if (name == "distance") return Task::Distance;
  throw UsageError("unknown task '" + std::string(name) + "' (expected path_finding, prefix_sum or distance)");
}

int feature_dim(Task task) { return task == Task::PrefixSum ? 2 : 1; }

Graph::Graph(int num_nodes, std::vector<Edge> edges)
    : Graph(num_nodes, std::move(edges), Matrix::Zero(num_nodes, 0), std::vector<int>(std::max(num_nodes, 0), 0),
            Task::PathFinding) {}

Graph::Graph(int num_nodes, std::vector<Edge> edges, Matrix features, std::vector<int> labels, Task task)
    : num_nodes_(num_nodes),
      edges_(std::move(edges)),
      features_(std::move(features)),
      labels_(std::move(labels)),
      task_(task) {
  if (num_nodes_ < 1) throw UsageError("graph needs at least one node");
  for (auto& e : edges_) {
    if (e.u < 0 || e.v < 0 || e.u >= num_nodes_ || e.v >= num_nodes_) {
      std::ostringstream msg;
      msg << "edge {" << e.u << "," << e.v << "} has an endpoint outside [0," << num_nodes_ << ")";
      throw UsageError(msg.str());
    }
    if (e.u == e.v) throw UsageError("self-loop at node " + std::to_string(e.u));
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  std::sort(edges_.begin(), edges_.end());
  if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) throw UsageError("duplicate edge");
  if (features_.rows() != num_nodes_) throw UsageError("feature row count differs from num_nodes");
  if (static_cast<int>(labels_.size()) != num_nodes_) throw UsageError("label count differs from num_nodes");
  for (int y : labels_) {
    if (y != 0 && y != 1) throw UsageError("labels must be 0 or 1");
  }
  build();
}

void Graph::build() {
  std::vector<int> degree(num_nodes_, 0);
  for (const auto& e : edges_) {
    ++degree[e.u];
    ++degree[e.v];
  }
  offsets_.assign(num_nodes_ + 1, 0);
  for (int v = 0; v < num_nodes_; ++v) offsets_[v + 1] = offsets_[v] + degree[v];
  adjacency_.assign(offsets_.back(), 0);
  std::vector<int> fill(offsets_.begin(), offsets_.end() - 1);
  for (const auto& e : edges_) {
    adjacency_[fill[e.u]++] = e.v;
    adjacency_[fill[e.v]++] = e.u;
  }
  for (int v = 0; v < num_nodes_; ++v) {
    std::sort(adjacency_.begin() + offsets_[v], adjacency_.begin() + offsets_[v + 1]);
  }
}

std::span<const int> Graph::neighbors(int v) const {
  if (v < 0 || v >= num_nodes_) {
    throw UsageError("node " + std::to_string(v) + " out of range [0," + std::to_string(num_nodes_) + ")");
  }
  return std::span<const int>(adjacency_).subspan(offsets_[v], offsets_[v + 1] - offsets_[v]);
}

void Graph::set_labels(std::vector<int> labels) {
  if (static_cast<int>(labels.size()) != num_nodes_) throw UsageError("label count differs from num_nodes");
  for (int y : labels) {
    if (y != 0 && y != 1) throw UsageError("labels must be 0 or 1");
  }
  labels_ = std::move(labels);
}

void Graph::set_features(Matrix features) {
  if (features.rows() != num_nodes_) throw UsageError("feature row count differs from num_nodes");
  features_ = std::move(features);
}

bool operator==(const Graph& a, const Graph& b) {
  return a.num_nodes_ == b.num_nodes_ && a.edges_ == b.edges_ && a.task_ == b.task_ && a.labels_ == b.labels_ &&
         a.features_.rows() == b.features_.rows() && a.features_.cols() == b.features_.cols() &&
         a.features_ == b.features_;
}

std::vector<int> neighbors(const Graph& g, int v) {
  auto nb = g.neighbors(v);
  return {nb.begin(), nb.end()};
}

namespace {

// -1 marks unreachable nodes.
std::vector<int> hop_distances(const Graph& g, int s) {
  std::vector<int> dist(g.num_nodes(), -1);
  std::vector<int> queue;
  queue.reserve(g.num_nodes());
  dist[s] = 0;
  queue.push_back(s);
  for (std::size_t head = 0; head < queue.size(); ++head) {
    int v = queue[head];
    for (int w : g.neighbors(v)) {
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        queue.push_back(w);
      }
    }
  }
  return dist;
}

}  // namespace

bool is_connected(const Graph& g) {
  auto dist = hop_distances(g, 0);
  return std::none_of(dist.begin(), dist.end(), [](int d) { return d < 0; });
}

std::vector<int> bfs_distances(const Graph& g, int s) {
  if (s < 0 || s >= g.num_nodes()) throw UsageError("source node out of range");
  auto dist = hop_distances(g, s);
  if (std::any_of(dist.begin(), dist.end(), [](int d) { return d < 0; })) {
    throw StructuralError("graph is disconnected");
  }
  return dist;
}

int diameter(const Graph& g) {
  int best = 0;
  for (int s = 0; s < g.num_nodes(); ++s) {
    auto dist = bfs_distances(g, s);
    best = std::max(best, *std::max_element(dist.begin(), dist.end()));
  }
  return best;
}

bool diameter_at_least(const Graph& g, int bound) {
  auto first = bfs_distances(g, 0);
  int far = static_cast<int>(std::max_element(first.begin(), first.end()) - first.begin());
  auto second = bfs_distances(g, far);
  if (*std::max_element(second.begin(), second.end()) >= bound) return true;
  return diameter(g) >= bound;
}

std::vector<int> inverse_permutation(std::span<const int> p) {
  std::vector<int> inv(p.size(), -1);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0 || p[i] >= static_cast<int>(p.size()) || inv[p[i]] != -1) {
      throw UsageError("not a permutation");
    }
    inv[p[i]] = static_cast<int>(i);
  }
  return inv;
}

Graph permute(const Graph& g, std::span<const int> p) {
  if (static_cast<int>(p.size()) != g.num_nodes()) throw UsageError("permutation size differs from num_nodes");
  inverse_permutation(p);  // validates bijectivity
  std::vector<Edge> edges;
  edges.reserve(g.edges().size());
  for (const auto& e : g.edges()) edges.push_back({p[e.u], p[e.v]});
  Matrix features(g.num_nodes(), g.features().cols());
  std::vector<int> labels(g.num_nodes());
  for (int v = 0; v < g.num_nodes(); ++v) {
    features.row(p[v]) = g.features().row(v);
    labels[p[v]] = g.labels()[v];
  }
  return Graph(g.num_nodes(), std::move(edges), std::move(features), std::move(labels), g.task());
}

Graph path_graph(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
  return Graph(n, std::move(edges));
}

Graph star_graph(int leaves) {
  std::vector<Edge> edges;
  for (int i = 1; i <= leaves; ++i) edges.push_back({0, i});
  return Graph(leaves + 1, std::move(edges));
}

Graph complete_graph(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) edges.push_back({i, j});
  }
  return Graph(n, std::move(edges));
}

}  // namespace rgnn
