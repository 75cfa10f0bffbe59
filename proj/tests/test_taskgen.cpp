#include "doctest.h"

#include <numeric>

#include "rgnn/taskgen.hpp"
#include "support/oracles.hpp"

using namespace rgnn;

namespace {

Graph with_flags(Graph structure, Task task, const std::vector<std::vector<double>>& rows) {
  Matrix f(structure.num_nodes(), static_cast<Eigen::Index>(rows.front().size()));
  for (int v = 0; v < structure.num_nodes(); ++v)
    for (std::size_t c = 0; c < rows[v].size(); ++c) f(v, static_cast<Eigen::Index>(c)) = rows[v][c];
  std::vector<Edge> edges(structure.edges().begin(), structure.edges().end());
  Graph g(structure.num_nodes(), std::move(edges), std::move(f), std::vector<int>(structure.num_nodes(), 0), task);
  g.set_labels(oracle_labels(g));
  return g;
}

}  // namespace

TEST_CASE("gen_tree") {
  Rng rng(1);
  Graph two = gen_tree(2, rng);
  CHECK(two.edges().size() == 1);
  CHECK_THROWS_AS(gen_tree(1, rng), UsageError);

  for (int n : {3, 10, 57}) {
    Graph t = gen_tree(n, rng);
    CHECK(t.edges().size() == static_cast<std::size_t>(n - 1));
    CHECK(is_connected(t));  // connected with n-1 edges, hence acyclic
  }

  SUBCASE("every index reaches degree >= 2 somewhere in 1000 samples") {
    std::vector<int> seen(10, 0);
    for (int s = 0; s < 1000; ++s) {
      Graph t = gen_tree(10, rng);
      for (int v = 0; v < 10; ++v) seen[v] |= t.degree(v) >= 2;
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int x) { return x == 1; }));
  }
}

TEST_CASE("path finding labels") {
  SUBCASE("path with interior marks") {
    auto g = with_flags(path_graph(5), Task::PathFinding, {{0}, {1}, {0}, {1}, {0}});
    CHECK(g.labels() == std::vector<int>{0, 1, 1, 1, 0});
  }
  SUBCASE("star with two marked leaves") {
    auto g = with_flags(star_graph(4), Task::PathFinding, {{0}, {1}, {0}, {1}, {0}});
    CHECK(g.labels() == std::vector<int>{1, 1, 0, 1, 0});
  }
  SUBCASE("generated labels equal exhaustive path enumeration") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 3 + rng.index(10);
      Graph g = gen_path_finding(n, rng);
      std::vector<int> marks;
      for (int v = 0; v < n; ++v)
        if (g.features()(v, 0) == 1.0) marks.push_back(v);
      REQUIRE(marks.size() == 2);
      CHECK(g.labels() == testing::nodes_on_simple_paths(g, marks[0], marks[1]));
    }
  }
  Rng rng(1);
  CHECK_THROWS_AS(gen_path_finding(2, rng), UsageError);
}

TEST_CASE("oracle_prefix_sum") {
  CHECK(oracle_prefix_sum(std::vector<int>{1, 0, 1, 1}) == std::vector<int>{1, 1, 0, 1});
  CHECK(oracle_prefix_sum(std::vector<int>{0, 0, 0}) == std::vector<int>{0, 0, 0});
  CHECK(oracle_prefix_sum(std::vector<int>{1, 1, 1, 1, 1, 1}) == std::vector<int>{1, 0, 1, 0, 1, 0});
}

TEST_CASE("gen_prefix_sum") {
  SUBCASE("two nodes, start at node 0") {
    auto g = with_flags(path_graph(2), Task::PrefixSum, {{1, 1}, {0, 0}});
    CHECK(g.labels() == std::vector<int>{1, 1});
  }
  SUBCASE("start at the far endpoint reads right to left") {
    auto g = with_flags(path_graph(4), Task::PrefixSum, {{1, 0}, {1, 0}, {0, 0}, {1, 1}});
    CHECK(g.labels() == std::vector<int>{1, 0, 1, 1});
  }
  SUBCASE("all-zero bits") {
    auto g = with_flags(path_graph(6), Task::PrefixSum, {{0, 1}, {0, 0}, {0, 0}, {0, 0}, {0, 0}, {0, 0}});
    CHECK(g.labels() == std::vector<int>(6, 0));
  }
  SUBCASE("generated labels equal direct summation") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 2 + rng.index(11);
      Graph g = gen_prefix_sum(n, rng);
      const int start = g.features()(0, 1) == 1.0 ? 0 : n - 1;
      std::vector<int> bits(n), expected(n);
      for (int i = 0; i < n; ++i) bits[i] = static_cast<int>(g.features()(start == 0 ? i : n - 1 - i, 0));
      auto parity = testing::direct_prefix_parity(bits);
      for (int i = 0; i < n; ++i) expected[start == 0 ? i : n - 1 - i] = parity[i];
      CHECK(g.labels() == expected);
    }
  }
  SUBCASE("flipping one bit flips every label at and after it") {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
      Graph g = gen_prefix_sum(10, rng);
      const int start = g.features()(0, 1) == 1.0 ? 0 : 9;
      auto position = [&](int v) { return start == 0 ? v : 9 - v; };
      for (int flip = 0; flip < 10; ++flip) {
        Graph h = g;
        Matrix f = h.features();
        f(flip, 0) = 1.0 - f(flip, 0);
        h.set_features(f);
        auto relabeled = oracle_labels(h);
        for (int v = 0; v < 10; ++v) {
          const bool should_flip = position(v) >= position(flip);
          CHECK((relabeled[v] != g.labels()[v]) == should_flip);
        }
      }
    }
  }
}

TEST_CASE("gen_distance") {
  SUBCASE("path with start 0") {
    auto g = with_flags(path_graph(3), Task::Distance, {{1}, {0}, {0}});
    CHECK(g.labels() == std::vector<int>{0, 1, 0});
  }
  SUBCASE("n = 3 degenerates to a path") {
    Rng rng(4);
    Graph g = gen_distance(3, rng);
    CHECK(g.edges().size() == 2);
  }
  SUBCASE("structure and labels against Floyd-Warshall") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 3 + rng.index(48);
      Graph g = gen_distance(n, rng);
      CHECK(is_connected(g));
      CHECK(g.edges().size() <= static_cast<std::size_t>(2 * n));
      int start = -1;
      for (int v = 0; v < n; ++v)
        if (g.features()(v, 0) == 1.0) start = v;
      REQUIRE(start >= 0);
      CHECK(g.labels()[start] == 0);
      auto all = testing::floyd_warshall(g);
      for (int v = 0; v < n; ++v) CHECK(g.labels()[v] == all[start][v] % 2);
    }
  }
}

TEST_CASE("generated datasets satisfy the task schema") {
  for (Task task : {Task::PathFinding, Task::PrefixSum, Task::Distance}) {
    auto graphs = generate_dataset({task, 30, 10, 3});
    for (const auto& g : graphs) {
      CHECK_NOTHROW(validate_task_graph(g));
      CHECK(oracle_labels(g) == g.labels());
    }
  }
  CHECK_THROWS_AS(generate_dataset({Task::Distance, 0, 10, 1}), UsageError);
  CHECK_THROWS_AS(generate_dataset({Task::Distance, 5, 2, 1}), UsageError);
}

TEST_CASE("split_dataset") {
  auto graphs = generate_dataset({Task::PrefixSum, 200, 10, 1});
  auto split = split_dataset(graphs, 0.8);
  CHECK(split.train.size() == 160);
  CHECK(split.validation.size() == 40);

  auto small = split_dataset(std::vector<Graph>(graphs.begin(), graphs.begin() + 10), 0.8);
  CHECK(small.train.size() == 8);
  CHECK(small.validation.size() == 2);

  std::vector<Graph> joined = split.train;
  joined.insert(joined.end(), split.validation.begin(), split.validation.end());
  CHECK(joined == graphs);

  CHECK_THROWS_AS(split_dataset({}, 0.8), UsageError);
  CHECK_THROWS_AS(split_dataset(graphs, 1.0), UsageError);
  CHECK_THROWS_AS(split_dataset(graphs, 0.0), UsageError);
}

TEST_CASE("class_weights") {
  auto labelled = [](int zeros, int ones) {
    std::vector<int> labels(zeros + ones, 0);
    std::fill(labels.begin() + zeros, labels.end(), 1);
    std::vector<Edge> edges;
    for (int i = 0; i + 1 < zeros + ones; ++i) edges.push_back({i, i + 1});
    return Graph(zeros + ones, edges, Matrix::Zero(zeros + ones, 1), labels, Task::Distance);
  };
  {
    std::vector<Graph> gs{labelled(5, 5)};
    auto w = class_weights(gs);
    CHECK(w[0] == doctest::Approx(1.0));
    CHECK(w[1] == doctest::Approx(1.0));
  }
  {
    std::vector<Graph> gs{labelled(874, 126)};
    auto w = class_weights(gs);
    CHECK(w[0] == doctest::Approx(1000.0 / 1748.0));
    CHECK(w[0] == doctest::Approx(0.572).epsilon(1e-3));
    CHECK(w[1] == doctest::Approx(3.968).epsilon(1e-3));
  }
  {
    auto gs = generate_dataset({Task::PrefixSum, 200, 10, 1});
    auto w = class_weights(gs);
    CHECK(w[0] >= 0.8);
    CHECK(w[0] <= 1.25);
    CHECK(w[1] >= 0.8);
    CHECK(w[1] <= 1.25);
  }
  std::vector<Graph> one_class{labelled(4, 0)};
  CHECK_THROWS_AS(class_weights(one_class), UsageError);
}
