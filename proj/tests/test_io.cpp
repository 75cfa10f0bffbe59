#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "rgnn/io.hpp"
#include "support/oracles.hpp"

using namespace rgnn;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("rgnn_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<Graph> dataset(Task task, std::uint64_t seed = 1, int count = 6) {
  GeneratorConfig g;
  g.task = task;
  g.num_graphs = count;
  g.graph_size = 9;
  g.seed = seed;
  return generate_dataset(g);
}

Checkpoint random_checkpoint(ConvType conv, Task task, double spread = 30.0) {
  Checkpoint c;
  c.config.conv = conv;
  c.config.in_dim = feature_dim(task);
  c.config.baseline_layers = 2;
  c.task = task;
  c.seed = 12345678901234ULL;
  c.epoch = 17;
  c.validation_loss = 0.1 + 1e-17;
  Model m = Model::initialized(c.config, 3);
  Rng rng(4);
  c.params = m.parameters();
  // Values with long decimal expansions and extreme exponents.
  for (auto& e : c.params)
    for (Eigen::Index i = 0; i < e.value.size(); ++i) e.value.data()[i] *= std::exp(rng.uniform(-spread, spread));
  return c;
}

}  // namespace

TEST_CASE("format_double round trips exactly") {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const double x = rng.uniform(-1.0, 1.0) * std::pow(10.0, rng.uniform(-300.0, 300.0));
    CHECK(parse_double(format_double(x)) == x);
  }
  for (double x : {0.0, -0.0, 0.1, 1e-320, std::numeric_limits<double>::max(), std::numeric_limits<double>::min()})
    CHECK(parse_double(format_double(x)) == x);
  CHECK(std::signbit(parse_double(format_double(-0.0))));
  CHECK(std::isinf(parse_double(format_double(std::numeric_limits<double>::infinity()))));
  CHECK(std::isnan(parse_double(format_double(std::nan("")))));
  CHECK_THROWS(parse_double("1.5x"));
  CHECK_THROWS(parse_double(""));
}

TEST_CASE("datasets") {
  for (Task task : {Task::PathFinding, Task::PrefixSum, Task::Distance}) {
    CAPTURE(task_name(task));
    auto graphs = dataset(task);
    std::ostringstream a, b;
    write_dataset(a, graphs);
    write_dataset(b, dataset(task));
    CHECK(a.str() == b.str());

    std::istringstream in(a.str());
    auto back = read_dataset(in);
    REQUIRE(back.size() == graphs.size());
    for (std::size_t i = 0; i < graphs.size(); ++i) CHECK(back[i] == graphs[i]);
    std::ostringstream again;
    write_dataset(again, back);
    CHECK(again.str() == a.str());
  }

  SUBCASE("one record per line with a task tag") {
    auto graphs = dataset(Task::PrefixSum, 2, 3);
    std::ostringstream out;
    write_dataset(out, graphs);
    const std::string text = out.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
    CHECK(text.find("\"task_tag\":\"prefix_sum\"") != std::string::npos);
  }

  SUBCASE("file helpers") {
    auto dir = scratch_dir("datasets");
    auto graphs = dataset(Task::Distance);
    save_dataset(dir / "d.jsonl", graphs);
    CHECK(load_dataset(dir / "d.jsonl").size() == graphs.size());
    CHECK_THROWS_AS(load_dataset(dir / "missing.jsonl"), ConfigError);
    CHECK_THROWS(save_dataset(dir / "no_such_dir" / "x.jsonl", graphs));
  }

  SUBCASE("malformed records") {
    auto reject = [](const std::string& text) {
      CAPTURE(text);
      std::istringstream in(text);
      CHECK_THROWS_AS(read_dataset(in), ConfigError);
    };
    reject("{not json}\n");
    reject(R"({"num_nodes":2,"edges":[[0,1]],"features":[[1],[0]],"labels":[0,1]})" "\n");
    reject(R"({"num_nodes":2,"edges":[[0,1]],"features":[[1],[0]],"labels":[0,1],"task_tag":"sorting"})" "\n");
    reject(R"({"num_nodes":3,"edges":[[0,1]],"features":[[1],[0],[0]],"labels":[0,1,0],"task_tag":"distance"})" "\n");
    reject(R"({"num_nodes":2,"edges":[[0,1]],"features":[[1],[0]],"labels":[0,0],"task_tag":"distance"})" "\n");
    reject(R"({"num_nodes":2,"edges":[[0,0]],"features":[[1],[0]],"labels":[0,1],"task_tag":"distance"})" "\n");
  }
}

TEST_CASE("checkpoints") {
  for (ConvType conv : {ConvType::RecGIN, ConvType::RecGINE, ConvType::RecGRU, ConvType::RecGRUE,
                        ConvType::BaselineGIN}) {
    CAPTURE(conv_name(conv));
    Checkpoint c = random_checkpoint(conv, Task::PrefixSum);
    std::ostringstream out;
    write_checkpoint(out, c);
    std::istringstream in(out.str());
    Checkpoint back = read_checkpoint(in);
    CHECK(back.config == c.config);
    CHECK(back.task == c.task);
    CHECK(back.seed == c.seed);
    CHECK(back.epoch == c.epoch);
    CHECK(back.validation_loss == c.validation_loss);
    CHECK(back.params == c.params);

    std::ostringstream again;
    write_checkpoint(again, back);
    CHECK(again.str() == out.str());

    Checkpoint usable = random_checkpoint(conv, Task::PrefixSum, 0.5);
    std::ostringstream saved;
    write_checkpoint(saved, usable);
    std::istringstream reread(saved.str());
    auto graphs = dataset(Task::PrefixSum, 5, 2);
    Model original = usable.model();
    Model loaded = read_checkpoint(reread).model();
    for (const auto& g : graphs) CHECK(loaded.forward(g, 13).logits == original.forward(g, 13).logits);
  }

  SUBCASE("file helpers and flags") {
    auto dir = scratch_dir("checkpoints");
    Checkpoint c = random_checkpoint(ConvType::RecGRUE, Task::Distance);
    c.config.input_skip = false;
    c.config.decoder_sees_input = true;
    c.params = Model::initialized(c.config, 1).parameters();
    save_checkpoint(dir / "c.txt", c);
    Checkpoint back = load_checkpoint(dir / "c.txt");
    CHECK_FALSE(back.config.input_skip);
    CHECK(back.config.decoder_sees_input);
    CHECK(back.params == c.params);
  }

  SUBCASE("corrupt checkpoints") {
    std::ostringstream out;
    write_checkpoint(out, random_checkpoint(ConvType::RecGIN, Task::Distance));
    const std::string good = out.str();
    auto reject = [](const std::string& text) {
      std::istringstream in(text);
      CHECK_THROWS_AS(read_checkpoint(in), ConfigError);
    };
    reject("");
    reject("rgnn-checkpoint 99\n" + good.substr(good.find('\n') + 1));
    reject(good.substr(0, good.size() / 2));
    std::string wrong_shape = good;
    const auto at = wrong_shape.find("param encoder.w1 ");
    wrong_shape.replace(at, wrong_shape.find('\n', at) - at, "param encoder.w1 weight 3 3");
    reject(wrong_shape);
    std::string bad_number = good;
    bad_number.replace(bad_number.find("epoch 17"), 8, "epoch x7");
    reject(bad_number);
  }
}

TEST_CASE("csv tables") {
  std::vector<EpochRecord> history{{0, 0.5, 0.6, 0.7, 4e-4, 0.6}, {1, 0.25, 0.3, 0.9, 4e-4, 0.3}};
  std::ostringstream h;
  write_history_csv(h, history);
  CHECK(h.str() ==
        "epoch,train_loss,validation_loss,validation_accuracy,lr,best_validation_loss\n"
        "0,0.5,0.6,0.7,4e-04,0.6\n"
        "1,0.25,0.3,0.9,4e-04,0.3\n");

  ExtrapolationRow row;
  row.n = 100;
  row.rounds = 120;
  row.graphs = 10;
  row.accuracy = {0.99, 0.01};
  row.f1 = {0.98, 0.02};
  row.f1_per_checkpoint = {0.96, 1.0};
  std::ostringstream e;
  write_extrapolation_csv(e, std::vector<ExtrapolationRow>{row});
  CHECK(e.str() ==
        "n,rounds,graphs,checkpoints,accuracy_mean,accuracy_std,f1_mean,f1_std\n"
        "100,120,10,2,0.99,0.01,0.98,0.02\n");

  std::ostringstream s;
  write_sweep_csv(s, std::vector<SweepPoint>{{10, 0.5, 0.25}});
  CHECK(s.str() == "rounds,accuracy,f1\n10,0.5,0.25\n");
}

TEST_CASE("traces") {
  Graph g(3, {{0, 1}, {1, 2}}, (Matrix(3, 1) << 1, 0, 0).finished(), {0, 1, 0}, Task::Distance);
  std::vector<RoundTrace> trace(2);
  trace[0].round = 0;
  trace[0].predictions = {0, 0, 1};
  trace[0].state_rms = 0.5;
  trace[1].round = 1;
  trace[1].predictions = {0, 1, 0};
  trace[1].state_rms = 0.25;
  std::ostringstream t;
  write_trace_jsonl(t, trace);
  CHECK(t.str() ==
        "{\"predictions\":[0,0,1],\"round\":0,\"state_rms\":0.5}\n"
        "{\"predictions\":[0,1,0],\"round\":1,\"state_rms\":0.25}\n");

  std::ostringstream d;
  write_dot_frame(d, g, trace[1].predictions, 1);
  const std::string dot = d.str();
  CHECK(dot.rfind("graph round_1 {", 0) == 0);
  CHECK(dot.find("1 [label=\"1\", fillcolor=\"#d62728\"];") != std::string::npos);
  CHECK(dot.find("2 [label=\"2\", fillcolor=\"#e0e0e0\"];") != std::string::npos);
  CHECK(dot.find("0 [label=\"0\", fillcolor=\"#e0e0e0\", penwidth=3];") != std::string::npos);
  CHECK(dot.find("0 -- 1;") != std::string::npos);
  CHECK(dot.find("1 -- 2;") != std::string::npos);
  CHECK(dot.back() == '\n');
  CHECK_THROWS_AS(write_dot_frame(d, g, std::vector<int>{0, 1}, 1), UsageError);
}

TEST_CASE("git_blob_hash") {
  CHECK(git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(git_blob_hash("hello world") == "95d09f2b10159347eece71399a7e2e907ea3df4f");
  CHECK(git_blob_hash("line\n") == "a999a0c211215fd28e77d6a7c66ade6ec76ccbcb");
}
