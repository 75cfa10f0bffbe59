#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rgnn/model.hpp"
#include "rgnn/taskgen.hpp"

namespace rgnn {

struct TrainConfig {
  int epochs = 1000;
  double initial_lr = 4e-4;
  double l2_coeff = 1e-4;
  double clip_norm = 5.0;
  double clip_value = 1.0;
  int train_rounds = 12;
  double weight_decay = 0.0;
  PlateauConfig scheduler;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

  void validate() const;
};

/// A trained (or freshly initialized) model plus the provenance needed to reuse it.
struct Checkpoint {
  ModelConfig config;
  Task task = Task::PrefixSum;
  std::uint64_t seed = 0;
  int epoch = 0;
  double validation_loss = std::numeric_limits<double>::infinity();
  ParameterSet params;

  Model model() const { return Model(config, params); }
};

struct EpochRecord {
  int epoch = 0;  // 0 is the evaluation of the initial parameters
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double validation_accuracy = 0.0;
  double lr = 0.0;
  double best_validation_loss = 0.0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> history;
};

/// One graph per optimizer step. After every epoch the validation loss (dropout off, train_rounds
/// rounds) drives the plateau scheduler and model selection; the checkpoint with the lowest
/// validation loss over all epochs, including the initial parameters, is returned.
/// Throws TrainingError on a non-finite loss.
TrainResult train(const ModelConfig& model_config, const TrainConfig& train_config, Task task, std::uint64_t seed,
                  std::span<const Graph> train_set, std::span<const Graph> validation_set,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

struct EvalMetrics {
  double accuracy = 0.0;
  double f1 = 0.0;
  double loss = 0.0;  // mean per-graph total loss; only filled by validation_metrics
  long long nodes = 0;
};

/// Binary F1 with class 1 positive: 2TP / (2TP + FP + FN), 0 when the denominator is 0.
double f1_score(std::span<const int> predictions, std::span<const int> labels);

/// ceil(1.2 n): 10 -> 12, 100 -> 120.
int rounds_for_size(int n);

/// Node-level accuracy and F1 over all nodes of all graphs, dropout disabled.
EvalMetrics evaluate(const Model& model, std::span<const Graph> graphs, int rounds);

/// evaluate() plus the mean per-graph training objective.
EvalMetrics validation_metrics(const Model& model, std::span<const Graph> graphs, int rounds,
                               std::span<const double> class_weights, double l2_coeff);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
};
MeanStd mean_std(std::span<const double> values);

struct ExtrapolationRow {
  int n = 0;
  int rounds = 0;
  int graphs = 0;
  MeanStd accuracy;
  MeanStd f1;
  std::vector<double> f1_per_checkpoint;
};

/// Graphs for size n are drawn from a namespace derived from eval_seed that never collides with
/// the training data streams.
std::vector<Graph> evaluation_graphs(Task task, int n, int count, std::uint64_t eval_seed);

/// Evaluates every checkpoint on fresh graphs of each size, using rounds_for_size(n) unless
/// `rounds` overrides it, and aggregates F1 and accuracy over checkpoints.
std::vector<ExtrapolationRow> extrapolation_suite(std::span<const Checkpoint> checkpoints, Task task,
                                                  std::span<const int> sizes, int graphs_per_size,
                                                  std::uint64_t eval_seed, std::optional<int> rounds = std::nullopt);

struct SweepPoint {
  int rounds = 0;
  double accuracy = 0.0;
  double f1 = 0.0;
};

/// Accuracy after each requested number of rounds on a fixed set of graphs; a single run to the
/// largest round count serves all requests. Points come back in ascending round order.
std::vector<SweepPoint> stabilization_sweep(const Model& model, std::span<const Graph> graphs,
                                            std::span<const int> round_counts);

std::vector<int> default_sweep_rounds();

struct SeedRun {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<double> values;
};

struct SeedAggregate {
  std::vector<SeedRun> runs;
  std::vector<MeanStd> stats;  // over successful runs, one per protocol value
  int failures = 0;
};

/// Runs `protocol` once per seed. A throwing seed is recorded as failed and the rest still run.
SeedAggregate run_seeds(std::span<const std::uint64_t> seeds,
                        const std::function<std::vector<double>(std::uint64_t)>& protocol);

}  // namespace rgnn
