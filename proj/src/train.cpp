#include "rgnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace rgnn {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kTrainStream = 2;
constexpr std::uint64_t kEvalNamespace = 0xE7A1'0000'0000ULL;

struct Confusion {
  long long tp = 0, fp = 0, fn = 0, correct = 0, total = 0;

  void add(std::span<const int> predictions, std::span<const int> labels) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const int p = predictions[i];
      const int y = labels[i];
      tp += (p == 1 && y == 1);
      fp += (p == 1 && y != 1);
      fn += (p != 1 && y == 1);
      correct += (p == y);
      ++total;
    }
  }
  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
  double f1() const {
    const long long denom = 2 * tp + fp + fn;
    return denom ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
  }
};

void check_schema(const ModelConfig& config, std::span<const Graph> graphs) {
  for (const auto& g : graphs) {
    if (g.features().cols() != config.in_dim) {
      throw ConfigError("graph feature width " + std::to_string(g.features().cols()) + " does not match in_dim " +
                        std::to_string(config.in_dim));
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw UsageError("epochs must be >= 0");
  if (!(initial_lr > 0.0)) throw UsageError("initial_lr must be positive");
  if (l2_coeff < 0.0) throw UsageError("l2_coeff must be non-negative");
  if (!(clip_norm > 0.0 && clip_value > 0.0)) throw UsageError("clip thresholds must be positive");
  if (train_rounds < 0) throw UsageError("train_rounds must be >= 0");
  if (weight_decay < 0.0) throw UsageError("weight_decay must be non-negative");
  if (!(scheduler.factor > 0.0 && scheduler.factor < 1.0)) throw UsageError("scheduler factor must lie in (0, 1)");
  if (scheduler.patience < 1) throw UsageError("scheduler patience must be >= 1");
  if (!(scheduler.min_lr > 0.0)) throw UsageError("scheduler min_lr must be positive");
  if (seeds.empty()) throw UsageError("at least one seed is required");
}

double f1_score(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw UsageError("predictions and labels differ in length");
  Confusion c;
  c.add(predictions, labels);
  return c.f1();
}

int rounds_for_size(int n) {
  if (n < 1) throw UsageError("graph size must be >= 1");
  return (6 * n + 4) / 5;
}

EvalMetrics evaluate(const Model& model, std::span<const Graph> graphs, int rounds) {
  Confusion c;
  for (const auto& g : graphs) {
    auto result = model.forward(g, rounds);
    c.add(argmax_rows(result.logits), g.labels());
  }
  return {c.accuracy(), c.f1(), 0.0, c.total};
}

EvalMetrics validation_metrics(const Model& model, std::span<const Graph> graphs, int rounds,
                               std::span<const double> class_weights, double l2_coeff) {
  Confusion c;
  double loss = 0.0;
  for (const auto& g : graphs) {
    auto result = model.forward(g, rounds);
    loss += weighted_cross_entropy(result.logits, g.labels(), class_weights).loss +
            l2_state_loss(result.final_state, l2_coeff).loss;
    c.add(argmax_rows(result.logits), g.labels());
  }
  EvalMetrics m{c.accuracy(), c.f1(), 0.0, c.total};
  m.loss = graphs.empty() ? 0.0 : loss / static_cast<double>(graphs.size());
  return m;
}

TrainResult train(const ModelConfig& model_config, const TrainConfig& train_config, Task task, std::uint64_t seed,
                  std::span<const Graph> train_set, std::span<const Graph> validation_set,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  train_config.validate();
  if (train_set.empty() || validation_set.empty()) throw UsageError("training and validation sets must be non-empty");
  check_schema(model_config, train_set);
  check_schema(model_config, validation_set);

  const auto weights = class_weights(train_set);
  Model model = Model::initialized(model_config, derive_seed(seed, kInitStream));
  Rng rng(derive_seed(seed, kTrainStream));
  OptimizerState optimizer = make_optimizer_state(model.parameters(), train_config.initial_lr);
  const AdamHyper adam{0.9, 0.999, 1e-8, train_config.weight_decay};

  TrainResult result;
  auto snapshot = [&](int epoch, double loss) {
    result.best = Checkpoint{model_config, task, seed, epoch, loss, model.parameters()};
  };

  auto initial = validation_metrics(model, validation_set, train_config.train_rounds, weights, train_config.l2_coeff);
  snapshot(0, initial.loss);
  EpochRecord first{0, 0.0, initial.loss, initial.accuracy, optimizer.lr, initial.loss};
  result.history.push_back(first);
  if (on_epoch) on_epoch(first);

  std::vector<int> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= train_config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double train_loss = 0.0;
    for (int index : order) {
      const Graph& g = train_set[index];
      auto step = model.loss_and_gradient(g, train_config.train_rounds, g.labels(), weights, train_config.l2_coeff,
                                          true, &rng);
      if (!std::isfinite(step.total_loss) || !step.gradient.all_finite()) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", training graph " +
                                std::to_string(index),
                            epoch, index);
      }
      clip_gradients(step.gradient, train_config.clip_norm, train_config.clip_value);
      adam_step(model.parameters(), step.gradient, optimizer, adam);
      train_loss += step.total_loss;
    }
    train_loss /= static_cast<double>(train_set.size());

    auto val = validation_metrics(model, validation_set, train_config.train_rounds, weights, train_config.l2_coeff);
    if (!std::isfinite(val.loss)) {
      throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch), epoch, -1);
    }
    if (val.loss < result.best.validation_loss) snapshot(epoch, val.loss);
    plateau_scheduler_step(optimizer, val.loss, train_config.scheduler);

    EpochRecord record{epoch, train_loss, val.loss, val.accuracy, optimizer.lr, result.best.validation_loss};
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return out;
}

std::vector<Graph> evaluation_graphs(Task task, int n, int count, std::uint64_t eval_seed) {
  Rng rng(derive_seed(derive_seed(eval_seed, kEvalNamespace), static_cast<std::uint64_t>(n)));
  std::vector<Graph> graphs;
  graphs.reserve(count);
  for (int i = 0; i < count; ++i) graphs.push_back(generate_graph(task, n, rng));
  return graphs;
}

std::vector<ExtrapolationRow> extrapolation_suite(std::span<const Checkpoint> checkpoints, Task task,
                                                  std::span<const int> sizes, int graphs_per_size,
                                                  std::uint64_t eval_seed, std::optional<int> rounds) {
  if (checkpoints.empty()) throw UsageError("extrapolation needs at least one checkpoint");
  if (graphs_per_size < 1) throw UsageError("graphs_per_size must be >= 1");
  for (const auto& c : checkpoints) {
    if (c.task != task) throw ConfigError("checkpoint was trained on " + std::string(task_name(c.task)));
  }
  std::vector<Model> models;
  for (const auto& c : checkpoints) models.push_back(c.model());

  std::vector<ExtrapolationRow> rows;
  for (int n : sizes) {
    ExtrapolationRow row;
    row.n = n;
    row.rounds = rounds.value_or(rounds_for_size(n));
    row.graphs = graphs_per_size;
    auto graphs = evaluation_graphs(task, n, graphs_per_size, eval_seed);
    std::vector<double> accuracies;
    for (const auto& model : models) {
      auto m = evaluate(model, graphs, row.rounds);
      accuracies.push_back(m.accuracy);
      row.f1_per_checkpoint.push_back(m.f1);
    }
    row.accuracy = mean_std(accuracies);
    row.f1 = mean_std(row.f1_per_checkpoint);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<int> default_sweep_rounds() { return {10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000}; }

std::vector<SweepPoint> stabilization_sweep(const Model& model, std::span<const Graph> graphs,
                                            std::span<const int> round_counts) {
  if (!is_recurrent(model.config().conv)) throw UsageError("round sweeps need a recurrent convolution");
  if (round_counts.empty()) return {};
  std::set<int> wanted(round_counts.begin(), round_counts.end());
  if (*wanted.begin() < 0) throw UsageError("round counts must be >= 0");
  std::vector<Confusion> confusion(wanted.size());
  for (const auto& g : graphs) {
    auto slot = confusion.begin();
    model.run_rounds(g, *wanted.rbegin(), [&](int t, const Matrix& h) {
      if (!wanted.contains(t)) return;
      (slot++)->add(argmax_rows(model.decode(h, g.features())), g.labels());
    });
  }
  std::vector<SweepPoint> points;
  auto slot = confusion.begin();
  for (int r : wanted) {
    points.push_back({r, slot->accuracy(), slot->f1()});
    ++slot;
  }
  return points;
}

SeedAggregate run_seeds(std::span<const std::uint64_t> seeds,
                        const std::function<std::vector<double>(std::uint64_t)>& protocol) {
  if (seeds.empty()) throw UsageError("run_seeds needs at least one seed");
  SeedAggregate agg;
  for (auto seed : seeds) {
    SeedRun run;
    run.seed = seed;
    try {
      run.values = protocol(seed);
      run.ok = true;
    } catch (const std::exception& e) {
      run.error = e.what();
      ++agg.failures;
    }
    agg.runs.push_back(std::move(run));
  }
  std::size_t width = 0;
  for (const auto& r : agg.runs) {
    if (r.ok) width = std::max(width, r.values.size());
  }
  for (std::size_t k = 0; k < width; ++k) {
    std::vector<double> column;
    for (const auto& r : agg.runs) {
      if (r.ok && k < r.values.size()) column.push_back(r.values[k]);
    }
    agg.stats.push_back(mean_std(column));
  }
  return agg;
}

}  // namespace rgnn
