// rgnn: generate datasets, train recurrent GNNs, and measure how they extrapolate.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "rgnn/io.hpp"
#include "rgnn/run_config.hpp"
#include "rgnn/train.hpp"

namespace fs = std::filesystem;
using namespace rgnn;

namespace {

constexpr std::uint64_t kDefaultEvalSeed = 2024;

// Every RunConfig key becomes a flag; unset flags leave the file/default value alone.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App& app, const std::vector<std::string>& keys) {
    app.add_option("--config", config_file, "flat key = value file applied before the flags")->check(CLI::ExistingFile);
    for (const auto& key : keys) {
      std::string names = "--" + key;
      if (key.find('_') != std::string::npos) {
        std::string dashed = key;
        std::replace(dashed.begin(), dashed.end(), '_', '-');
        names += ",--" + dashed;
      }
      options[key] = app.add_option(names, values[key]);
    }
  }

  RunConfig resolve() const {
    RunConfig config;
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw ConfigError("cannot open config file " + config_file);
      config = read_run_config(in, config);
    }
    for (const auto& key : run_config_keys()) {
      auto it = options.find(key);
      if (it != options.end() && it->second->count() > 0) apply_setting(config, key, values.at(key));
    }
    return config;
  }
};

std::ostream& open_output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  file.open(path, std::ios::binary);
  if (!file) throw ConfigError("cannot write " + path);
  return file;
}

void require_task(Task declared, Task actual, const std::string& what) {
  if (declared != actual) {
    throw ConfigError(what + " holds " + std::string(task_name(actual)) + " data but the run declares " +
                      std::string(task_name(declared)));
  }
}

std::vector<Graph> load_task_dataset(const std::string& path, Task task) {
  if (!fs::exists(path)) throw ConfigError("dataset " + path + " does not exist");
  auto graphs = load_dataset(path);
  if (graphs.empty()) throw ConfigError("dataset " + path + " is empty");
  for (const auto& g : graphs) require_task(task, g.task(), "dataset " + path);
  return graphs;
}

void print_class_balance(std::span<const Graph> graphs) {
  long long positive = 0, total = 0;
  for (const auto& g : graphs)
    for (int y : g.labels()) {
      positive += y;
      ++total;
    }
  std::printf("%zu graphs, %lld nodes, %.4f positive / %.4f negative\n", graphs.size(), total,
              double(positive) / double(total), double(total - positive) / double(total));
}

// ---- generate

struct GenerateArgs {
  ConfigFlags flags;
  std::string task, out;
  std::optional<int> n, count;
  std::optional<std::uint64_t> seed;
};

int run_generate(const GenerateArgs& a) {
  RunConfig config = a.flags.resolve();
  if (!a.task.empty()) apply_setting(config, "task", a.task);
  if (a.n) config.generator.graph_size = *a.n;
  if (a.count) config.generator.num_graphs = *a.count;
  if (a.seed) config.generator.seed = *a.seed;
  auto graphs = generate_dataset(config.generator);
  save_dataset(a.out, graphs);
  std::printf("wrote %s: %s, n=%d, seed=%llu\n", a.out.c_str(), std::string(task_name(config.generator.task)).c_str(),
              config.generator.graph_size, static_cast<unsigned long long>(config.generator.seed));
  print_class_balance(graphs);
  return 0;
}

// ---- train

struct TrainArgs {
  ConfigFlags flags;
  std::string data;
  std::optional<std::uint64_t> seed;
  int progress = 0;
};

int run_train(const TrainArgs& a) {
  RunConfig config = a.flags.resolve();
  if (a.seed) config.train.seeds = {*a.seed};
  config.model.validate();
  config.train.validate();

  const auto graphs = load_task_dataset(a.data, config.generator.task);
  if (graphs.front().features().cols() != config.model.in_dim) throw ConfigError("dataset feature width mismatch");
  auto [train_set, val_set] = split_dataset(graphs, config.train_fraction);

  const fs::path out = config.out_dir;
  fs::create_directories(out);
  {
    std::ostringstream manifest;
    manifest << "# resolved configuration\n";
    write_run_config(manifest, config);
    manifest << "# data\n";
    manifest << "dataset_hash = " << git_blob_hash(read_file(a.data)) << '\n';
    manifest << "dataset_graphs = " << graphs.size() << '\n';
    manifest << "train_graphs = " << train_set.size() << '\n';
    manifest << "validation_graphs = " << val_set.size() << '\n';
    write_file(out / "manifest.txt", manifest.str());
  }

  std::ostringstream summary;
  summary << "seed,status,best_epoch,validation_loss,validation_accuracy,validation_f1\n";
  auto result = run_seeds(config.train.seeds, [&](std::uint64_t seed) -> std::vector<double> {
    auto on_epoch = [&](const EpochRecord& e) {
      if (a.progress > 0 && e.epoch % a.progress == 0) {
        std::fprintf(stderr, "seed %llu epoch %d train %.5f val %.5f acc %.4f lr %.2e\n",
                     static_cast<unsigned long long>(seed), e.epoch, e.train_loss, e.validation_loss,
                     e.validation_accuracy, e.lr);
      }
    };
    auto r = train(config.model, config.train, config.generator.task, seed, train_set, val_set, on_epoch);
    const fs::path dir = out / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);
    save_checkpoint(dir / "checkpoint.txt", r.best);
    std::ostringstream history;
    write_history_csv(history, r.history);
    write_file(dir / "history.csv", history.str());
    auto m = evaluate(r.best.model(), val_set, config.train.train_rounds);
    std::printf("seed %llu: best epoch %d, validation loss %s, accuracy %.4f, f1 %.4f\n",
                static_cast<unsigned long long>(seed), r.best.epoch, format_double(r.best.validation_loss).c_str(),
                m.accuracy, m.f1);
    std::fflush(stdout);
    return {double(r.best.epoch), r.best.validation_loss, m.accuracy, m.f1};
  });
  for (const auto& run : result.runs) {
    summary << run.seed << ',' << (run.ok ? "ok" : "failed");
    if (run.ok) {
      summary << ',' << static_cast<int>(run.values[0]);
      for (std::size_t i = 1; i < run.values.size(); ++i) summary << ',' << format_double(run.values[i]);
    } else {
      summary << ",,,,";
      std::fprintf(stderr, "seed %llu failed: %s\n", static_cast<unsigned long long>(run.seed), run.error.c_str());
    }
    summary << '\n';
  }
  write_file(out / "summary.csv", summary.str());
  return result.failures == 0 ? 0 : 5;
}

// ---- eval

struct EvalArgs {
  std::string checkpoint, data;
  std::optional<int> rounds;
};

int run_eval(const EvalArgs& a) {
  Checkpoint c = load_checkpoint(a.checkpoint);
  auto graphs = load_task_dataset(a.data, c.task);
  const int rounds = a.rounds.value_or(rounds_for_size(graphs.front().num_nodes()));
  auto m = evaluate(c.model(), graphs, rounds);
  std::printf("graphs,nodes,rounds,accuracy,f1\n%zu,%lld,%d,%s,%s\n", graphs.size(), m.nodes, rounds,
              format_double(m.accuracy).c_str(), format_double(m.f1).c_str());
  return 0;
}

// ---- extrapolate

struct ExtrapolateArgs {
  std::vector<std::string> checkpoints;
  std::string task, sizes = "10,50,100,1000,10000", out;
  int graphs = 10;
  std::uint64_t eval_seed = kDefaultEvalSeed;
  std::optional<int> rounds;
};

std::vector<Checkpoint> load_checkpoints(const std::vector<std::string>& paths, std::optional<Task> declared) {
  std::vector<Checkpoint> out;
  for (const auto& p : paths) {
    if (!fs::exists(p)) throw ConfigError("checkpoint " + p + " does not exist");
    out.push_back(load_checkpoint(p));
    require_task(declared.value_or(out.front().task), out.back().task, "checkpoint " + p);
  }
  return out;
}

int run_extrapolate(const ExtrapolateArgs& a) {
  const auto sizes = parse_int_list(a.sizes);
  std::optional<Task> declared;
  if (!a.task.empty()) declared = parse_task(a.task);
  auto checkpoints = load_checkpoints(a.checkpoints, declared);
  const Task task = checkpoints.front().task;
  for (int n : sizes)
    if (n >= 10000) std::fprintf(stderr, "note: n=%d with %d graphs takes a long time on one core\n", n, a.graphs);
  auto rows = extrapolation_suite(checkpoints, task, sizes, a.graphs, a.eval_seed, a.rounds);
  std::ofstream file;
  write_extrapolation_csv(open_output(a.out, file), rows);
  return 0;
}

// ---- sweep-rounds

struct SweepArgs {
  std::string checkpoint, rounds, out;
  int n = 10, graphs = 10;
  std::uint64_t eval_seed = kDefaultEvalSeed;
};

int run_sweep(const SweepArgs& a) {
  auto c = load_checkpoints({a.checkpoint}, std::nullopt).front();
  const auto counts = a.rounds.empty() ? default_sweep_rounds() : parse_int_list(a.rounds);
  auto graphs = evaluation_graphs(c.task, a.n, a.graphs, a.eval_seed);
  auto points = stabilization_sweep(c.model(), graphs, counts);
  std::ofstream file;
  write_sweep_csv(open_output(a.out, file), points);
  return 0;
}

// ---- trace

struct TraceArgs {
  std::string checkpoint, data, out_dir = "trace", frames;
  int index = 0;
  std::optional<int> n, rounds;
  std::uint64_t seed = 1;
};

int run_trace(const TraceArgs& a) {
  auto c = load_checkpoints({a.checkpoint}, std::nullopt).front();
  Graph g = [&] {
    if (!a.data.empty()) {
      auto graphs = load_task_dataset(a.data, c.task);
      if (a.index < 0 || a.index >= static_cast<int>(graphs.size())) throw UsageError("graph index out of range");
      return graphs[a.index];
    }
    Rng rng(a.seed);
    return generate_graph(c.task, a.n.value_or(10), rng);
  }();
  const int rounds = a.rounds.value_or(rounds_for_size(g.num_nodes()));
  Model model = c.model();
  auto result = model.forward(g, rounds, false, nullptr, true);

  std::vector<int> frames;
  if (a.frames.empty()) {
    for (int r = 0; r <= model.effective_rounds(rounds); ++r) frames.push_back(r);
  } else {
    frames = parse_int_list(a.frames);
  }
  const fs::path out = a.out_dir;
  fs::create_directories(out);
  std::ostringstream trace;
  write_trace_jsonl(trace, result.trace);
  write_file(out / "trace.jsonl", trace.str());
  for (int r : frames) {
    if (r < 0 || r >= static_cast<int>(result.trace.size())) throw UsageError("frame " + std::to_string(r) + " not traced");
    std::ostringstream dot;
    write_dot_frame(dot, g, result.trace[r].predictions, r);
    char name[32];
    std::snprintf(name, sizeof name, "round_%05d.dot", r);
    write_file(out / name, dot.str());
  }
  const auto& last = result.trace.back().predictions;
  const auto truth = oracle_labels(g);
  int wrong = 0;
  for (std::size_t v = 0; v < last.size(); ++v) wrong += last[v] != truth[v];
  std::printf("%d rounds, %zu frames, final predictions differ from the oracle on %d of %d nodes\n", rounds,
              frames.size(), wrong, g.num_nodes());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrent graph neural networks that learn graph algorithms and extrapolate to larger graphs"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "write a JSON-lines dataset");
  gen.flags.attach(*generate, {});
  generate->add_option("--task", gen.task, "path_finding, prefix_sum or distance");
  generate->add_option("--n", gen.n, "nodes per graph");
  generate->add_option("--count", gen.count, "number of graphs");
  generate->add_option("--seed", gen.seed, "generator seed");
  generate->add_option("--out", gen.out, "output file")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train one model per seed; writes checkpoints, histories and a manifest");
  tr.flags.attach(*train_cmd, run_config_keys());
  train_cmd->add_option("--data", tr.data, "training dataset (split into train/validation)")->required();
  train_cmd->add_option("--seed", tr.seed, "train only this seed");
  train_cmd->add_option("--progress", tr.progress, "print every k-th epoch to stderr");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "node accuracy and F1 of a checkpoint on a dataset");
  eval->add_option("--checkpoint", ev.checkpoint)->required();
  eval->add_option("--data", ev.data)->required();
  eval->add_option("--rounds", ev.rounds, "defaults to ceil(1.2 n)");

  ExtrapolateArgs ex;
  auto* extrapolate = app.add_subcommand("extrapolate", "F1 and accuracy on larger graphs, mean and std over checkpoints");
  extrapolate->add_option("--checkpoint", ex.checkpoints, "one or more checkpoints")->required();
  extrapolate->add_option("--task", ex.task, "fail unless every checkpoint was trained on this task");
  extrapolate->add_option("--sizes", ex.sizes, "comma-separated graph sizes");
  extrapolate->add_option("--graphs", ex.graphs, "graphs per size");
  extrapolate->add_option("--seed", ex.eval_seed, "evaluation graph seed");
  extrapolate->add_option("--rounds", ex.rounds, "fixed round count instead of ceil(1.2 n)");
  extrapolate->add_option("--out", ex.out, "CSV file (stdout if omitted)");

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep-rounds", "accuracy as a function of executed rounds");
  sweep->add_option("--checkpoint", sw.checkpoint)->required();
  sweep->add_option("--rounds", sw.rounds, "comma-separated round counts");
  sweep->add_option("--n", sw.n, "graph size");
  sweep->add_option("--graphs", sw.graphs, "number of graphs");
  sweep->add_option("--seed", sw.eval_seed, "evaluation graph seed");
  sweep->add_option("--out", sw.out, "CSV file (stdout if omitted)");

  TraceArgs tc;
  auto* trace = app.add_subcommand("trace", "per-round predictions as JSON lines and DOT frames");
  trace->add_option("--checkpoint", tc.checkpoint)->required();
  trace->add_option("--data", tc.data, "dataset to take the graph from");
  trace->add_option("--index", tc.index, "graph index within --data");
  trace->add_option("--n", tc.n, "size of a freshly generated graph when --data is absent");
  trace->add_option("--seed", tc.seed, "seed for the generated graph");
  trace->add_option("--rounds", tc.rounds, "defaults to ceil(1.2 n)");
  trace->add_option("--frames", tc.frames, "rounds to draw (all by default)");
  trace->add_option("--out-dir", tc.out_dir);

  try {
    app.parse(argc, argv);
    if (*generate) return run_generate(gen);
    if (*train_cmd) return run_train(tr);
    if (*eval) return run_eval(ev);
    if (*extrapolate) return run_extrapolate(ex);
    if (*sweep) return run_sweep(sw);
    if (*trace) return run_trace(tc);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 3;
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << '\n';
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
