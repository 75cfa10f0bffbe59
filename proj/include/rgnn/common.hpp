#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace rgnn {

/// Row-major; row v is node v (or directed edge e).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Caller passed arguments that violate an operation's preconditions.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A graph does not satisfy a structural requirement (e.g. connectivity).
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatch between persisted artifacts (dataset, checkpoint) and the requested configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training hit a non-finite loss. Carries where it happened.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int epoch, int graph_index)
      : std::runtime_error(what), epoch_(epoch), graph_index_(graph_index) {}
  int epoch() const { return epoch_; }
  int graph_index() const { return graph_index_; }

 private:
  int epoch_;
  int graph_index_;
};

/// Seeded random source. All randomness in the library flows through one of these,
/// so identical seeds reproduce identical datasets, initializations and dropout masks.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }

  /// Uniform integer in [0, bound).
  int index(int bound) { return std::uniform_int_distribution<int>(0, bound - 1)(engine_); }

  bool bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Mixes a base seed with a stream tag (splitmix64 finalizer) to obtain independent seed namespaces.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace rgnn
