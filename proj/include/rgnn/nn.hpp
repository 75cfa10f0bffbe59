#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rgnn/common.hpp"

namespace rgnn {

/// Ordered, named collection of learnable tensors. Biases are stored as 1 x k matrices.
/// Iteration order is registration order and never changes, which fixes the layout
/// of gradients, optimizer moments and checkpoints.
class ParameterSet {
 public:
  using Id = std::size_t;

  struct Entry {
    std::string name;
    Matrix value;
    bool is_bias = false;
  };

  Id add_weight(std::string name, int rows, int cols);
  Id add_bias(std::string name, int cols);

  Matrix& operator[](Id id) { return entries_[id].value; }
  const Matrix& operator[](Id id) const { return entries_[id].value; }
  const Entry& entry(Id id) const { return entries_[id]; }
  std::optional<Id> find(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

  /// Same names and shapes, all values zero.
  ParameterSet zeros_like() const;
  void set_zero();
  double squared_norm() const;
  bool all_finite() const;

  friend bool operator==(const ParameterSet& a, const ParameterSet& b);

 private:
  std::vector<Entry> entries_;
};

/// x * w^T. Every output row is accumulated in the same order, so results never depend on row position.
Matrix linear(const Matrix& x, const Matrix& w);

/// Weights uniform in +-sqrt(6 / (fan_in + fan_out)) (fan_in = cols, fan_out = rows); biases zero.
void init_parameters(ParameterSet& params, Rng& rng);

struct MlpSpec {
  int in_dim = 1;
  int out_dim = 1;
  int hidden_factor = 4;  // hidden width = hidden_factor * in_dim
  double dropout = 0.0;

  int hidden_dim() const { return hidden_factor * in_dim; }
};

struct MlpCache {
  Matrix input;
  Matrix pre;           // hidden pre-activation
  Matrix hidden;        // relu(pre), after dropout
  Matrix dropout_scale; // empty when dropout was not applied
};

/// One-hidden-layer perceptron, y = W2 drop(relu(W1 x + b1)) + b2 applied rowwise.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const MlpSpec& spec, ParameterSet& params, const std::string& prefix);

  const MlpSpec& spec() const { return spec_; }

  /// Dropout is active only when training; it then needs rng. Fills cache when non-null.
  Matrix forward(const ParameterSet& params, const Matrix& x, bool training, Rng* rng, MlpCache* cache) const;

  /// Accumulates parameter gradients into grads and returns d(loss)/d(input).
  Matrix backward(const ParameterSet& params, const MlpCache& cache, const Matrix& grad_out,
                  ParameterSet& grads) const;

 private:
  MlpSpec spec_;
  ParameterSet::Id w1_ = 0, b1_ = 0, w2_ = 0, b2_ = 0;
};

struct GruCache {
  Matrix input, state;
  Matrix reset, update, candidate;
  Matrix hidden_candidate;  // U_n h + b_hn
};

/// Gated recurrent unit with the reset gate applied to the hidden-to-candidate term:
///   r = sigma(W_r x + U_r h + b_r)
///   z = sigma(W_z x + U_z h + b_z)
///   n = tanh(W_n x + b_in + r * (U_n h + b_hn))
///   h' = (1 - z) * n + z * h
class GruCell {
 public:
  GruCell() = default;
  GruCell(int dim, ParameterSet& params, const std::string& prefix);

  int dim() const { return dim_; }
  ParameterSet::Id update_bias() const { return b_z_; }

  Matrix forward(const ParameterSet& params, const Matrix& input, const Matrix& state, GruCache* cache) const;

  /// Returns (d input, d state).
  std::pair<Matrix, Matrix> backward(const ParameterSet& params, const GruCache& cache, const Matrix& grad_out,
                                     ParameterSet& grads) const;

 private:
  int dim_ = 0;
  ParameterSet::Id w_r_ = 0, w_z_ = 0, w_n_ = 0;
  ParameterSet::Id u_r_ = 0, u_z_ = 0, u_n_ = 0;
  ParameterSet::Id b_r_ = 0, b_z_ = 0, b_in_ = 0, b_hn_ = 0;
};

struct LossResult {
  double loss = 0.0;
  Matrix grad;
};

/// (1/n) sum_v weights[y_v] * -log softmax(logits_v)[y_v].
LossResult weighted_cross_entropy(const Matrix& logits, std::span<const int> labels, std::span<const double> weights);

/// coefficient * (1/n) * sum_v |h_v|^2.
LossResult l2_state_loss(const Matrix& states, double coefficient);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // coupled L2 added to the gradient; off by default
};

struct PlateauConfig {
  double factor = 0.7;
  int patience = 20;
  double min_lr = 1e-5;
};

struct OptimizerState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  long long step = 0;
  double lr = 4e-4;
  double best_loss = 0.0;
  bool has_best = false;
  int epochs_since_improvement = 0;
};

OptimizerState make_optimizer_state(const ParameterSet& params, double initial_lr);

void adam_step(ParameterSet& params, const ParameterSet& grads, OptimizerState& state, const AdamHyper& hyper = {});

/// Counts epochs without strict improvement; after `patience` of them the learning rate is
/// multiplied by `factor` (floored at min_lr) and the counter restarts.
void plateau_scheduler_step(OptimizerState& state, double validation_loss, const PlateauConfig& config = {});

/// Clamps every entry to [-max_value, max_value], then rescales so the global L2 norm is <= max_norm.
void clip_gradients(ParameterSet& grads, double max_norm, double max_value);

}  // namespace rgnn
