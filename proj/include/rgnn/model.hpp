#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "rgnn/graph.hpp"
#include "rgnn/nn.hpp"

namespace rgnn {

enum class ConvType { RecGIN, RecGINE, RecGRU, RecGRUE, BaselineGIN };

std::string_view conv_name(ConvType conv);
/// Accepts "recgin", "recgin_e", "recgru", "recgru_e", "baseline_gin" (and "gin" for the baseline).
ConvType parse_conv(std::string_view name);
bool is_recurrent(ConvType conv);

struct ModelConfig {
  ConvType conv = ConvType::RecGRUE;
  int in_dim = 1;
  int embed_dim = 6;
  int hidden_factor = 4;
  double dropout = 0.2;
  double gin_epsilon = 0.0;
  int out_classes = 2;
  int baseline_layers = 10;
  bool input_skip = true;           // concatenate x to the state before every recurrent application
  bool gru_state_from_skip = true;  // GRU state input is the skip output z (false: raw h^t)
  bool decoder_sees_input = false;  // decoder reads h^T || x instead of h^T

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ConvCache {
  Matrix edge_input;  // [z_receiver || z_sender] per directed edge; empty without an edge MLP
  MlpCache edge_mlp;
  MlpCache node_mlp;
  GruCache gru;
};

/// One round of message passing. Messages are Theta(z_v || z_w) with an edge MLP, z_w without;
/// they are summed per receiver.
///   GIN: h'_v = Theta_1((1 + eps) z_v + m_v)
///   GRU: h'_v = GRU(m_v, state_v)
class GraphConv {
 public:
  GraphConv() = default;
  GraphConv(bool gru, bool edge_mlp, const ModelConfig& config, ParameterSet& params, const std::string& prefix);

  bool uses_gru() const { return gru_; }
  bool has_edge_mlp() const { return edge_mlp_; }

  /// Sum of incoming messages per node, m_v.
  Matrix aggregate(const ParameterSet& params, const Graph& g, const Matrix& z, bool training, Rng* rng,
                   ConvCache* cache) const;

  /// `state` is only read by the GRU variant.
  Matrix forward(const ParameterSet& params, const Graph& g, const Matrix& z, const Matrix& state, bool training,
                 Rng* rng, ConvCache* cache) const;

  /// Returns (d z, d state); d state is empty for GIN.
  std::pair<Matrix, Matrix> backward(const ParameterSet& params, const Graph& g, const ConvCache& cache,
                                     const Matrix& grad_out, ParameterSet& grads) const;

 private:
  Matrix aggregate_backward(const ParameterSet& params, const Graph& g, const ConvCache& cache,
                            const Matrix& grad_messages, ParameterSet& grads) const;

  bool gru_ = false;
  bool edge_mlp_ = false;
  int dim_ = 0;
  double epsilon_ = 0.0;
  Mlp edge_;
  Mlp node_;
  GruCell cell_;
};

struct StepCache {
  MlpCache skip;
  ConvCache conv;
};

/// Input skip (MLP over x || h^t) followed by a graph convolution.
class RecurrentBlock {
 public:
  RecurrentBlock() = default;
  RecurrentBlock(const ModelConfig& config, bool gin_edge_mlp, ParameterSet& params, const std::string& prefix);

  const GraphConv& conv() const { return conv_; }

  Matrix forward(const ParameterSet& params, const Graph& g, const Matrix& x, const Matrix& h, bool training,
                 Rng* rng, StepCache* cache) const;

  /// Returns d h^t.
  Matrix backward(const ParameterSet& params, const Graph& g, const StepCache& cache, const Matrix& grad_out,
                  ParameterSet& grads) const;

 private:
  Mlp skip_;
  GraphConv conv_;
  bool input_skip_ = true;
  bool state_from_skip_ = true;
  int dim_ = 0;
};

struct RoundTrace {
  int round = 0;
  Matrix logits;
  std::vector<int> predictions;
  double state_rms = 0.0;  // sqrt(mean_v |h_v|^2)
};

struct ForwardResult {
  Matrix logits;
  Matrix final_state;
  std::vector<RoundTrace> trace;  // rounds + 1 entries when requested
};

struct LossGradient {
  double total_loss = 0.0;
  double cross_entropy = 0.0;
  double l2_loss = 0.0;
  Matrix logits;
  ParameterSet gradient;
};

/// Encoder MLP, weight-shared recurrent block (or a fixed stack of distinct blocks for the
/// GIN baseline), and decoder MLP.
class Model {
 public:
  /// Registers all parameter slots with zero values.
  explicit Model(const ModelConfig& config);
  Model(const ModelConfig& config, ParameterSet params);

  /// Glorot-uniform weights, zero biases, drawn from a seed.
  static Model initialized(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const ParameterSet& parameters() const { return params_; }
  ParameterSet& parameters() { return params_; }
  const RecurrentBlock& block(int layer) const { return blocks_.at(layer); }

  /// Number of block applications a call with `rounds` performs (fixed for the baseline).
  int effective_rounds(int rounds) const;

  Matrix encode(const Matrix& features, bool training = false, Rng* rng = nullptr, MlpCache* cache = nullptr) const;
  Matrix recurrent_step(const Graph& g, const Matrix& h, int round, bool training = false, Rng* rng = nullptr,
                        StepCache* cache = nullptr) const;
  Matrix decode(const Matrix& h, const Matrix& features, bool training = false, Rng* rng = nullptr,
                MlpCache* cache = nullptr) const;

  ForwardResult forward(const Graph& g, int rounds, bool training = false, Rng* rng = nullptr,
                        bool trace = false) const;

  /// Inference-mode rounds; `observer(t, h^t)` is invoked for t = 0..rounds.
  void run_rounds(const Graph& g, int rounds, const std::function<void(int, const Matrix&)>& observer) const;

  /// Weighted cross-entropy on decode(h^T) plus the L2 state loss on h^T, with exact gradients
  /// through every unrolled round.
  LossGradient loss_and_gradient(const Graph& g, int rounds, std::span<const int> labels,
                                 std::span<const double> class_weights, double l2_coeff, bool training = false,
                                 Rng* rng = nullptr) const;

 private:
  void build();

  ModelConfig config_;
  ParameterSet params_;
  Mlp encoder_;
  std::vector<RecurrentBlock> blocks_;
  Mlp decoder_;
};

std::vector<int> argmax_rows(const Matrix& logits);

}  // namespace rgnn
