#include "rgnn/model.hpp"

#include <algorithm>
#include <cmath>

namespace rgnn {

std::string_view conv_name(ConvType conv) {
  switch (conv) {
    case ConvType::RecGIN:
      return "recgin";
    case ConvType::RecGINE:
      return "recgin_e";
    case ConvType::RecGRU:
      return "recgru";
    case ConvType::RecGRUE:
      return "recgru_e";
    case ConvType::BaselineGIN:
      return "baseline_gin";
  }
  return "unknown";
}

ConvType parse_conv(std::string_view name) {
  if (name == "recgin") return ConvType::RecGIN;
  if (name == "recgin_e") return ConvType::RecGINE;
  if (name == "recgru") return ConvType::RecGRU;
  if (name == "recgru_e") return ConvType::RecGRUE;
  if (name == "baseline_gin" || name == "gin") return ConvType::BaselineGIN;
  throw UsageError("unknown convolution '" + std::string(name) +
                   "' (expected recgin, recgin_e, recgru, recgru_e or baseline_gin)");
}

bool is_recurrent(ConvType conv) { return conv != ConvType::BaselineGIN; }

void ModelConfig::validate() const {
  if (in_dim < 1) throw UsageError("in_dim must be >= 1");
  if (embed_dim < 1) throw UsageError("embed_dim must be >= 1");
  if (hidden_factor < 1) throw UsageError("hidden_factor must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("dropout must lie in [0, 1)");
  if (out_classes < 2) throw UsageError("out_classes must be >= 2");
  if (baseline_layers < 1) throw UsageError("baseline_layers must be >= 1");
}

namespace {

// Column-wise sum of the selected rows, each column added in ascending value order. The result
// depends only on the multiset of rows, never on their order.
class SortedRowSum {
 public:
  explicit SortedRowSum(Eigen::Index cols) : cols_(cols) {}

  template <typename RowAt>
  void operator()(int count, RowAt row_at, double* out) {
    if (count == 0) {
      std::fill(out, out + cols_, 0.0);
      return;
    }
    if (count <= 2) {
      const double* a = row_at(0);
      if (count == 1) {
        std::copy(a, a + cols_, out);
      } else {
        const double* b = row_at(1);
        for (Eigen::Index c = 0; c < cols_; ++c) out[c] = a[c] + b[c];
      }
      return;
    }
    scratch_.resize(count);
    for (Eigen::Index c = 0; c < cols_; ++c) {
      for (int i = 0; i < count; ++i) scratch_[i] = row_at(i)[c];
      std::sort(scratch_.begin(), scratch_.end());
      double sum = scratch_[0];
      for (int i = 1; i < count; ++i) sum += scratch_[i];
      out[c] = sum;
    }
  }

 private:
  Eigen::Index cols_;
  std::vector<double> scratch_;
};

}  // namespace

// ---------------------------------------------------------------------------------------------
// GraphConv

GraphConv::GraphConv(bool gru, bool edge_mlp, const ModelConfig& config, ParameterSet& params,
                     const std::string& prefix)
    : gru_(gru), edge_mlp_(edge_mlp), dim_(config.embed_dim), epsilon_(config.gin_epsilon) {
  const int d = config.embed_dim;
  if (edge_mlp_) edge_ = Mlp({2 * d, d, config.hidden_factor, config.dropout}, params, prefix + ".edge");
  if (gru_) {
    cell_ = GruCell(d, params, prefix + ".gru");
  } else {
    node_ = Mlp({d, d, config.hidden_factor, config.dropout}, params, prefix + ".node");
  }
}

Matrix GraphConv::aggregate(const ParameterSet& params, const Graph& g, const Matrix& z, bool training, Rng* rng,
                            ConvCache* cache) const {
  const int n = g.num_nodes();
  const auto offsets = g.offsets();
  const auto adjacency = g.adjacency();
  Matrix out(n, dim_);
  SortedRowSum sum(dim_);

  if (!edge_mlp_) {
    for (int v = 0; v < n; ++v) {
      const int begin = offsets[v];
      sum(offsets[v + 1] - begin, [&](int i) { return z.row(adjacency[begin + i]).data(); }, out.row(v).data());
    }
    return out;
  }

  Matrix edge_input(g.num_directed_edges(), 2 * dim_);
  for (int v = 0; v < n; ++v) {
    for (int e = offsets[v]; e < offsets[v + 1]; ++e) {
      edge_input.row(e).head(dim_) = z.row(v);
      edge_input.row(e).tail(dim_) = z.row(adjacency[e]);
    }
  }
  Matrix messages = edge_.forward(params, edge_input, training, rng, cache ? &cache->edge_mlp : nullptr);
  for (int v = 0; v < n; ++v) {
    const int begin = offsets[v];
    sum(offsets[v + 1] - begin, [&](int i) { return messages.row(begin + i).data(); }, out.row(v).data());
  }
  if (cache != nullptr) cache->edge_input = std::move(edge_input);
  return out;
}

Matrix GraphConv::forward(const ParameterSet& params, const Graph& g, const Matrix& z, const Matrix& state,
                          bool training, Rng* rng, ConvCache* cache) const {
  if (z.rows() != g.num_nodes() || z.cols() != dim_) throw UsageError("convolution input must be n x embed_dim");
  Matrix messages = aggregate(params, g, z, training, rng, cache);
  if (gru_) return cell_.forward(params, messages, state, cache ? &cache->gru : nullptr);
  Matrix combined = (1.0 + epsilon_) * z + messages;
  return node_.forward(params, combined, training, rng, cache ? &cache->node_mlp : nullptr);
}

Matrix GraphConv::aggregate_backward(const ParameterSet& params, const Graph& g, const ConvCache& cache,
                                     const Matrix& grad_messages, ParameterSet& grads) const {
  const int n = g.num_nodes();
  const auto offsets = g.offsets();
  const auto adjacency = g.adjacency();
  Matrix grad_z = Matrix::Zero(n, dim_);
  if (!edge_mlp_) {
    for (int v = 0; v < n; ++v) {
      for (int e = offsets[v]; e < offsets[v + 1]; ++e) grad_z.row(adjacency[e]) += grad_messages.row(v);
    }
    return grad_z;
  }
  Matrix grad_edge(g.num_directed_edges(), dim_);
  for (int v = 0; v < n; ++v) {
    for (int e = offsets[v]; e < offsets[v + 1]; ++e) grad_edge.row(e) = grad_messages.row(v);
  }
  Matrix grad_edge_input = edge_.backward(params, cache.edge_mlp, grad_edge, grads);
  for (int v = 0; v < n; ++v) {
    for (int e = offsets[v]; e < offsets[v + 1]; ++e) {
      grad_z.row(v) += grad_edge_input.row(e).head(dim_);
      grad_z.row(adjacency[e]) += grad_edge_input.row(e).tail(dim_);
    }
  }
  return grad_z;
}

std::pair<Matrix, Matrix> GraphConv::backward(const ParameterSet& params, const Graph& g, const ConvCache& cache,
                                              const Matrix& grad_out, ParameterSet& grads) const {
  if (gru_) {
    auto [grad_messages, grad_state] = cell_.backward(params, cache.gru, grad_out, grads);
    Matrix grad_z = aggregate_backward(params, g, cache, grad_messages, grads);
    return {std::move(grad_z), std::move(grad_state)};
  }
  Matrix grad_combined = node_.backward(params, cache.node_mlp, grad_out, grads);
  Matrix grad_z = aggregate_backward(params, g, cache, grad_combined, grads);
  grad_z += (1.0 + epsilon_) * grad_combined;
  return {std::move(grad_z), Matrix()};
}

// ---------------------------------------------------------------------------------------------
// RecurrentBlock

RecurrentBlock::RecurrentBlock(const ModelConfig& config, bool gin_edge_mlp, ParameterSet& params,
                               const std::string& prefix)
    : input_skip_(config.input_skip), state_from_skip_(config.gru_state_from_skip), dim_(config.embed_dim) {
  const int skip_in = config.input_skip ? config.in_dim + config.embed_dim : config.embed_dim;
  skip_ = Mlp({skip_in, config.embed_dim, config.hidden_factor, config.dropout}, params, prefix + ".skip");
  switch (config.conv) {
    case ConvType::RecGIN:
      conv_ = GraphConv(false, false, config, params, prefix + ".conv");
      break;
    case ConvType::RecGINE:
      conv_ = GraphConv(false, true, config, params, prefix + ".conv");
      break;
    case ConvType::RecGRU:
      conv_ = GraphConv(true, false, config, params, prefix + ".conv");
      break;
    case ConvType::RecGRUE:
      conv_ = GraphConv(true, true, config, params, prefix + ".conv");
      break;
    case ConvType::BaselineGIN:
      conv_ = GraphConv(false, gin_edge_mlp, config, params, prefix + ".conv");
      break;
  }
}

Matrix RecurrentBlock::forward(const ParameterSet& params, const Graph& g, const Matrix& x, const Matrix& h,
                               bool training, Rng* rng, StepCache* cache) const {
  if (h.rows() != g.num_nodes() || h.cols() != dim_) throw UsageError("state must be n x embed_dim");
  Matrix skip_input;
  if (input_skip_) {
    if (x.rows() != h.rows()) throw UsageError("features and state row counts differ");
    skip_input.resize(h.rows(), x.cols() + h.cols());
    skip_input << x, h;
  } else {
    skip_input = h;
  }
  Matrix z = skip_.forward(params, skip_input, training, rng, cache ? &cache->skip : nullptr);
  const Matrix& state = state_from_skip_ ? z : h;
  return conv_.forward(params, g, z, state, training, rng, cache ? &cache->conv : nullptr);
}

Matrix RecurrentBlock::backward(const ParameterSet& params, const Graph& g, const StepCache& cache,
                                const Matrix& grad_out, ParameterSet& grads) const {
  auto [grad_z, grad_state] = conv_.backward(params, g, cache.conv, grad_out, grads);
  const bool gru_state = conv_.uses_gru();
  if (gru_state && state_from_skip_) grad_z += grad_state;
  Matrix grad_skip_input = skip_.backward(params, cache.skip, grad_z, grads);
  Matrix grad_h = input_skip_ ? Matrix(grad_skip_input.rightCols(dim_)) : grad_skip_input;
  if (gru_state && !state_from_skip_) grad_h += grad_state;
  return grad_h;
}

// ---------------------------------------------------------------------------------------------
// Model

Model::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  build();
}

Model::Model(const ModelConfig& config, ParameterSet params) : Model(config) {
  if (params.size() != params_.size()) throw ConfigError("parameter layout does not match the model config");
  auto it = params.begin();
  for (const auto& slot : params_) {
    if (it->name != slot.name || it->value.rows() != slot.value.rows() || it->value.cols() != slot.value.cols()) {
      throw ConfigError("parameter '" + it->name + "' does not match slot '" + slot.name + "'");
    }
    ++it;
  }
  params_ = std::move(params);
}

Model Model::initialized(const ModelConfig& config, std::uint64_t seed) {
  Model model(config);
  Rng rng(seed);
  init_parameters(model.params_, rng);
  return model;
}

void Model::build() {
  const int d = config_.embed_dim;
  encoder_ = Mlp({config_.in_dim, d, config_.hidden_factor, config_.dropout}, params_, "encoder");
  if (is_recurrent(config_.conv)) {
    blocks_.emplace_back(config_, false, params_, "recurrent");
  } else {
    for (int layer = 0; layer < config_.baseline_layers; ++layer) {
      blocks_.emplace_back(config_, false, params_, "layer" + std::to_string(layer));
    }
  }
  const int decoder_in = config_.decoder_sees_input ? d + config_.in_dim : d;
  decoder_ = Mlp({decoder_in, config_.out_classes, config_.hidden_factor, config_.dropout}, params_, "decoder");
}

int Model::effective_rounds(int rounds) const {
  if (rounds < 0) throw UsageError("rounds must be >= 0");
  return is_recurrent(config_.conv) ? rounds : config_.baseline_layers;
}

Matrix Model::encode(const Matrix& features, bool training, Rng* rng, MlpCache* cache) const {
  return encoder_.forward(params_, features, training, rng, cache);
}

Matrix Model::recurrent_step(const Graph& g, const Matrix& h, int round, bool training, Rng* rng,
                             StepCache* cache) const {
  const auto& block = blocks_[is_recurrent(config_.conv) ? 0 : static_cast<std::size_t>(round)];
  return block.forward(params_, g, g.features(), h, training, rng, cache);
}

Matrix Model::decode(const Matrix& h, const Matrix& features, bool training, Rng* rng, MlpCache* cache) const {
  if (!config_.decoder_sees_input) return decoder_.forward(params_, h, training, rng, cache);
  Matrix input(h.rows(), h.cols() + features.cols());
  input << h, features;
  return decoder_.forward(params_, input, training, rng, cache);
}

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(logits.rows());
  for (Eigen::Index v = 0; v < logits.rows(); ++v) {
    Eigen::Index best = 0;
    logits.row(v).maxCoeff(&best);
    out[v] = static_cast<int>(best);
  }
  return out;
}

namespace {

RoundTrace make_trace(int round, Matrix logits, const Matrix& h) {
  RoundTrace t;
  t.round = round;
  t.predictions = argmax_rows(logits);
  t.logits = std::move(logits);
  t.state_rms = h.rows() > 0 ? std::sqrt(h.squaredNorm() / static_cast<double>(h.rows())) : 0.0;
  return t;
}

}  // namespace

ForwardResult Model::forward(const Graph& g, int rounds, bool training, Rng* rng, bool trace) const {
  const int steps = effective_rounds(rounds);
  if (g.features().cols() != config_.in_dim) throw UsageError("graph feature width does not match model in_dim");
  ForwardResult result;
  Matrix h = encode(g.features(), training, rng);
  if (trace) result.trace.push_back(make_trace(0, decode(h, g.features()), h));
  for (int t = 0; t < steps; ++t) {
    h = recurrent_step(g, h, t, training, rng);
    if (trace) result.trace.push_back(make_trace(t + 1, decode(h, g.features()), h));
  }
  result.logits = decode(h, g.features(), training, rng);
  result.final_state = std::move(h);
  return result;
}

void Model::run_rounds(const Graph& g, int rounds, const std::function<void(int, const Matrix&)>& observer) const {
  const int steps = effective_rounds(rounds);
  if (g.features().cols() != config_.in_dim) throw UsageError("graph feature width does not match model in_dim");
  Matrix h = encode(g.features());
  observer(0, h);
  for (int t = 0; t < steps; ++t) {
    h = recurrent_step(g, h, t);
    observer(t + 1, h);
  }
}

LossGradient Model::loss_and_gradient(const Graph& g, int rounds, std::span<const int> labels,
                                      std::span<const double> class_weights, double l2_coeff, bool training,
                                      Rng* rng) const {
  const int steps = effective_rounds(rounds);
  if (g.features().cols() != config_.in_dim) throw UsageError("graph feature width does not match model in_dim");
  const Matrix& x = g.features();

  MlpCache encoder_cache;
  Matrix h = encode(x, training, rng, &encoder_cache);
  std::vector<StepCache> steps_cache(steps);
  for (int t = 0; t < steps; ++t) h = recurrent_step(g, h, t, training, rng, &steps_cache[t]);
  MlpCache decoder_cache;
  Matrix logits = decode(h, x, training, rng, &decoder_cache);

  auto ce = weighted_cross_entropy(logits, labels, class_weights);
  auto l2 = l2_state_loss(h, l2_coeff);

  LossGradient out;
  out.cross_entropy = ce.loss;
  out.l2_loss = l2.loss;
  out.total_loss = ce.loss + l2.loss;
  out.gradient = params_.zeros_like();

  Matrix grad_decoder_in = decoder_.backward(params_, decoder_cache, ce.grad, out.gradient);
  Matrix grad_h = grad_decoder_in.leftCols(config_.embed_dim) + l2.grad;
  for (int t = steps - 1; t >= 0; --t) {
    const auto& block = blocks_[is_recurrent(config_.conv) ? 0 : static_cast<std::size_t>(t)];
    grad_h = block.backward(params_, g, steps_cache[t], grad_h, out.gradient);
  }
  encoder_.backward(params_, encoder_cache, grad_h, out.gradient);
  out.logits = std::move(logits);
  return out;
}

}  // namespace rgnn
