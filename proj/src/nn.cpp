#include "rgnn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rgnn {

ParameterSet::Id ParameterSet::add_weight(std::string name, int rows, int cols) {
  entries_.push_back({std::move(name), Matrix::Zero(rows, cols), false});
  return entries_.size() - 1;
}

ParameterSet::Id ParameterSet::add_bias(std::string name, int cols) {
  entries_.push_back({std::move(name), Matrix::Zero(1, cols), true});
  return entries_.size() - 1;
}

std::optional<ParameterSet::Id> ParameterSet::find(std::string_view name) const {
  for (Id i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t total = 0;
  for (const auto& e : entries_) total += static_cast<std::size_t>(e.value.size());
  return total;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out = *this;
  out.set_zero();
  return out;
}

void ParameterSet::set_zero() {
  for (auto& e : entries_) e.value.setZero();
}

double ParameterSet::squared_norm() const {
  double total = 0.0;
  for (const auto& e : entries_) total += e.value.squaredNorm();
  return total;
}

bool ParameterSet::all_finite() const {
  return std::all_of(entries_.begin(), entries_.end(), [](const Entry& e) { return e.value.allFinite(); });
}

bool operator==(const ParameterSet& a, const ParameterSet& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto& x = a.entries_[i];
    const auto& y = b.entries_[i];
    if (x.name != y.name || x.is_bias != y.is_bias || x.value.rows() != y.value.rows() ||
        x.value.cols() != y.value.cols() || x.value != y.value) {
      return false;
    }
  }
  return true;
}

void init_parameters(ParameterSet& params, Rng& rng) {
  for (auto& e : params) {
    if (e.is_bias) {
      e.value.setZero();
      continue;
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(e.value.rows() + e.value.cols()));
    for (Eigen::Index i = 0; i < e.value.size(); ++i) e.value.data()[i] = rng.uniform(-bound, bound);
  }
}

// ---------------------------------------------------------------------------------------------
// Mlp

Mlp::Mlp(const MlpSpec& spec, ParameterSet& params, const std::string& prefix) : spec_(spec) {
  if (spec.in_dim < 1 || spec.out_dim < 1 || spec.hidden_factor < 1) throw UsageError("invalid MLP dimensions");
  if (!(spec.dropout >= 0.0 && spec.dropout < 1.0)) throw UsageError("dropout must lie in [0, 1)");
  w1_ = params.add_weight(prefix + ".w1", spec.hidden_dim(), spec.in_dim);
  b1_ = params.add_bias(prefix + ".b1", spec.hidden_dim());
  w2_ = params.add_weight(prefix + ".w2", spec.out_dim, spec.hidden_dim());
  b2_ = params.add_bias(prefix + ".b2", spec.out_dim);
}

Matrix linear(const Matrix& x, const Matrix& w) {
  if (x.cols() != w.cols()) throw UsageError("linear: inner dimensions differ");
  const Eigen::Index n = x.rows(), in = w.cols(), out = w.rows();
  const Matrix wt = w.transpose();
  Matrix result = Matrix::Zero(n, out);
  for (Eigen::Index i = 0; i < n; ++i) {
    double* dst = result.row(i).data();
    const double* src = x.row(i).data();
    for (Eigen::Index k = 0; k < in; ++k) {
      const double a = src[k];
      const double* wk = wt.row(k).data();
      for (Eigen::Index j = 0; j < out; ++j) dst[j] += a * wk[j];
    }
  }
  return result;
}

Matrix Mlp::forward(const ParameterSet& params, const Matrix& x, bool training, Rng* rng, MlpCache* cache) const {
  if (x.cols() != spec_.in_dim) {
    throw UsageError("MLP expects " + std::to_string(spec_.in_dim) + " input columns, got " +
                     std::to_string(x.cols()));
  }
  Matrix pre = linear(x, params[w1_]);
  pre.rowwise() += params[b1_].row(0);
  Matrix hidden = pre.cwiseMax(0.0);

  Matrix scale;
  if (training && spec_.dropout > 0.0) {
    if (rng == nullptr) throw UsageError("dropout in training mode needs a random source");
    const double keep = 1.0 - spec_.dropout;
    scale.resize(hidden.rows(), hidden.cols());
    for (Eigen::Index i = 0; i < scale.size(); ++i) scale.data()[i] = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    hidden.array() *= scale.array();
  }

  Matrix out = linear(hidden, params[w2_]);
  out.rowwise() += params[b2_].row(0);

  if (cache != nullptr) {
    cache->input = x;
    cache->pre = std::move(pre);
    cache->hidden = std::move(hidden);
    cache->dropout_scale = std::move(scale);
  }
  return out;
}

Matrix Mlp::backward(const ParameterSet& params, const MlpCache& cache, const Matrix& grad_out,
                     ParameterSet& grads) const {
  grads[w2_].noalias() += grad_out.transpose() * cache.hidden;
  grads[b2_] += grad_out.colwise().sum();

  Matrix grad_pre(grad_out.rows(), spec_.hidden_dim());
  grad_pre.noalias() = grad_out * params[w2_];
  grad_pre.array() *= (cache.pre.array() > 0.0).cast<double>();
  if (cache.dropout_scale.size() != 0) grad_pre.array() *= cache.dropout_scale.array();

  grads[w1_].noalias() += grad_pre.transpose() * cache.input;
  grads[b1_] += grad_pre.colwise().sum();

  Matrix grad_in(grad_out.rows(), spec_.in_dim);
  grad_in.noalias() = grad_pre * params[w1_];
  return grad_in;
}

// ---------------------------------------------------------------------------------------------
// GruCell

namespace {

Matrix sigmoid(const Matrix& x) {
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

}  // namespace

GruCell::GruCell(int dim, ParameterSet& params, const std::string& prefix) : dim_(dim) {
  if (dim < 1) throw UsageError("GRU dimension must be positive");
  w_r_ = params.add_weight(prefix + ".w_r", dim, dim);
  w_z_ = params.add_weight(prefix + ".w_z", dim, dim);
  w_n_ = params.add_weight(prefix + ".w_n", dim, dim);
  u_r_ = params.add_weight(prefix + ".u_r", dim, dim);
  u_z_ = params.add_weight(prefix + ".u_z", dim, dim);
  u_n_ = params.add_weight(prefix + ".u_n", dim, dim);
  b_r_ = params.add_bias(prefix + ".b_r", dim);
  b_z_ = params.add_bias(prefix + ".b_z", dim);
  b_in_ = params.add_bias(prefix + ".b_in", dim);
  b_hn_ = params.add_bias(prefix + ".b_hn", dim);
}

Matrix GruCell::forward(const ParameterSet& params, const Matrix& input, const Matrix& state, GruCache* cache) const {
  if (input.cols() != dim_ || state.cols() != dim_ || input.rows() != state.rows()) {
    throw UsageError("GRU input and state must both be n x " + std::to_string(dim_));
  }
  Matrix r_pre = linear(input, params[w_r_]) + linear(state, params[u_r_]);
  r_pre.rowwise() += params[b_r_].row(0);
  Matrix z_pre = linear(input, params[w_z_]) + linear(state, params[u_z_]);
  z_pre.rowwise() += params[b_z_].row(0);
  Matrix reset = sigmoid(r_pre);
  Matrix update = sigmoid(z_pre);

  Matrix hidden_candidate = linear(state, params[u_n_]);
  hidden_candidate.rowwise() += params[b_hn_].row(0);
  Matrix n_pre = linear(input, params[w_n_]);
  n_pre.rowwise() += params[b_in_].row(0);
  n_pre.array() += reset.array() * hidden_candidate.array();
  Matrix candidate = n_pre.unaryExpr([](double v) { return std::tanh(v); });

  Matrix out = ((1.0 - update.array()) * candidate.array() + update.array() * state.array()).matrix();
  if (cache != nullptr) {
    cache->input = input;
    cache->state = state;
    cache->reset = std::move(reset);
    cache->update = std::move(update);
    cache->candidate = std::move(candidate);
    cache->hidden_candidate = std::move(hidden_candidate);
  }
  return out;
}

std::pair<Matrix, Matrix> GruCell::backward(const ParameterSet& params, const GruCache& c, const Matrix& grad_out,
                                            ParameterSet& grads) const {
  const auto& g = grad_out.array();
  Matrix grad_state = (g * c.update.array()).matrix();
  Matrix grad_input = Matrix::Zero(c.input.rows(), dim_);

  // Candidate branch.
  Matrix d_n_pre = (g * (1.0 - c.update.array()) * (1.0 - c.candidate.array().square())).matrix();
  grads[w_n_].noalias() += d_n_pre.transpose() * c.input;
  grads[b_in_] += d_n_pre.colwise().sum();
  grad_input.noalias() += d_n_pre * params[w_n_];
  Matrix d_hidden_candidate = (d_n_pre.array() * c.reset.array()).matrix();
  grads[u_n_].noalias() += d_hidden_candidate.transpose() * c.state;
  grads[b_hn_] += d_hidden_candidate.colwise().sum();
  grad_state.noalias() += d_hidden_candidate * params[u_n_];

  // Update gate.
  Matrix d_z_pre = (g * (c.state.array() - c.candidate.array()) * c.update.array() * (1.0 - c.update.array())).matrix();
  grads[w_z_].noalias() += d_z_pre.transpose() * c.input;
  grads[u_z_].noalias() += d_z_pre.transpose() * c.state;
  grads[b_z_] += d_z_pre.colwise().sum();
  grad_input.noalias() += d_z_pre * params[w_z_];
  grad_state.noalias() += d_z_pre * params[u_z_];

  // Reset gate.
  Matrix d_r_pre =
      (d_n_pre.array() * c.hidden_candidate.array() * c.reset.array() * (1.0 - c.reset.array())).matrix();
  grads[w_r_].noalias() += d_r_pre.transpose() * c.input;
  grads[u_r_].noalias() += d_r_pre.transpose() * c.state;
  grads[b_r_] += d_r_pre.colwise().sum();
  grad_input.noalias() += d_r_pre * params[w_r_];
  grad_state.noalias() += d_r_pre * params[u_r_];

  return {std::move(grad_input), std::move(grad_state)};
}

// ---------------------------------------------------------------------------------------------
// Losses

LossResult weighted_cross_entropy(const Matrix& logits, std::span<const int> labels, std::span<const double> weights) {
  const auto n = logits.rows();
  const auto classes = logits.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n) throw UsageError("one label per logit row required");
  if (static_cast<Eigen::Index>(weights.size()) != classes) throw UsageError("one weight per class required");
  for (double w : weights) {
    if (!(w > 0.0)) throw UsageError("class weights must be strictly positive");
  }
  LossResult result;
  result.grad = Matrix::Zero(n, classes);
  if (n == 0) return result;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index v = 0; v < n; ++v) {
    const int y = labels[v];
    if (y < 0 || y >= classes) throw UsageError("label " + std::to_string(y) + " outside the class range");
    const double shift = logits.row(v).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(v).array() - shift).exp();
    const double sum = e.sum();
    const double log_prob = logits(v, y) - shift - std::log(sum);
    result.loss -= weights[y] * log_prob * inv_n;
    result.grad.row(v) = e / sum * (weights[y] * inv_n);
    result.grad(v, y) -= weights[y] * inv_n;
  }
  return result;
}

LossResult l2_state_loss(const Matrix& states, double coefficient) {
  if (coefficient < 0.0) throw UsageError("L2 coefficient must be non-negative");
  LossResult result;
  if (states.rows() == 0) {
    result.grad = Matrix::Zero(0, states.cols());
    return result;
  }
  const double inv_n = 1.0 / static_cast<double>(states.rows());
  result.loss = coefficient * inv_n * states.squaredNorm();
  result.grad = states * (2.0 * coefficient * inv_n);
  return result;
}

// ---------------------------------------------------------------------------------------------
// Optimization

OptimizerState make_optimizer_state(const ParameterSet& params, double initial_lr) {
  OptimizerState state;
  state.lr = initial_lr;
  for (const auto& e : params) {
    state.first_moment.push_back(Matrix::Zero(e.value.rows(), e.value.cols()));
    state.second_moment.push_back(Matrix::Zero(e.value.rows(), e.value.cols()));
  }
  return state;
}

void adam_step(ParameterSet& params, const ParameterSet& grads, OptimizerState& state, const AdamHyper& hyper) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size()) {
    throw UsageError("parameter, gradient and moment layouts differ");
  }
  ++state.step;
  const double correction1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& theta = params[i];
    Matrix g = grads[i];
    if (hyper.weight_decay != 0.0) g += hyper.weight_decay * theta;
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    m = hyper.beta1 * m + (1.0 - hyper.beta1) * g;
    v = hyper.beta2 * v + (1.0 - hyper.beta2) * g.cwiseProduct(g);
    theta.array() -= state.lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + hyper.epsilon);
  }
}

void plateau_scheduler_step(OptimizerState& state, double validation_loss, const PlateauConfig& config) {
  if (!std::isfinite(validation_loss)) throw UsageError("validation loss must be finite");
  if (!state.has_best || validation_loss < state.best_loss) {
    state.best_loss = validation_loss;
    state.has_best = true;
    state.epochs_since_improvement = 0;
    return;
  }
  if (++state.epochs_since_improvement >= config.patience) {
    state.lr = std::max(state.lr * config.factor, config.min_lr);
    state.epochs_since_improvement = 0;
  }
}

void clip_gradients(ParameterSet& grads, double max_norm, double max_value) {
  if (!(max_norm > 0.0 && max_value > 0.0)) throw UsageError("clipping thresholds must be positive");
  for (auto& e : grads) e.value = e.value.cwiseMax(-max_value).cwiseMin(max_value);
  const double norm = std::sqrt(grads.squared_norm());
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& e : grads) e.value *= scale;
  }
}

}  // namespace rgnn
