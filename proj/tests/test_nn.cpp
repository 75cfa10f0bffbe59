#include "doctest.h"

#include <cmath>

#include "rgnn/nn.hpp"
#include "support/oracles.hpp"

using namespace rgnn;
using rgnn::testing::check_input_gradient;
using rgnn::testing::check_parameter_gradient;
using rgnn::testing::random_matrix;

namespace {

void randomize(ParameterSet& params, Rng& rng) {
  for (auto& e : params)
    for (Eigen::Index i = 0; i < e.value.size(); ++i) e.value.data()[i] = rng.uniform(-1.0, 1.0);
}

// Scalar probe so that every output coordinate carries a distinct weight into the loss.
double probe(const Matrix& out, const Matrix& weights) { return (out.array() * weights.array()).sum(); }

}  // namespace

TEST_CASE("mlp_forward") {
  ParameterSet params;
  Mlp mlp({3, 2, 2, 0.0}, params, "m");
  CHECK(params.size() == 4);
  CHECK(params.scalar_count() == 6 * 3 + 6 + 2 * 6 + 2);

  SUBCASE("zero parameters give zero output") {
    Matrix x = Matrix::Ones(4, 3);
    CHECK(mlp.forward(params, x, false, nullptr, nullptr).isZero());
  }

  SUBCASE("identity layers pass non-negative input through") {
    ParameterSet p;
    Mlp id({3, 3, 1, 0.0}, p, "id");
    p[*p.find("id.w1")] = Matrix::Identity(3, 3);
    p[*p.find("id.w2")] = Matrix::Identity(3, 3);
    Matrix x(2, 3);
    x << 0.5, 0.0, 2.0, 1.0, 3.0, 0.25;
    CHECK(id.forward(p, x, false, nullptr, nullptr) == x);
  }

  SUBCASE("gradients match finite differences") {
    Rng rng(1);
    randomize(params, rng);
    Matrix x = random_matrix(5, 3, rng);
    Matrix w = random_matrix(5, 2, rng);
    MlpCache cache;
    Matrix out = mlp.forward(params, x, false, nullptr, &cache);
    ParameterSet grads = params.zeros_like();
    Matrix grad_x = mlp.backward(params, cache, w, grads);
    auto loss = [&] { return probe(mlp.forward(params, x, false, nullptr, nullptr), w); };
    CHECK(check_parameter_gradient(params, grads, loss).worst < 1e-4);
    CHECK(check_input_gradient(x, grad_x, loss).worst < 1e-4);
  }

  SUBCASE("dropout gradients replay the recorded mask") {
    ParameterSet p;
    Mlp drop({3, 2, 4, 0.5}, p, "d");
    Rng rng(2);
    randomize(p, rng);
    Matrix x = random_matrix(6, 3, rng);
    Matrix w = random_matrix(6, 2, rng);
    MlpCache cache;
    Rng mask_rng(99);
    drop.forward(p, x, true, &mask_rng, &cache);
    CHECK((cache.dropout_scale.array() == 0.0).any());
    ParameterSet grads = p.zeros_like();
    drop.backward(p, cache, w, grads);
    auto loss = [&] {
      Rng same(99);
      return probe(drop.forward(p, x, true, &same, nullptr), w);
    };
    CHECK(check_parameter_gradient(p, grads, loss).worst < 1e-4);
  }

  SUBCASE("dropout is inactive outside training") {
    ParameterSet p;
    Mlp drop({3, 2, 4, 0.5}, p, "d");
    Rng rng(3);
    randomize(p, rng);
    Matrix x = random_matrix(6, 3, rng);
    MlpCache cache;
    Matrix a = drop.forward(p, x, false, nullptr, &cache);
    CHECK(cache.dropout_scale.size() == 0);
    CHECK(a == drop.forward(p, x, false, nullptr, nullptr));
  }

  CHECK_THROWS_AS(mlp.forward(params, Matrix::Zero(2, 4), false, nullptr, nullptr), UsageError);
  CHECK_THROWS_AS(Mlp({3, 2, 0, 0.0}, params, "bad"), UsageError);
}

TEST_CASE("gru_cell_forward") {
  ParameterSet params;
  GruCell cell(4, params, "g");
  CHECK(params.size() == 10);

  SUBCASE("all-zero parameters and state stay at zero") {
    Matrix x = Matrix::Ones(3, 4);
    CHECK(cell.forward(params, x, Matrix::Zero(3, 4), nullptr).isZero());
  }

  SUBCASE("saturated update gate carries the state") {
    Rng rng(4);
    randomize(params, rng);
    params[cell.update_bias()].setConstant(1e3);
    Matrix x = random_matrix(3, 4, rng);
    Matrix h = random_matrix(3, 4, rng);
    CHECK((cell.forward(params, x, h, nullptr) - h).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("gradients for input, state and parameters match finite differences") {
    Rng rng(5);
    randomize(params, rng);
    Matrix x = random_matrix(3, 4, rng);
    Matrix h = random_matrix(3, 4, rng);
    Matrix w = random_matrix(3, 4, rng);
    GruCache cache;
    cell.forward(params, x, h, &cache);
    ParameterSet grads = params.zeros_like();
    auto [grad_x, grad_h] = cell.backward(params, cache, w, grads);
    auto loss = [&] { return probe(cell.forward(params, x, h, nullptr), w); };
    CHECK(check_parameter_gradient(params, grads, loss).worst < 1e-4);
    CHECK(check_input_gradient(x, grad_x, loss).worst < 1e-4);
    CHECK(check_input_gradient(h, grad_h, loss).worst < 1e-4);
  }

  CHECK_THROWS_AS(cell.forward(params, Matrix::Zero(3, 4), Matrix::Zero(2, 4), nullptr), UsageError);
  CHECK_THROWS_AS(cell.forward(params, Matrix::Zero(3, 3), Matrix::Zero(3, 3), nullptr), UsageError);
}

TEST_CASE("weighted_cross_entropy") {
  const std::vector<double> unit{1.0, 1.0};

  SUBCASE("uniform logits") {
    auto r = weighted_cross_entropy(Matrix::Zero(3, 2), std::vector<int>{0, 1, 1}, unit);
    CHECK(r.loss == doctest::Approx(std::log(2.0)));
  }
  SUBCASE("large correct margin drives the loss to zero") {
    Matrix logits(2, 2);
    logits << 50.0, -50.0, -50.0, 50.0;
    auto r = weighted_cross_entropy(logits, std::vector<int>{0, 1}, unit);
    CHECK(r.loss >= 0.0);
    CHECK(r.loss < 1e-40);
  }
  SUBCASE("class weights scale their nodes linearly") {
    Rng rng(6);
    Matrix logits = random_matrix(6, 2, rng, 2.0);
    std::vector<int> labels{0, 1, 1, 0, 1, 0};
    const std::vector<double> heavy{1.0, 2.0};
    const std::vector<double> zero_ones{1.0, 1e-300};
    const double base = weighted_cross_entropy(logits, labels, unit).loss;
    const double class0 = weighted_cross_entropy(logits, labels, zero_ones).loss;
    const double class1 = base - class0;
    CHECK(weighted_cross_entropy(logits, labels, heavy).loss == doctest::Approx(class0 + 2.0 * class1));
  }
  SUBCASE("gradient matches finite differences") {
    Rng rng(7);
    Matrix logits = random_matrix(5, 2, rng, 3.0);
    std::vector<int> labels{1, 0, 0, 1, 1};
    const std::vector<double> weights{0.7, 1.9};
    auto r = weighted_cross_entropy(logits, labels, weights);
    auto loss = [&] { return weighted_cross_entropy(logits, labels, weights).loss; };
    CHECK(check_input_gradient(logits, r.grad, loss).worst < 1e-4);
  }
  CHECK_THROWS_AS(weighted_cross_entropy(Matrix::Zero(1, 2), std::vector<int>{2}, unit), UsageError);
  CHECK_THROWS_AS(weighted_cross_entropy(Matrix::Zero(1, 2), std::vector<int>{0}, std::vector<double>{1.0, 0.0}),
                  UsageError);
}

TEST_CASE("l2_state_loss") {
  CHECK(l2_state_loss(Matrix::Zero(4, 6), 1e-4).loss == 0.0);
  Matrix h(1, 2);
  h << 3.0, 4.0;
  CHECK(l2_state_loss(h, 1.0).loss == doctest::Approx(25.0));

  Rng rng(8);
  Matrix states = random_matrix(7, 6, rng, 5.0);
  auto r = l2_state_loss(states, 1e-4);
  CHECK(r.loss >= 0.0);
  auto loss = [&] { return l2_state_loss(states, 1e-4).loss; };
  CHECK(check_input_gradient(states, r.grad, loss, 1e-4).worst < 1e-4);
  CHECK_THROWS_AS(l2_state_loss(states, -1.0), UsageError);
}

TEST_CASE("adam_step") {
  ParameterSet params;
  auto id = params.add_weight("theta", 1, 1);
  params[id](0, 0) = 0.5;

  SUBCASE("zero gradient leaves parameters unchanged") {
    auto state = make_optimizer_state(params, 4e-4);
    adam_step(params, params.zeros_like(), state);
    CHECK(params[id](0, 0) == 0.5);
  }
  SUBCASE("first step moves by about lr") {
    for (double g : {-3.0, 1e-3, 250.0}) {
      ParameterSet p = params;
      ParameterSet grad = p.zeros_like();
      grad[id](0, 0) = g;
      auto state = make_optimizer_state(p, 4e-4);
      adam_step(p, grad, state);
      CHECK(std::abs(p[id](0, 0) - 0.5) == doctest::Approx(4e-4).epsilon(1e-4));
    }
  }
  SUBCASE("constant unit gradient for 100 steps matches a scalar simulation") {
    auto state = make_optimizer_state(params, 4e-4);
    ParameterSet grad = params.zeros_like();
    grad[id](0, 0) = 1.0;
    // Scalar reference of the bias-corrected update.
    double theta = 0.5, m = 0.0, v = 0.0;
    double previous = params[id](0, 0);
    for (int t = 1; t <= 100; ++t) {
      adam_step(params, grad, state);
      m = 0.9 * m + 0.1;
      v = 0.999 * v + 0.001;
      theta -= 4e-4 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
      CHECK(params[id](0, 0) < previous);
      previous = params[id](0, 0);
    }
    CHECK(params[id](0, 0) == doctest::Approx(theta).epsilon(1e-12));
  }
  SUBCASE("weight decay adds to the gradient") {
    auto state = make_optimizer_state(params, 4e-4);
    adam_step(params, params.zeros_like(), state, {0.9, 0.999, 1e-8, 1e-5});
    CHECK(params[id](0, 0) < 0.5);
  }
}

TEST_CASE("plateau_scheduler_step") {
  ParameterSet params;
  params.add_weight("w", 1, 1);

  SUBCASE("improving losses keep the rate") {
    auto s = make_optimizer_state(params, 4e-4);
    for (int e = 0; e < 100; ++e) plateau_scheduler_step(s, 1.0 / (e + 1));
    CHECK(s.lr == 4e-4);
  }
  SUBCASE("twenty stale epochs reduce by 0.7") {
    auto s = make_optimizer_state(params, 4e-4);
    plateau_scheduler_step(s, 1.0);
    for (int e = 0; e < 19; ++e) plateau_scheduler_step(s, 1.0);
    CHECK(s.lr == 4e-4);
    plateau_scheduler_step(s, 1.0);
    CHECK(s.lr == doctest::Approx(2.8e-4));
    CHECK(s.epochs_since_improvement == 0);
  }
  SUBCASE("decay floors at the minimum rate") {
    auto s = make_optimizer_state(params, 4e-4);
    for (int e = 0; e < 5000; ++e) plateau_scheduler_step(s, 1.0);
    CHECK(s.lr == 1e-5);
  }
  SUBCASE("non-finite loss") {
    auto s = make_optimizer_state(params, 4e-4);
    CHECK_THROWS_AS(plateau_scheduler_step(s, std::nan("")), UsageError);
  }
}

TEST_CASE("clip_gradients") {
  ParameterSet g;
  auto id = g.add_weight("g", 1, 2);

  g[id] << 0.3, -0.4;
  clip_gradients(g, 5.0, 1.0);
  CHECK(g[id](0, 0) == 0.3);
  CHECK(g[id](0, 1) == -0.4);

  g[id] << 10.0, 0.0;
  clip_gradients(g, 5.0, 1.0);
  CHECK(g[id](0, 0) == 1.0);

  g[id] << 3.0, 4.0;
  clip_gradients(g, 1.0, 100.0);
  CHECK(g[id](0, 0) == doctest::Approx(0.6));
  CHECK(g[id](0, 1) == doctest::Approx(0.8));

  CHECK_THROWS_AS(clip_gradients(g, 0.0, 1.0), UsageError);
}

TEST_CASE("init_parameters") {
  auto make = [] {
    ParameterSet p;
    p.add_weight("w", 6, 6);
    p.add_bias("b", 6);
    p.add_weight("v", 2, 24);
    return p;
  };
  ParameterSet a = make(), b = make();
  Rng ra(42), rb(42);
  init_parameters(a, ra);
  init_parameters(b, rb);
  CHECK(a == b);
  CHECK(a[1].isZero());
  const double bound = std::sqrt(6.0 / 12.0);
  CHECK(a[0].cwiseAbs().maxCoeff() <= bound);

  // 10,000 independent draws of the 6x6 weight.
  double sum = 0.0;
  Rng rng(1);
  for (int s = 0; s < 10000; ++s) {
    ParameterSet p = make();
    init_parameters(p, rng);
    sum += p[0].sum();
  }
  CHECK(std::abs(sum / (10000.0 * 36.0)) < 0.02);
}
