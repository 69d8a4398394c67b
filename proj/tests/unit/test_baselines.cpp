#include <doctest.h>

#include <sstream>

#include "../common/gradcheck.hpp"
#include "nibbler/baselines.hpp"
#include "nibbler/multicatch.hpp"

using namespace nibbler;

TEST_CASE("baseline config defaults") {
  BaselineConfig c;
  CHECK(c.hidden_dim == 256);
  CHECK(c.alpha == 0.001);
  CHECK(c.nu == 0.99);
  CHECK(c.epsilon == 0.1);
  CHECK(c.gamma == 0.99);
  c.hidden_dim = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("zero weights and zero rewards stay zero") {
  for (auto variant : {BaselineVariant::Q, BaselineVariant::QV}) {
    BaselineConfig c;
    c.variant = variant;
    c.hidden_dim = 8;
    BaselineAgent agent(c, 56, 3);
    agent.params().trunk.weights.setZero();
    auto env = make_multicatch(1, 3);
    int a = agent.step(0.0, env.observation());
    for (int t = 0; t < 200; ++t) a = agent.step(0.0, env.step(static_cast<Action>(a)).observation);
    settle_all(agent.params().trunk, agent.params().trunk_momentum);
    CHECK(agent.params().trunk.weights.isZero());
    CHECK(agent.params().trunk.bias.isZero());
    CHECK(agent.params().q_head.isZero());
    CHECK(agent.params().v_head.isZero());
  }
}

TEST_CASE("bandit: greedy action converges to the rewarded arm") {
  for (auto variant : {BaselineVariant::Q, BaselineVariant::QV}) {
    BaselineConfig c;
    c.variant = variant;
    c.hidden_dim = 16;
    c.alpha = 0.01;
    c.gamma = 0.5;
    BaselineAgent agent(c, 4, 11);
    const BitObservation obs{1, 0, 1, 0};
    int a = agent.step(0.0, obs);
    for (int t = 0; t < 20000; ++t) a = agent.step(a == 0 ? 1.0 : 0.0, obs);
    const auto& p = agent.params();
    Eigen::VectorXd x(4);
    x << 1, 0, 1, 0;
    const Eigen::VectorXd q = p.q_head * forward(p.trunk, x).hidden;
    Eigen::Index best = 0;
    q.maxCoeff(&best);
    CHECK(best == 0);
    // Fixed point of Q(0) = 1 + gamma Q(0) under the greedy policy.
    if (variant == BaselineVariant::Q) CHECK(q[0] == doctest::Approx(2.0).epsilon(0.05));
  }
}

TEST_CASE("Q with gamma 0 regresses the immediate reward per action") {
  BaselineConfig c;
  c.hidden_dim = 16;
  c.alpha = 0.01;
  c.gamma = 0.0;
  c.epsilon = 1.0;
  BaselineAgent agent(c, 3, 5);
  const BitObservation obs{0, 1, 1};
  const double reward[kNumActions] = {0.5, -0.25, 1.0};
  int a = agent.step(0.0, obs);
  for (int t = 0; t < 30000; ++t) a = agent.step(reward[a], obs);
  Eigen::VectorXd x(3);
  x << 0, 1, 1;
  const auto& p = agent.params();
  const Eigen::VectorXd q = p.q_head * forward(p.trunk, x).hidden;
  for (int k = 0; k < kNumActions; ++k) CHECK(q[k] == doctest::Approx(reward[k]).epsilon(0.02));
}

TEST_CASE("baseline gradients match central differences") {
  Rng rng(2024);
  for (auto variant : {BaselineVariant::Q, BaselineVariant::QV}) {
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) worst = std::max(worst, gradcheck::baseline_check(rng, variant));
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("an update touches only the current transition") {
  BaselineConfig c;
  c.hidden_dim = 6;
  c.variant = BaselineVariant::QV;
  Rng rng(1);
  auto [trunk, mom] = init_dense(5, 6, rng);
  BaselineParams p{trunk, mom, Eigen::MatrixXd::Random(kNumActions, 6), Eigen::VectorXd::Random(6),
                   Eigen::MatrixXd::Zero(kNumActions, 6), Eigen::VectorXd::Zero(6)};
  Eigen::VectorXd x(5), x_next(5);
  x << 1, 0, 0, 1, 0;
  x_next << 0, 1, 0, 0, 0;
  auto g = baseline_gradients(p, BaselineVariant::QV, x, 1, 0.5, x_next, 0.9);
  // Only the taken action's row of the Q head has a gradient; no input column
  // outside x receives one.
  CHECK(g.grad_q.row(0).isZero());
  CHECK(g.grad_q.row(2).isZero());
  CHECK_FALSE(g.grad_q.row(1).isZero());
  const BaselineParams before = p;
  apply_baseline_gradients(p, g, 0.01, 0.0);
  CHECK(p.trunk.weights.col(2) == before.trunk.weights.col(2));
  CHECK(p.trunk.weights.col(1) == before.trunk.weights.col(1));
}

TEST_CASE("baseline snapshot round trip") {
  BaselineConfig c;
  c.hidden_dim = 8;
  c.variant = BaselineVariant::QV;
  auto env = make_multicatch(1, 4);
  BaselineAgent agent(c, 56, 4);
  int a = agent.step(0.0, env.observation());
  for (int t = 0; t < 300; ++t) {
    auto s = env.step(static_cast<Action>(a));
    a = agent.step(s.reward, s.observation);
  }
  std::stringstream snap;
  agent.save(snap);
  BaselineAgent other(c, 56, 99);
  other.load(snap);
  std::ostringstream x, y;
  agent.save(x);
  other.save(y);
  CHECK(x.str() == y.str());
}
