#include <doctest.h>

#include <cmath>
#include <limits>

#include "../common/gradcheck.hpp"
#include "nibbler/gvf.hpp"
#include "nibbler/selection.hpp"
#include "oracles.hpp"

using namespace nibbler;

namespace {

SparseFeatures unit(std::size_t dim, std::uint32_t j) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  x[j] = 1.0;
  return BaseFeatures::from_dense(x).sparse;
}

SparseFeatures zeros(std::size_t dim) { return BaseFeatures::from_dense(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))).sparse; }

FullFeatures full(const Eigen::VectorXd& base, const Eigen::VectorXd& nonlinear) {
  return FullFeatures{BaseFeatures::from_dense(base).sparse, nonlinear};
}

}  // namespace

TEST_CASE("discounted return oracle") {
  CHECK(oracle::discounted_return(std::vector<double>(50, 0.0), 0.9) == 0.0);
  CHECK(oracle::discounted_return(std::vector<double>(2000, 1.0), 0.5) == doctest::Approx(2.0));
  std::vector<double> c(100, 0.0);
  c[2] = 1.0;
  CHECK(oracle::discounted_return(c, 0.99) == doctest::Approx(0.99 * 0.99));
}

TEST_CASE("linear_td0 examples") {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(3);
  const double delta = linear_td0(w, unit(3, 1), zeros(3), 1.0, 0.99, 0.1);
  CHECK(delta == 1.0);
  CHECK(w[1] == doctest::Approx(0.1));
  CHECK(w[0] == 0.0);
  Eigen::VectorXd w2 = Eigen::VectorXd::Constant(3, 0.3);
  linear_td0(w2, zeros(3), unit(3, 0), 0.0, 0.9, 0.5);
  CHECK((w2.array() == 0.3).all());
}

TEST_CASE("linear_td0 on a two-state chain reaches the TD fixed point") {
  // States alternate deterministically with probability 0.7 of switching.
  Eigen::MatrixXd P(2, 2);
  P << 0.3, 0.7, 0.7, 0.3;
  Eigen::MatrixXd Phi(2, 2);
  Phi << 1, 0, 1, 1;  // non-tabular features
  Eigen::VectorXd r(2);
  r << 1.0, -0.5;  // expected cumulant on leaving each state
  const double gamma = 0.8;
  const Eigen::VectorXd d = oracle::stationary_distribution(P);
  const Eigen::VectorXd expect = oracle::projected_td_fixed_point(P, Phi, r, gamma, d);

  Rng rng(3);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(2), avg = Eigen::VectorXd::Zero(2);
  int s = 0;
  const int steps = 4000000;
  for (int t = 0; t < steps; ++t) {
    const int next = rng.bernoulli(P(s, 1 - s)) ? 1 - s : s;
    linear_td0(w, BaseFeatures::from_dense(Phi.row(s).transpose()).sparse,
               BaseFeatures::from_dense(Phi.row(next).transpose()).sparse, r[s], gamma, 0.0005);
    if (t >= steps / 2) avg += w;
    s = next;
  }
  avg /= steps / 2;
  CHECK((avg - expect).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("linear reward model examples") {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(4);
  linear_reward_model_update(w, unit(4, 2), 0.0, 0.1);
  CHECK(w.isZero());
  for (int i = 0; i < 500; ++i) linear_reward_model_update(w, unit(4, 2), 1.0, 0.05);
  CHECK(w[2] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(w[0] == 0.0);
}

TEST_CASE("main QV update examples") {
  const std::size_t m = 4;
  auto main = LinearVQ::zeros(m + 2, kNumActions);
  Eigen::VectorXd e0 = Eigen::VectorXd::Zero(m);
  e0[0] = 1.0;
  auto x = full(e0, Eigen::VectorXd::Zero(2));
  auto xn = full(Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(2));
  const OptimizerParams opt{0.01, 0.99};

  auto before = main;
  main_qv_update(main, x, xn, 0.0, 1, 0.99, opt);
  CHECK(main.w_v == before.w_v);
  CHECK(main.w_q[1] == before.w_q[1]);

  main_qv_update(main, x, xn, 1.0, 1, 0.99, opt);
  CHECK(main.w_v[0] == doctest::Approx(0.01 * (1 - 0.99)));
  CHECK(main.w_q[1][0] == doctest::Approx(0.01 * (1 - 0.99)));
  CHECK(main.w_q[0].isZero());
  CHECK(main.w_q[2].isZero());
  CHECK(main.vel_q[0].isZero());
}

TEST_CASE("main QV update only reaches the taken action's weights") {
  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    auto main = LinearVQ::zeros(10, kNumActions);
    for (auto& w : main.w_q) w = gradcheck::random_vector(10, rng);
    auto x = full(gradcheck::random_bits(6, rng), gradcheck::random_vector(4, rng));
    auto xn = full(gradcheck::random_bits(6, rng), gradcheck::random_vector(4, rng));
    const int a = static_cast<int>(rng.below(3));
    auto before = main;
    main_qv_update(main, x, xn, 1.0, a, 0.9, {0.1, 0.5});
    for (int b = 0; b < kNumActions; ++b)
      if (b != a) CHECK(main.w_q[static_cast<std::size_t>(b)] == before.w_q[static_cast<std::size_t>(b)]);
  }
}

TEST_CASE("QV with zero discount learns the same values as the reward model") {
  Rng rng(6);
  const std::size_t m = 5;
  auto main = LinearVQ::zeros(m, kNumActions);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  for (int t = 0; t < 50000; ++t) {
    const auto xb = gradcheck::random_bits(static_cast<Eigen::Index>(m), rng, 0.5);
    const double r = 0.7 * xb[1] - 0.4 * xb[3] + rng.uniform(-0.1, 0.1);
    const auto sparse = BaseFeatures::from_dense(xb).sparse;
    linear_reward_model_update(w, sparse, r, 0.01);
    main_qv_update(main, FullFeatures{sparse, Eigen::VectorXd()}, FullFeatures{sparse, Eigen::VectorXd()}, r, 0, 0.0,
                   {0.01, 0.0});
  }
  CHECK((main.w_v - w).cwiseAbs().maxCoeff() < 0.05);
  CHECK(w[1] == doctest::Approx(0.7).epsilon(0.05));
}

TEST_CASE("answer update with zero heads and zero cumulant changes nothing") {
  Rng rng(8);
  const SlotShape shape{12, 5, 6, kNumActions, 0.99, 0.0};
  auto slot = make_slot(3, shape, IndexOrder::identity(12), rng);
  auto before = slot;
  auto x = BaseFeatures::from_dense(gradcheck::random_bits(12, rng));
  Eigen::VectorXd next = gradcheck::random_bits(12, rng);
  next[3] = 0.0;
  answer_update(slot, x, BaseFeatures::from_dense(next), 1, {0.01, 0.9});
  CHECK(slot.net.weights == before.net.weights);
  CHECK(slot.heads.w_v == before.heads.w_v);
  CHECK(slot.heads.w_q[1] == before.heads.w_q[1]);
}

TEST_CASE("answer value approaches the constant-cumulant return monotonically") {
  Rng rng(9);
  const std::size_t m = 6;
  const SlotShape shape{m, 3, 8, kNumActions, 0.99, 0.0};
  auto slot = make_slot(0, shape, IndexOrder::identity(m), rng);
  Eigen::VectorXd xv = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(m));
  const auto x = BaseFeatures::from_dense(xv);
  DenseActivations act;
  Eigen::VectorXd scratch;
  double last = 0.0;
  for (int t = 1; t <= 20000; ++t) {
    answer_update(slot, x, x, 0, {1e-4, 0.9});
    if (t % 1000 == 0) {
      slot.features(x, scratch, act);
      const double v = slot.heads.value(act.hidden);
      CHECK(v > last);
      CHECK(v < 100.0);
      last = v;
    }
  }
  CHECK(last > 90.0);
}

TEST_CASE("analytic gradients match finite differences") {
  Rng rng(10);
  double worst = 0.0;
  for (int i = 0; i < 30; ++i) {
    worst = std::max(worst, gradcheck::main_qv_check(rng));
    worst = std::max(worst, gradcheck::answer_check(rng));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("epsilon greedy") {
  Rng rng(11);
  SUBCASE("epsilon 1 is uniform") {
    int counts[3] = {0, 0, 0};
    Eigen::Vector3d q(0, 10, 0);
    for (int i = 0; i < 10000; ++i) ++counts[epsilon_greedy(q, 1.0, rng)];
    const double sd = std::sqrt(10000 * (1.0 / 3) * (2.0 / 3));
    for (int c : counts) CHECK(std::abs(c - 10000.0 / 3) < 3 * sd);
  }
  SUBCASE("greedy picks the maximum") {
    Eigen::Vector3d q(0, 5, 1);
    for (int i = 0; i < 1000; ++i) REQUIRE(epsilon_greedy(q, 0.0, rng) == 1);
  }
  SUBCASE("ties split evenly") {
    Eigen::Vector3d q(2, 2, 0);
    int counts[3] = {0, 0, 0};
    for (int i = 0; i < 10000; ++i) ++counts[epsilon_greedy(q, 0.0, rng)];
    CHECK(counts[2] == 0);
    CHECK(std::abs(counts[0] - 5000) < 3 * 50);
  }
  SUBCASE("non-finite values still give a valid action") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const Eigen::Vector3d q : {Eigen::Vector3d(nan, nan, nan), Eigen::Vector3d(nan, 1, 0)}) {
      for (int i = 0; i < 100; ++i) {
        const int a = epsilon_greedy(q, 0.0, rng);
        REQUIRE((a >= 0 && a < 3));
      }
    }
  }
  SUBCASE("positive scaling leaves the action distribution unchanged") {
    Eigen::Vector3d q(0.3, -1, 0.29);
    Rng a(5), b(5);
    for (int i = 0; i < 1000; ++i) REQUIRE(epsilon_greedy(q, 0.1, a) == epsilon_greedy(q * 7.5, 0.1, b));
  }
}
