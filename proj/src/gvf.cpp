#include "nibbler/gvf.hpp"

#include <algorithm>
#include <stdexcept>

#include "nibbler/snapshot.hpp"

namespace nibbler {

double SparseFeatures::dot(const Eigen::VectorXd& w) const {
  double s = 0.0;
  for (std::size_t k = 0; k < index.size(); ++k) s += w[index[k]] * value[k];
  return s;
}

void SparseFeatures::axpy_into(Eigen::VectorXd& w, double scale) const {
  for (std::size_t k = 0; k < index.size(); ++k) w[index[k]] += scale * value[k];
}

namespace {

void sort_by_order(SparseFeatures& s, const IndexOrder* order) {
  if (!order) return;  // already ascending by index
  if (order->size() != s.dim) throw std::invalid_argument("IndexOrder size does not match feature dimension");
  std::vector<std::size_t> perm(s.index.size());
  for (std::size_t k = 0; k < perm.size(); ++k) perm[k] = k;
  std::sort(perm.begin(), perm.end(),
            [&](std::size_t a, std::size_t b) { return order->rank[s.index[a]] < order->rank[s.index[b]]; });
  std::vector<std::uint32_t> idx(perm.size());
  std::vector<double> val(perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k) {
    idx[k] = s.index[perm[k]];
    val[k] = s.value[perm[k]];
  }
  s.index = std::move(idx);
  s.value = std::move(val);
}

}  // namespace

BaseFeatures BaseFeatures::from_dense(const Eigen::VectorXd& x, const IndexOrder* order) {
  BaseFeatures f;
  f.dense = x;
  f.sparse.dim = static_cast<std::size_t>(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x[j] != 0.0) {
      f.sparse.index.push_back(static_cast<std::uint32_t>(j));
      f.sparse.value.push_back(x[j]);
    }
  }
  sort_by_order(f.sparse, order);
  return f;
}

BaseFeatures BaseFeatures::from_bits(const BitObservation& bits, const IndexOrder* order) {
  BaseFeatures f;
  f.assign_bits(bits, order);
  return f;
}

void BaseFeatures::assign_bits(const BitObservation& bits, const IndexOrder* order) {
  dense.resize(static_cast<Eigen::Index>(bits.size()));
  sparse.dim = bits.size();
  sparse.index.clear();
  sparse.value.clear();
  for (std::size_t j = 0; j < bits.size(); ++j) {
    dense[static_cast<Eigen::Index>(j)] = bits[j] ? 1.0 : 0.0;
    if (bits[j]) {
      sparse.index.push_back(static_cast<std::uint32_t>(j));
      sparse.value.push_back(1.0);
    }
  }
  sort_by_order(sparse, order);
}

LinearVQ LinearVQ::zeros(std::size_t feature_dim, int num_actions) {
  const auto n = static_cast<Eigen::Index>(feature_dim);
  LinearVQ vq;
  vq.w_v = Eigen::VectorXd::Zero(n);
  vq.vel_v = Eigen::VectorXd::Zero(n);
  vq.w_q.assign(static_cast<std::size_t>(num_actions), Eigen::VectorXd::Zero(n));
  vq.vel_q.assign(static_cast<std::size_t>(num_actions), Eigen::VectorXd::Zero(n));
  return vq;
}

bool LinearVQ::all_finite() const {
  if (!w_v.allFinite()) return false;
  for (const auto& w : w_q)
    if (!w.allFinite()) return false;
  return true;
}

namespace {

double full_dot(const Eigen::VectorXd& w, const FullFeatures& x) {
  double s = x.base.dot(w);
  if (x.nonlinear.size() > 0) s += w.tail(x.nonlinear.size()).dot(x.nonlinear);
  return s;
}

void check_full(const LinearVQ& vq, const FullFeatures& x) {
  if (x.size() != vq.feature_dim()) throw std::invalid_argument("LinearVQ: feature dimension mismatch");
}

/// co_opt with grad = scale * x for a linear learner over full features.
void co_opt_linear(Eigen::VectorXd& w, Eigen::VectorXd& vel, double scale, const FullFeatures& x,
                   const OptimizerParams& opt) {
  const auto m = static_cast<Eigen::Index>(x.base.dim);
  const double keep = 1.0 - opt.nu;
  const double step = kDescentSign * opt.alpha;
  auto base_vel = vel.head(m);
  base_vel *= opt.nu;
  for (std::size_t k = 0; k < x.base.index.size(); ++k) vel[x.base.index[k]] += keep * (scale * x.base.value[k]);
  if (x.nonlinear.size() > 0) {
    auto tail_vel = vel.tail(x.nonlinear.size());
    tail_vel = opt.nu * tail_vel + keep * (scale * x.nonlinear);
  }
  flush_small(vel);
  w += step * vel;
}

}  // namespace

double LinearVQ::value(const FullFeatures& x) const { return full_dot(w_v, x); }

double LinearVQ::action_value(const FullFeatures& x, int a) const {
  return full_dot(w_q[static_cast<std::size_t>(a)], x);
}

Eigen::VectorXd LinearVQ::action_values(const FullFeatures& x) const {
  Eigen::VectorXd q(num_actions());
  for (int a = 0; a < num_actions(); ++a) q[a] = action_value(x, a);
  return q;
}

void LinearVQ::save(std::ostream& out) const {
  SnapshotWriter w(out);
  w.tag("LinearVQ");
  w.u64(w_q.size());
  w.vec(w_v);
  for (const auto& q : w_q) w.vec(q);
  w.vec(vel_v);
  for (const auto& q : vel_q) w.vec(q);
}

void LinearVQ::load(std::istream& in) {
  SnapshotReader r(in);
  r.expect_tag("LinearVQ");
  auto z = r.u64();
  if (z > 1024) throw std::runtime_error("LinearVQ snapshot: action count out of range");
  w_v = r.vec();
  w_q.resize(z);
  for (auto& q : w_q) q = r.vec();
  vel_v = r.vec();
  vel_q.resize(z);
  for (auto& q : vel_q) q = r.vec();
  for (std::size_t a = 0; a < z; ++a)
    if (w_q[a].size() != w_v.size() || vel_q[a].size() != w_v.size())
      throw std::runtime_error("LinearVQ snapshot: inconsistent shapes");
  if (vel_v.size() != w_v.size()) throw std::runtime_error("LinearVQ snapshot: inconsistent shapes");
}

double linear_td0(Eigen::VectorXd& w, const SparseFeatures& x_t, const SparseFeatures& x_next, double cumulant,
                  double discount, double alpha) {
  const double delta = cumulant + discount * x_next.dot(w) - x_t.dot(w);
  x_t.axpy_into(w, alpha * delta);
  return delta;
}

double linear_reward_model_update(Eigen::VectorXd& w, const SparseFeatures& x_t, double reward, double alpha) {
  const double delta = reward - x_t.dot(w);
  x_t.axpy_into(w, alpha * delta);
  return delta;
}

QvTarget main_qv_loss(const LinearVQ& main, const FullFeatures& x_t, const FullFeatures& x_next, double reward,
                      int action, double discount) {
  check_full(main, x_t);
  check_full(main, x_next);
  if (action < 0 || action >= main.num_actions()) throw std::out_of_range("main_qv: action out of range");
  QvTarget t;
  t.target = reward + discount * main.value(x_next);
  t.v_error = t.target - main.value(x_t);
  t.q_error = t.target - main.action_value(x_t, action);
  return t;
}

QvTarget main_qv_update(LinearVQ& main, const FullFeatures& x_t, const FullFeatures& x_next, double reward,
                        int action, double discount, const OptimizerParams& opt) {
  QvTarget t = main_qv_loss(main, x_t, x_next, reward, action, discount);
  const auto a = static_cast<std::size_t>(action);
  // dL/dw_v = -(Y - V) x_t and dL/dw_q[a] = -(Y - Q) x_t.
  co_opt_linear(main.w_v, main.vel_v, -t.v_error, x_t, opt);
  co_opt_linear(main.w_q[a], main.vel_q[a], -t.q_error, x_t, opt);
  return t;
}

void gather(const Eigen::VectorXd& x, const std::vector<std::uint32_t>& list, Eigen::VectorXd& out) {
  out.resize(static_cast<Eigen::Index>(list.size()));
  for (std::size_t p = 0; p < list.size(); ++p) out[static_cast<Eigen::Index>(p)] = x[list[p]];
}

void QuestionSlot::features(const BaseFeatures& x, Eigen::VectorXd& scratch, DenseActivations& out) const {
  gather(x.dense, inputs.list, scratch);
  forward(net, scratch, out);
}

void QuestionSlot::settle_for(const BaseFeatures& x, Eigen::VectorXd& scratch) {
  gather(x.dense, inputs.list, scratch);
  settle_inputs(net, net_momentum, scratch);
}

void QuestionSlot::settled_features(const BaseFeatures& x, Eigen::VectorXd& scratch, DenseActivations& out) {
  gather(x.dense, inputs.list, scratch);
  settle_inputs(net, net_momentum, scratch);
  forward(net, scratch, out);
}

AnswerGradients answer_gradients(const QuestionSlot& slot, const BaseFeatures& x_t, const BaseFeatures& x_next,
                                 int action, const DenseActivations* next_act) {
  if (action < 0 || action >= slot.heads.num_actions()) throw std::out_of_range("answer: action out of range");
  const auto a = static_cast<std::size_t>(action);
  AnswerGradients g;
  g.action = action;

  DenseActivations computed_next;
  if (!next_act) {
    Eigen::VectorXd scratch;
    slot.features(x_next, scratch, computed_next);
    next_act = &computed_next;
  }
  slot.features(x_t, g.inputs_t, g.act_t);

  const double cumulant = x_next.dense[slot.question.cumulant_index];
  const Eigen::VectorXd& h = g.act_t.hidden;
  g.errors.target = cumulant + slot.question.discount * slot.heads.value(next_act->hidden);
  g.errors.v_error = g.errors.target - slot.heads.value(h);
  g.errors.q_error = g.errors.target - slot.heads.action_value(h, action);

  g.grad_v = -g.errors.v_error * h;
  g.grad_q = -g.errors.q_error * h;
  Eigen::VectorXd upstream = -g.errors.v_error * slot.heads.w_v - g.errors.q_error * slot.heads.w_q[a];
  g.dpre = pre_activation_gradient(g.act_t, upstream);
  return g;
}

QvTarget answer_update(QuestionSlot& slot, const BaseFeatures& x_t, const BaseFeatures& x_next, int action,
                       const OptimizerParams& opt, const DenseActivations* next_act) {
  Eigen::VectorXd scratch;
  slot.settle_for(x_t, scratch);
  if (!next_act) slot.settle_for(x_next, scratch);
  AnswerGradients g = answer_gradients(slot, x_t, x_next, action, next_act);
  const auto a = static_cast<std::size_t>(action);
  co_opt(slot.heads.w_v, opt.alpha, g.grad_v, slot.heads.vel_v, opt.nu);
  co_opt(slot.heads.w_q[a], opt.alpha, g.grad_q, slot.heads.vel_q[a], opt.nu);
  co_opt_layer(slot.net, slot.net_momentum, opt.alpha, opt.nu, g.inputs_t, g.dpre);
  return g.errors;
}

double answer_loss_fixed_target(const QuestionSlot& slot, const BaseFeatures& x_t, int action, double target) {
  Eigen::VectorXd scratch;
  DenseActivations act;
  slot.features(x_t, scratch, act);
  const double dv = target - slot.heads.value(act.hidden);
  const double dq = target - slot.heads.action_value(act.hidden, action);
  return 0.5 * (dv * dv + dq * dq);
}

void QuestionSlot::save(std::ostream& out) const {
  SnapshotWriter w(out);
  w.tag("QuestionSlot");
  w.u64(question.cumulant_index);
  w.f64(question.discount);
  inputs.save(out);
  save_dense(out, net, net_momentum);
  heads.save(out);
  w.vec(support);
}

void QuestionSlot::load(std::istream& in) {
  SnapshotReader r(in);
  r.expect_tag("QuestionSlot");
  question.cumulant_index = static_cast<std::uint32_t>(r.u64());
  question.discount = r.f64();
  inputs.load(in);
  load_dense(in, net, net_momentum);
  heads.load(in);
  support = r.vec();
}

int epsilon_greedy(const Eigen::VectorXd& q_values, double epsilon, Rng& rng) {
  const auto z = static_cast<std::uint64_t>(q_values.size());
  if (z == 0) throw std::invalid_argument("epsilon_greedy: no actions");
  if (rng.uniform() < epsilon) return static_cast<int>(rng.below(z));
  const double best = q_values.maxCoeff();
  int ties = 0;
  for (Eigen::Index a = 0; a < q_values.size(); ++a) ties += q_values[a] == best ? 1 : 0;
  // NaN values compare unequal to everything; act uniformly until the
  // divergence is noticed.
  if (ties == 0) return static_cast<int>(rng.below(z));
  if (ties == 1) {
    Eigen::Index arg;
    q_values.maxCoeff(&arg);
    return static_cast<int>(arg);
  }
  auto pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(ties)));
  for (Eigen::Index a = 0; a < q_values.size(); ++a) {
    if (q_values[a] == best && pick-- == 0) return static_cast<int>(a);
  }
  return 0;
}

}  // namespace nibbler
