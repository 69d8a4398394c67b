#pragma once

// General value function learners: sparse base features, linear TD(0), the
// one-step reward model, QV-form updates for the main linear learner and for
// each question's network answer, and epsilon-greedy action selection.

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "nibbler/micrograd.hpp"
#include "nibbler/multicatch.hpp"
#include "nibbler/rng.hpp"
#include "nibbler/topk.hpp"

namespace nibbler {

/// Nonzero entries of a vector, listed in iteration order.
struct SparseFeatures {
  std::size_t dim = 0;
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  double dot(const Eigen::VectorXd& w) const;
  /// w[i] += scale * x[i] over the nonzeros.
  void axpy_into(Eigen::VectorXd& w, double scale) const;
};

/// Base features in both dense form (for gathers) and sparse form (for dots).
struct BaseFeatures {
  Eigen::VectorXd dense;
  SparseFeatures sparse;

  static BaseFeatures from_dense(const Eigen::VectorXd& x, const IndexOrder* order = nullptr);
  static BaseFeatures from_bits(const BitObservation& bits, const IndexOrder* order = nullptr);
  void assign_bits(const BitObservation& bits, const IndexOrder* order = nullptr);
  std::size_t size() const { return static_cast<std::size_t>(dense.size()); }
};

/// Base features followed by the concatenated nonlinear features.
struct FullFeatures {
  SparseFeatures base;
  Eigen::VectorXd nonlinear;
  std::size_t size() const { return base.dim + static_cast<std::size_t>(nonlinear.size()); }
};

struct GvfQuestion {
  std::uint32_t cumulant_index = 0;
  double discount = 0.99;
};

/// Linear state value and per-action value weights with their momentum.
/// All weights start at zero.
struct LinearVQ {
  Eigen::VectorXd w_v;
  std::vector<Eigen::VectorXd> w_q;
  Eigen::VectorXd vel_v;
  std::vector<Eigen::VectorXd> vel_q;

  static LinearVQ zeros(std::size_t feature_dim, int num_actions);

  std::size_t feature_dim() const { return static_cast<std::size_t>(w_v.size()); }
  int num_actions() const { return static_cast<int>(w_q.size()); }
  std::size_t parameter_count() const { return feature_dim() * (1 + w_q.size()); }
  bool all_finite() const;

  double value(const Eigen::VectorXd& x) const { return w_v.dot(x); }
  double action_value(const Eigen::VectorXd& x, int a) const { return w_q[static_cast<std::size_t>(a)].dot(x); }
  double value(const FullFeatures& x) const;
  double action_value(const FullFeatures& x, int a) const;
  Eigen::VectorXd action_values(const FullFeatures& x) const;

  void save(std::ostream& out) const;
  void load(std::istream& in);
};

/// Stepsize and momentum used by a co_opt-driven update.
struct OptimizerParams {
  double alpha = 1e-3;
  double nu = 0.99;
};

// ---------------------------------------------------------------------------
// Linear learners (plain stochastic gradient, no momentum).

/// delta = cumulant + discount * w.x_next - w.x_t ; w += alpha * delta * x_t.
/// Returns delta.
double linear_td0(Eigen::VectorXd& w, const SparseFeatures& x_t, const SparseFeatures& x_next, double cumulant,
                  double discount, double alpha);

/// delta = reward - w.x_t ; w += alpha * delta * x_t. Returns delta.
double linear_reward_model_update(Eigen::VectorXd& w, const SparseFeatures& x_t, double reward, double alpha);

// ---------------------------------------------------------------------------
// Main learner.

struct QvTarget {
  double target = 0.0;     // Y, held fixed under differentiation
  double v_error = 0.0;    // Y - V(x_t)
  double q_error = 0.0;    // Y - Q(x_t, a_t)
  double loss() const { return 0.5 * (v_error * v_error + q_error * q_error); }
};

/// Y = reward + discount * V(x_next); L = 1/2 [(Y - V(x_t))^2 + (Y - Q(x_t, a_t))^2].
/// Only w_v and w_q[action] (and their velocities) are touched.
QvTarget main_qv_update(LinearVQ& main, const FullFeatures& x_t, const FullFeatures& x_next, double reward,
                        int action, double discount, const OptimizerParams& opt);

/// The same loss without updating; Y is evaluated at the current weights.
QvTarget main_qv_loss(const LinearVQ& main, const FullFeatures& x_t, const FullFeatures& x_next, double reward,
                      int action, double discount);

// ---------------------------------------------------------------------------
// Question answers.

/// Gather x[list[p]] for p in [0, list.size()).
void gather(const Eigen::VectorXd& x, const std::vector<std::uint32_t>& list, Eigen::VectorXd& out);

struct AnswerGradients {
  QvTarget errors;
  int action = 0;
  Eigen::VectorXd inputs_t;  // selected base features at t
  DenseActivations act_t;
  Eigen::VectorXd grad_v;    // dL/dw_v
  Eigen::VectorXd grad_q;    // dL/dw_q[action]
  Eigen::VectorXd dpre;      // dL/d(pre-activation); dL/dW = dpre inputs_t^T, dL/db = dpre
};

struct QuestionSlot {
  GvfQuestion question;
  SelectionState inputs;
  DenseNet net;
  DenseMomentum net_momentum;
  LinearVQ heads;
  Eigen::VectorXd support;

  std::size_t parameter_count() const {
    return net.parameter_count() + heads.parameter_count() + static_cast<std::size_t>(support.size());
  }
  bool all_finite() const { return net.all_finite() && heads.all_finite() && support.allFinite(); }

  /// x^{e} for the given base features through the current selection and net.
  /// The net columns that x activates must be settled (see settle_for).
  void features(const BaseFeatures& x, Eigen::VectorXd& scratch, DenseActivations& out) const;
  /// Settles the columns x activates, then computes features(x).
  void settled_features(const BaseFeatures& x, Eigen::VectorXd& scratch, DenseActivations& out);
  void settle_for(const BaseFeatures& x, Eigen::VectorXd& scratch);

  void save(std::ostream& out) const;
  void load(std::istream& in);
};

/// Gradients of the slot's QV loss at (x_t, a_t, x_next) with Y under stop-gradient.
/// `next_act`, when given, must be the net's activations at x_next. Columns
/// active at x_t (and x_next, without next_act) must be settled.
AnswerGradients answer_gradients(const QuestionSlot& slot, const BaseFeatures& x_t, const BaseFeatures& x_next,
                                 int action, const DenseActivations* next_act = nullptr);

/// C = x_next[cumulant]; Y = C + discount * V_i(x^e_next); joint V/Q loss on
/// x^e_t recomputed through the current net; heads and net updated via co_opt.
QvTarget answer_update(QuestionSlot& slot, const BaseFeatures& x_t, const BaseFeatures& x_next, int action,
                       const OptimizerParams& opt, const DenseActivations* next_act = nullptr);

/// Slot loss as a function of its current parameters with Y fixed to `target`.
double answer_loss_fixed_target(const QuestionSlot& slot, const BaseFeatures& x_t, int action, double target);

// ---------------------------------------------------------------------------

/// With probability epsilon a uniform action, otherwise an argmax of q_values
/// with ties broken uniformly at random. Non-finite values give a uniform action.
int epsilon_greedy(const Eigen::VectorXd& q_values, double epsilon, Rng& rng);

}  // namespace nibbler
