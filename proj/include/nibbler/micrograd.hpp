#pragma once

// Single-hidden-layer rectifier networks with hand-derived gradients, and the
// momentum co-optimizer shared by every learner.

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "nibbler/rng.hpp"

namespace nibbler {

/// Sign applied to the velocity in co_opt. Gradients are of a loss, so the
/// update descends.
inline constexpr double kDescentSign = -1.0;

/// Velocity entries below this magnitude are set to zero after every update.
/// Velocities of features that stay inactive decay geometrically and would
/// otherwise spend most of a long run in (very slow) subnormal arithmetic.
inline constexpr double kVelocityFloor = 1e-150;

template <typename V>
void flush_small(Eigen::MatrixBase<V>& velocity) {
  velocity.derived() = (velocity.array().abs() < kVelocityFloor).select(0.0, velocity.array()).matrix();
}

/// velocity <- nu * velocity + (1 - nu) * grad
/// w        <- w + kDescentSign * alpha * velocity
template <typename W, typename G, typename V>
void co_opt(Eigen::MatrixBase<W>& w, double alpha, const Eigen::MatrixBase<G>& grad,
            Eigen::MatrixBase<V>& velocity, double nu) {
  velocity = nu * velocity + (1.0 - nu) * grad;
  flush_small(velocity);
  w += (kDescentSign * alpha) * velocity;
}

template <typename W, typename G, typename V>
void co_opt(Eigen::MatrixBase<W>&& w, double alpha, const Eigen::MatrixBase<G>& grad,
            Eigen::MatrixBase<V>&& velocity, double nu) {
  co_opt(w, alpha, grad, velocity, nu);
}

struct DenseNet {
  Eigen::MatrixXd weights;  // hidden_dim x input_dim; column j holds input j's fan-out
  Eigen::VectorXd bias;     // hidden_dim

  Eigen::Index input_dim() const { return weights.cols(); }
  Eigen::Index hidden_dim() const { return weights.rows(); }
  std::size_t parameter_count() const { return static_cast<std::size_t>(weights.size() + bias.size()); }
  bool all_finite() const { return weights.allFinite() && bias.allFinite(); }
};

/// Velocities for a DenseNet, plus the bookkeeping for deferred column decay.
///
/// An input that is zero contributes nothing to its weight column's gradient,
/// so on such a step the column's co_opt update is pure decay:
/// v <- nu v, w <- w - alpha v. co_opt_layer defers these and settle_columns
/// applies k of them at once in closed form,
///   w <- w - alpha * v * nu (1 - nu^k) / (1 - nu),   v <- nu^k v,
/// which keeps the per-step cost proportional to the active inputs.
/// Weights of an unsettled column are stale; settle before reading them.
struct DenseMomentum {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
  std::uint64_t clock = 0;             // co_opt_layer calls so far
  std::vector<std::uint64_t> settled;  // per column: the clock its weights reflect
  double alpha = 0.0;                  // stepsize and momentum of the deferred decay
  double nu = 0.0;
};

struct DenseActivations {
  Eigen::VectorXd pre;     // W x + b
  Eigen::VectorXd hidden;  // max(0, pre)
};

struct DenseGradients {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
  Eigen::VectorXd input;
};

/// Weights ~ Uniform(-1/sqrt(input_dim), 1/sqrt(input_dim)), drawn column by
/// column; bias and velocity are zero.
std::pair<DenseNet, DenseMomentum> init_dense(Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng);

/// Redraws one input column from the init distribution and zeroes its velocity.
void reinit_input_column(DenseNet& net, DenseMomentum& momentum, Eigen::Index pos, Rng& rng);

/// Redraws every weight and zeroes bias and velocity, in place.
void reinit_dense(DenseNet& net, DenseMomentum& momentum, Rng& rng);

/// hidden = max(0, W x + b). Zero inputs are skipped, which leaves the result
/// unchanged and makes binary inputs cheap.
void forward(const DenseNet& net, const Eigen::VectorXd& x, DenseActivations& out);
DenseActivations forward(const DenseNet& net, const Eigen::VectorXd& x);

/// Gradients of upstream^T hidden with respect to W, b and x. The rectifier's
/// derivative is taken as 0 at exactly 0.
DenseGradients backward(const DenseNet& net, const Eigen::VectorXd& x, const DenseActivations& act,
                        const Eigen::VectorXd& upstream);

/// Pre-activation gradient: upstream masked by the rectifier derivative.
Eigen::VectorXd pre_activation_gradient(const DenseActivations& act, const Eigen::VectorXd& upstream);

/// co_opt applied to the whole layer with grad_W = dpre x^T and grad_b = dpre,
/// without materializing grad_W. Columns of zero inputs are deferred (see
/// DenseMomentum); once settled the result equals dense co_opt up to rounding.
void co_opt_layer(DenseNet& net, DenseMomentum& momentum, double alpha, double nu, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& dpre);

/// Brings column j up to date with every co_opt_layer call so far.
void settle_column(DenseNet& net, DenseMomentum& momentum, Eigen::Index j);
/// Settles the columns of the nonzero entries of x: call before forward(net, x).
void settle_inputs(DenseNet& net, DenseMomentum& momentum, const Eigen::VectorXd& x);
void settle_all(DenseNet& net, DenseMomentum& momentum);

/// Flat snapshot: weights (row-major), bias, the matching velocities, then the
/// deferred-decay state (clock, per-column clocks, alpha, nu).
void save_dense(std::ostream& out, const DenseNet& net, const DenseMomentum& momentum);
void load_dense(std::istream& in, DenseNet& net, DenseMomentum& momentum);

}  // namespace nibbler
