#pragma once

// Slow, independent reference computations used by the test suites.
// Nothing here shares code with the library beyond plain data types.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "nibbler/multicatch.hpp"

namespace oracle {

/// Row-stochastic matrix -> stationary distribution by power iteration.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& P, double tol = 1e-14, int max_iter = 1'000'000);

struct CatchChain {
  std::vector<nibbler::BoardState> states;
  Eigen::MatrixXd P;          // transitions under a uniform-random action
  Eigen::VectorXd reward;     // expected one-step reward from each state
  std::size_t index_of(const nibbler::BoardState& s) const;
};

/// Explicit enumeration of one board's reachable-or-not state space with the
/// transition law written out from the dynamics description (no use of
/// board_step).
CatchChain enumerate_catch(const nibbler::BoardConfig& config);

/// Stationary average reward of the uniform-random policy on one board.
double catch_uniform_average_reward(const nibbler::BoardConfig& config);

/// Indices of the k largest utilities; ties broken toward the lower index.
std::vector<std::uint32_t> full_sort_topk(const std::vector<double>& utilities, std::size_t k);

/// w solving Phi^T D (Phi - gamma P Phi) w = Phi^T D r with D = diag(d).
Eigen::VectorXd projected_td_fixed_point(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Phi,
                                         const Eigen::VectorXd& r, double gamma, const Eigen::VectorXd& d);

/// argmin_w |X w - y|^2 via a rank-revealing QR; columns that never vary
/// receive the minimum-norm value.
Eigen::VectorXd least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// G = sum_k gamma^k c[k]: the discounted return of a finite cumulant sequence
/// starting one step after the prediction.
double discounted_return(const std::vector<double>& cumulants, double gamma);

/// Central difference of f at x along coordinate i.
double central_difference(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                          Eigen::Index i, double eps = 1e-6);

/// |a - b| / max(|a|, |b|, floor).
double relative_error(double a, double b, double floor = 1e-8);

/// Standard error of the mean of a long correlated series by batch means.
double batch_means_standard_error(const std::vector<double>& series, std::size_t batches = 100);

}  // namespace oracle
