#pragma once

#include "shmm/mixture.hpp"

#include <Eigen/Dense>

#include <numbers>
#include <variant>
#include <vector>

namespace shmm {

/// Normal-Normal conjugate posterior over a regime mean with known emission variance.
struct GaussianConjugateState
{
  double post_mean = 0.0;
  double post_var = 100.0;
  double obs_var = 1.0;
  long count = 0;

  static GaussianConjugateState prior(double mean, double var, double obs_var);

  friend bool operator==(GaussianConjugateState const &, GaussianConjugateState const &) = default;
};

GaussianConjugateState gaussian_update(GaussianConjugateState const &s, double y);
GaussianMoments gaussian_predictive(GaussianConjugateState const &s);

/// Gaussian (RBF) plus exp-sine-squared periodic kernel.
struct KernelHyper
{
  double rbf_variance = 1.0;
  double rbf_lengthscale = 5.0;
  double per_variance = 0.5;
  double per_lengthscale = 1.0;
  double per_period = 2.0 * std::numbers::pi / 0.5;

  void validate() const;
  friend bool operator==(KernelHyper const &, KernelHyper const &) = default;
};

double kernel_eval(KernelHyper const &h, double t1, double t2);

/// Windowed GP regression state with an incrementally maintained Cholesky factor
/// of K + (noise_var + jitter) I.
struct GPState
{
  std::vector<double> inputs;
  std::vector<double> targets;
  KernelHyper hyper;
  double noise_var = 0.0025;
  std::size_t window_cap = 256;
  double jitter = 0.0;
  Eigen::MatrixXd chol;      // lower triangular, n x n
  Eigen::VectorXd whitened;  // chol^{-1} * targets

  static GPState empty(KernelHyper hyper, double noise_var, std::size_t window_cap = 256);

  std::size_t size() const { return inputs.size(); }
  /// Dense Gram matrix of the stored inputs including noise and jitter.
  Eigen::MatrixXd gram() const;

  friend bool operator==(GPState const &a, GPState const &b);
};

/// Appends (t_in, y); evicts the oldest point once window_cap is exceeded.
/// Throws OrderingError when t_in is not strictly increasing and NumericalError on
/// Cholesky breakdown at the maximal jitter.
GPState gp_update(GPState const &s, double t_in, double y);
GaussianMoments gp_predictive(GPState const &s, double t_query);

/// Rank-one update in place: L L^T + x x^T.
void cholesky_rank_one_update(Eigen::MatrixXd &lower, Eigen::VectorXd x);

/// Per-path, per-regime predictive state b_{t,k}.
using RegimeSummary = std::variant<GaussianConjugateState, GPState>;

/// `t` is the global time index of `y`; ignored by the conjugate model.
RegimeSummary update(RegimeSummary const &s, double t, double y);
GaussianMoments predictive(RegimeSummary const &s, double t_query);

inline double predictive_logpdf(RegimeSummary const &s, double t_query, double y)
{
  auto const g = predictive(s, t_query);
  return normal_logpdf(y, g.mean, g.variance);
}

} // namespace shmm
