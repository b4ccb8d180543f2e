#pragma once

#include <Eigen/Dense>

#include <vector>

namespace shmm {

/// Mean and variance of a univariate Gaussian.
struct GaussianMoments
{
  double mean = 0.0;
  double variance = 1.0;

  friend bool operator==(GaussianMoments const &, GaussianMoments const &) = default;
};

double normal_logpdf(double y, double mean, double variance);

/// Stable log(sum(exp(v))); returns -inf for an empty or all -inf input.
double log_sum_exp(Eigen::Ref<Eigen::ArrayXd const> v);

/// Weighted univariate Gaussian mixture. Weights sum to 1, variances are positive.
struct PredictiveMixture
{
  Eigen::VectorXd weights;
  Eigen::VectorXd means;
  Eigen::VectorXd variances;

  PredictiveMixture() = default;
  PredictiveMixture(Eigen::VectorXd w, Eigen::VectorXd mu, Eigen::VectorXd var);
  static PredictiveMixture single(GaussianMoments g);
  /// Builds from unnormalised weights and normalises them.
  static PredictiveMixture from_unnormalized(std::vector<double> const &w,
                                             std::vector<GaussianMoments> const &comps);

  Eigen::Index size() const { return weights.size(); }
  GaussianMoments component(Eigen::Index i) const { return {means(i), variances(i)}; }
  void validate() const;
};

double log_density(PredictiveMixture const &m, double y);
/// Log-density at many points; evaluated in column blocks to bound memory.
Eigen::ArrayXd log_density(PredictiveMixture const &m, Eigen::Ref<Eigen::ArrayXd const> ys);

/// Law of total variance.
GaussianMoments mixture_moments(PredictiveMixture const &m);

/// Concatenation with outer weights: sum_j a_j * parts_j, renormalised.
PredictiveMixture combine(std::vector<PredictiveMixture> const &parts, std::vector<double> const &outer);

} // namespace shmm
