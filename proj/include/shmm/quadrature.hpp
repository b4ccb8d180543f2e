#pragma once

#include "shmm/mixture.hpp"

#include <Eigen/Dense>

#include <functional>

namespace shmm {

struct QuadratureResult
{
  double value = 0.0;
  double error_estimate = 0.0;  // |T_n - T_{n/2}| at the final level
  Eigen::ArrayXd nodes;         // final trapezoid grid
  Eigen::ArrayXd weights;
  bool converged = false;
};

/// Vectorised integrand: values at a batch of nodes.
using Integrand = std::function<Eigen::ArrayXd(Eigen::ArrayXd const &)>;

/// Composite trapezoid rule on [a, b], halving the step (reusing all previous nodes)
/// until successive estimates differ by less than `tol`.
QuadratureResult integrate(Integrand const &f, double a, double b, double tol = 1e-9,
                           int initial_intervals = 256, int max_levels = 16);

/// Integration range: [min mean - 10 max sd, max mean + 10 max sd] over both mixtures.
std::pair<double, double> mixture_range(PredictiveMixture const &p, PredictiveMixture const &q);

} // namespace shmm
