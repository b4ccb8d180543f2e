#include "shmm/quadrature.hpp"

#include "shmm/errors.hpp"

#include <algorithm>
#include <cmath>

namespace shmm {

QuadratureResult integrate(Integrand const &f, double a, double b, double tol, int initial_intervals,
                           int max_levels)
{
  if (!(b > a) || initial_intervals < 2)
    throw InvalidArgument("quadrature needs a nonempty interval");
  QuadratureResult out;
  Eigen::Index n = initial_intervals;
  double h = (b - a) / static_cast<double>(n);
  Eigen::ArrayXd const x0 = Eigen::ArrayXd::LinSpaced(n + 1, a, b);
  Eigen::ArrayXd const f0 = f(x0);
  double sum = f0.sum() - 0.5 * (f0(0) + f0(n));
  double estimate = h * sum;
  double change = 0.0;
  int level = 0;
  for (; level < max_levels; ++level) {
    // midpoints of the current grid
    Eigen::ArrayXd const mid = Eigen::ArrayXd::LinSpaced(n, a + 0.5 * h, b - 0.5 * h);
    sum += f(mid).sum();
    n *= 2;
    h *= 0.5;
    double const next = h * sum;
    change = std::abs(next - estimate);
    estimate = next;
    if (!std::isfinite(estimate))
      break;
    if (change < tol) {
      out.converged = true;
      break;
    }
  }
  out.value = estimate;
  out.error_estimate = change;
  out.nodes = Eigen::ArrayXd::LinSpaced(n + 1, a, b);
  out.weights = Eigen::ArrayXd::Constant(n + 1, h);
  out.weights(0) = out.weights(n) = 0.5 * h;
  return out;
}

std::pair<double, double> mixture_range(PredictiveMixture const &p, PredictiveMixture const &q)
{
  double const lo = std::min(p.means.minCoeff(), q.means.minCoeff());
  double const hi = std::max(p.means.maxCoeff(), q.means.maxCoeff());
  double const sd = std::sqrt(std::max(p.variances.maxCoeff(), q.variances.maxCoeff()));
  return {lo - 10.0 * sd, hi + 10.0 * sd};
}

} // namespace shmm
