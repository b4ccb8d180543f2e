#include "shmm/mixture.hpp"

#include "shmm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace shmm {

namespace {
constexpr double kWeightTol = 1e-10;
constexpr Eigen::Index kBlock = 256;
double const kLog2Pi = std::log(2.0 * std::numbers::pi);
} // namespace

double normal_logpdf(double y, double mean, double variance)
{
  double const d = y - mean;
  return -0.5 * (kLog2Pi + std::log(variance) + d * d / variance);
}

double log_sum_exp(Eigen::Ref<Eigen::ArrayXd const> v)
{
  if (v.size() == 0)
    return -std::numeric_limits<double>::infinity();
  double const m = v.maxCoeff();
  if (!std::isfinite(m))
    return m;
  return m + std::log((v - m).exp().sum());
}

PredictiveMixture::PredictiveMixture(Eigen::VectorXd w, Eigen::VectorXd mu, Eigen::VectorXd var)
  : weights(std::move(w)), means(std::move(mu)), variances(std::move(var))
{
  validate();
}

PredictiveMixture PredictiveMixture::single(GaussianMoments g)
{
  return {Eigen::VectorXd::Ones(1), Eigen::VectorXd::Constant(1, g.mean),
          Eigen::VectorXd::Constant(1, g.variance)};
}

PredictiveMixture PredictiveMixture::from_unnormalized(std::vector<double> const &w,
                                                       std::vector<GaussianMoments> const &comps)
{
  if (w.size() != comps.size() || w.empty())
    throw InvalidArgument("mixture weights and components must be nonempty and equal length");
  Eigen::Index const n = static_cast<Eigen::Index>(w.size());
  Eigen::VectorXd wv(n), mu(n), var(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    wv(i) = w[i];
    mu(i) = comps[i].mean;
    var(i) = comps[i].variance;
  }
  double const total = wv.sum();
  if (!(total > 0.0))
    throw InvalidArgument("mixture weights have no mass");
  return {wv / total, mu, var};
}

void PredictiveMixture::validate() const
{
  if (weights.size() == 0 || means.size() != weights.size() || variances.size() != weights.size())
    throw InvalidArgument("mixture arrays must be nonempty and equal length");
  if ((weights.array() < 0.0).any())
    throw InvalidArgument("negative mixture weight");
  if (std::abs(weights.sum() - 1.0) > kWeightTol)
    throw InvalidArgument("mixture weights do not sum to 1");
  if (!(variances.array() > 0.0).all() || !variances.allFinite() || !means.allFinite())
    throw InvalidArgument("mixture variances must be positive and finite");
}

double log_density(PredictiveMixture const &m, double y)
{
  Eigen::ArrayXd ys(1);
  ys(0) = y;
  return log_density(m, ys)(0);
}

Eigen::ArrayXd log_density(PredictiveMixture const &m, Eigen::Ref<Eigen::ArrayXd const> ys)
{
  Eigen::Index const n = ys.size();
  Eigen::ArrayXd out(n);
  Eigen::ArrayXd const mu = m.means.array();
  Eigen::ArrayXd const inv_var = m.variances.array().inverse();
  // log w_i - 0.5 log(2 pi var_i); zero-weight components contribute -inf
  Eigen::ArrayXd const offset =
    m.weights.array().log() - 0.5 * (kLog2Pi + m.variances.array().log());
  for (Eigen::Index start = 0; start < n; start += kBlock) {
    Eigen::Index const len = std::min(kBlock, n - start);
    Eigen::ArrayXXd terms(mu.size(), len);
    for (Eigen::Index j = 0; j < len; ++j) {
      Eigen::ArrayXd const d = ys(start + j) - mu;
      terms.col(j) = offset - 0.5 * d.square() * inv_var;
    }
    for (Eigen::Index j = 0; j < len; ++j)
      out(start + j) = log_sum_exp(terms.col(j));
  }
  return out;
}

GaussianMoments mixture_moments(PredictiveMixture const &m)
{
  double const mean = m.weights.dot(m.means);
  double const second = m.weights.dot((m.variances.array() + m.means.array().square()).matrix());
  return {mean, std::max(second - mean * mean, 0.0)};
}

PredictiveMixture combine(std::vector<PredictiveMixture> const &parts, std::vector<double> const &outer)
{
  if (parts.size() != outer.size() || parts.empty())
    throw InvalidArgument("combine: parts and outer weights must match");
  Eigen::Index total = 0;
  for (auto const &p : parts)
    total += p.size();
  Eigen::VectorXd w(total), mu(total), var(total);
  Eigen::Index at = 0;
  for (std::size_t j = 0; j < parts.size(); ++j) {
    auto const n = parts[j].size();
    w.segment(at, n) = outer[j] * parts[j].weights;
    mu.segment(at, n) = parts[j].means;
    var.segment(at, n) = parts[j].variances;
    at += n;
  }
  double const s = w.sum();
  if (!(s > 0.0))
    throw InvalidArgument("combine: outer weights have no mass");
  return {w / s, mu, var};
}

} // namespace shmm
