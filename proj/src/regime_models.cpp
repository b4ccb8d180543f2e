#include "shmm/regime_models.hpp"

#include "shmm/errors.hpp"

#include <cmath>
#include <sstream>

namespace shmm {

namespace {

void require_finite(double y)
{
  if (!std::isfinite(y))
    throw RejectedInput("non-finite observation");
}

constexpr double kJitterStart = 1e-9;
constexpr double kJitterMax = 1e-6;

// Rebuilds the factor from scratch with jitter escalation
void refactorize(GPState &s)
{
  auto const n = static_cast<Eigen::Index>(s.size());
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i)
    y(i) = s.targets[i];
  double jitter = s.jitter;
  for (;;) {
    s.jitter = jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(s.gram());
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0) {
      s.chol = llt.matrixL();
      s.whitened = s.chol.triangularView<Eigen::Lower>().solve(y);
      return;
    }
    jitter = jitter == 0.0 ? kJitterStart : jitter * 10.0;
    if (jitter > kJitterMax * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "GP Cholesky breakdown with jitter " << s.jitter;
      throw NumericalError(msg.str());
    }
  }
}

} // namespace

GaussianConjugateState GaussianConjugateState::prior(double mean, double var, double obs_var)
{
  if (!(var > 0.0) || !(obs_var > 0.0) || !std::isfinite(mean))
    throw InvalidArgument("conjugate prior requires finite mean and positive variances");
  return {mean, var, obs_var, 0};
}

GaussianConjugateState gaussian_update(GaussianConjugateState const &s, double y)
{
  require_finite(y);
  double const var = 1.0 / (1.0 / s.post_var + 1.0 / s.obs_var);
  double const mean = var * (s.post_mean / s.post_var + y / s.obs_var);
  return {mean, var, s.obs_var, s.count + 1};
}

GaussianMoments gaussian_predictive(GaussianConjugateState const &s)
{
  return {s.post_mean, s.post_var + s.obs_var};
}

void KernelHyper::validate() const
{
  if (!(rbf_variance > 0 && rbf_lengthscale > 0 && per_variance > 0 && per_lengthscale > 0 &&
        per_period > 0))
    throw InvalidArgument("kernel hyperparameters must be strictly positive");
}

double kernel_eval(KernelHyper const &h, double t1, double t2)
{
  double const d = t1 - t2;
  double const s = std::sin(std::numbers::pi * d / h.per_period);
  return h.rbf_variance * std::exp(-d * d / (2.0 * h.rbf_lengthscale * h.rbf_lengthscale)) +
         h.per_variance * std::exp(-2.0 * s * s / (h.per_lengthscale * h.per_lengthscale));
}

GPState GPState::empty(KernelHyper hyper, double noise_var, std::size_t window_cap)
{
  hyper.validate();
  if (!(noise_var > 0.0))
    throw InvalidArgument("GP noise variance must be positive");
  if (window_cap < 1)
    throw InvalidArgument("GP window_cap must be >= 1");
  GPState s;
  s.hyper = hyper;
  s.noise_var = noise_var;
  s.window_cap = window_cap;
  s.chol.resize(0, 0);
  s.whitened.resize(0);
  return s;
}

Eigen::MatrixXd GPState::gram() const
{
  auto const n = static_cast<Eigen::Index>(size());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      g(i, j) = kernel_eval(hyper, inputs[i], inputs[j]);
      g(j, i) = g(i, j);
    }
    g(i, i) += noise_var + jitter;
  }
  return g;
}

bool operator==(GPState const &a, GPState const &b)
{
  return a.inputs == b.inputs && a.targets == b.targets && a.hyper == b.hyper &&
         a.noise_var == b.noise_var && a.window_cap == b.window_cap && a.jitter == b.jitter &&
         a.chol.rows() == b.chol.rows() && a.chol == b.chol && a.whitened == b.whitened;
}

void cholesky_rank_one_update(Eigen::MatrixXd &lower, Eigen::VectorXd x)
{
  Eigen::Index const n = lower.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    double const lkk = lower(k, k);
    double const r = std::hypot(lkk, x(k));
    double const c = r / lkk;
    double const s = x(k) / lkk;
    lower(k, k) = r;
    if (k + 1 < n) {
      Eigen::Index const m = n - k - 1;
      lower.col(k).tail(m) = (lower.col(k).tail(m) + s * x.tail(m)) / c;
      x.tail(m) = c * x.tail(m) - s * lower.col(k).tail(m);
    }
  }
}

GPState gp_update(GPState const &s, double t_in, double y)
{
  require_finite(y);
  if (!std::isfinite(t_in))
    throw RejectedInput("non-finite GP input");
  if (!s.inputs.empty() && !(t_in > s.inputs.back()))
    throw OrderingError("GP input must be strictly greater than all stored inputs");

  GPState out = s;
  auto const n = static_cast<Eigen::Index>(s.size());
  out.inputs.push_back(t_in);
  out.targets.push_back(y);

  Eigen::VectorXd kvec(n);
  for (Eigen::Index i = 0; i < n; ++i)
    kvec(i) = kernel_eval(s.hyper, s.inputs[i], t_in);
  Eigen::VectorXd const l = n > 0 ? Eigen::VectorXd(s.chol.triangularView<Eigen::Lower>().solve(kvec))
                                  : Eigen::VectorXd(0);
  double const d2 = kernel_eval(s.hyper, t_in, t_in) + s.noise_var + s.jitter - l.squaredNorm();
  if (d2 > 0.0 && std::isfinite(d2)) {
    double const d = std::sqrt(d2);
    out.chol = Eigen::MatrixXd::Zero(n + 1, n + 1);
    out.chol.topLeftCorner(n, n) = s.chol;
    out.chol.block(n, 0, 1, n) = l.transpose();
    out.chol(n, n) = d;
    out.whitened.resize(n + 1);
    out.whitened.head(n) = s.whitened;
    out.whitened(n) = (y - l.dot(s.whitened)) / d;
  } else {
    refactorize(out);
  }

  if (out.size() > out.window_cap) {
    Eigen::Index const m = static_cast<Eigen::Index>(out.size()) - 1;
    Eigen::MatrixXd trailing = out.chol.bottomRightCorner(m, m);
    Eigen::VectorXd const spill = out.chol.col(0).tail(m);
    cholesky_rank_one_update(trailing, spill);
    out.inputs.erase(out.inputs.begin());
    out.targets.erase(out.targets.begin());
    out.chol = std::move(trailing);
    Eigen::VectorXd yv = Eigen::Map<Eigen::VectorXd const>(out.targets.data(), m);
    out.whitened = out.chol.triangularView<Eigen::Lower>().solve(yv);
  }
  return out;
}

GaussianMoments gp_predictive(GPState const &s, double t_query)
{
  double const prior = kernel_eval(s.hyper, t_query, t_query);
  if (s.inputs.empty())
    return {0.0, prior + s.noise_var};
  auto const n = static_cast<Eigen::Index>(s.size());
  Eigen::VectorXd kstar(n);
  for (Eigen::Index i = 0; i < n; ++i)
    kstar(i) = kernel_eval(s.hyper, s.inputs[i], t_query);
  Eigen::VectorXd const v = s.chol.triangularView<Eigen::Lower>().solve(kstar);
  double const mean = v.dot(s.whitened);
  double const latent = std::max(prior - v.squaredNorm(), 0.0);
  return {mean, latent + s.noise_var};
}

RegimeSummary update(RegimeSummary const &s, double t, double y)
{
  return std::visit(
    [&](auto const &state) -> RegimeSummary {
      using T = std::decay_t<decltype(state)>;
      if constexpr (std::is_same_v<T, GaussianConjugateState>)
        return gaussian_update(state, y);
      else
        return gp_update(state, t, y);
    },
    s);
}

GaussianMoments predictive(RegimeSummary const &s, double t_query)
{
  return std::visit(
    [&](auto const &state) -> GaussianMoments {
      using T = std::decay_t<decltype(state)>;
      if constexpr (std::is_same_v<T, GaussianConjugateState>)
        return gaussian_predictive(state);
      else
        return gp_predictive(state, t_query);
    },
    s);
}

} // namespace shmm
