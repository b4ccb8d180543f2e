#include "shmm/baselines.hpp"

#include "shmm/errors.hpp"
#include "shmm/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace shmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// stream id used for the resampling offset; particle streams use their index
constexpr std::uint64_t kResampleStream = 0xA5A5'0000'0000'0001ULL;

Eigen::RowVectorXd prior_row(int last, TransitionMatrix const &pi)
{
  return last < 0 ? pi.first_step() : Eigen::RowVectorXd(pi.rows.row(last));
}

} // namespace

std::vector<double> warmup_means(std::span<double const> warmup, std::size_t k, double spread)
{
  double lo = -spread, hi = spread;
  if (!warmup.empty()) {
    auto const [mn, mx] = std::minmax_element(warmup.begin(), warmup.end());
    lo = *mn;
    hi = *mx;
  }
  if (hi - lo < 1e-8) {
    double const mid = 0.5 * (lo + hi);
    lo = mid - spread;
    hi = mid + spread;
  }
  std::vector<double> out(k, 0.5 * (lo + hi));
  for (std::size_t i = 0; k > 1 && i < k; ++i)
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1);
  return out;
}

OnlineEmState online_em_init(TransitionMatrix const &pi, double obs_var, std::span<double const> warmup,
                             OnlineEmOptions options)
{
  pi.validate();
  if (!(obs_var > 0.0))
    throw InvalidArgument("online EM needs a positive emission variance");
  if (!(options.step_exponent > 0.5 && options.step_exponent <= 1.0))
    throw InvalidArgument("online EM step_exponent must lie in (0.5, 1]");
  int const k = pi.k();
  OnlineEmState s;
  auto const init = warmup_means(warmup, static_cast<std::size_t>(k), std::sqrt(obs_var));
  s.init_means = Eigen::Map<Eigen::VectorXd const>(init.data(), k);
  s.mean_estimates = s.init_means;
  s.filter_probs = pi.initial;
  s.s0 = Eigen::VectorXd::Zero(k);
  s.s1 = Eigen::VectorXd::Zero(k);
  s.obs_var = obs_var;
  s.options = options;
  return s;
}

OnlineEmState online_em_step(OnlineEmState const &state, double y, TransitionMatrix const &pi)
{
  if (!std::isfinite(y))
    throw RejectedInput("non-finite observation");
  int const k = pi.k();
  OnlineEmState s = state;
  Eigen::RowVectorXd const prior = state.filter_probs.transpose() * pi.rows;
  Eigen::ArrayXd lp(k);
  for (int j = 0; j < k; ++j)
    lp(j) = prior(j) > 0.0 ? std::log(prior(j)) + normal_logpdf(y, state.mean_estimates(j), state.obs_var)
                           : kNegInf;
  double const lse = log_sum_exp(lp);
  if (!std::isfinite(lse))
    throw DegenerateLikelihood(static_cast<std::size_t>(state.t + 1), "online EM filter lost all mass");
  s.filter_probs = (lp - lse).exp().matrix();

  s.t = state.t + 1;
  double const gamma = std::pow(static_cast<double>(s.t), -state.options.step_exponent);
  s.s0 = (1.0 - gamma) * state.s0 + gamma * s.filter_probs;
  s.s1 = (1.0 - gamma) * state.s1 + gamma * y * s.filter_probs;
  if (s.t > state.options.burn_in) {
    for (int j = 0; j < k; ++j)
      s.mean_estimates(j) = s.s0(j) > state.options.min_mass ? s.s1(j) / s.s0(j) : s.init_means(j);
  }
  return s;
}

PredictiveMixture online_em_predictive(OnlineEmState const &state, TransitionMatrix const &pi)
{
  Eigen::VectorXd w = (state.filter_probs.transpose() * pi.rows).transpose();
  w /= w.sum();
  return {w, state.mean_estimates, Eigen::VectorXd::Constant(pi.k(), state.obs_var)};
}

RbpfState rbpf_init(std::vector<GaussianConjugateState> const &priors, std::size_t n_particles,
                    std::uint64_t seed, double ess_threshold)
{
  if (n_particles < 1)
    throw InvalidBudget("RBPF needs at least one particle");
  if (priors.empty())
    throw InvalidArgument("RBPF needs regime priors");
  if (!(ess_threshold > 0.0 && ess_threshold <= 1.0))
    throw InvalidArgument("ess_threshold must lie in (0, 1]");
  RbpfState s;
  s.particles.assign(n_particles, RbpfParticle{-1, priors});
  double const lw = -std::log(static_cast<double>(n_particles));
  s.log_weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_particles), lw);
  s.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_particles), 1.0 / n_particles);
  s.seed = seed;
  s.ess_threshold = ess_threshold;
  return s;
}

std::vector<std::size_t> systematic_resample(Eigen::Ref<Eigen::VectorXd const> weights, double u0)
{
  auto const n = static_cast<std::size_t>(weights.size());
  std::vector<std::size_t> idx(n);
  double cumulative = weights(0);
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double const point = (static_cast<double>(i) + u0) / static_cast<double>(n);
    while (point > cumulative && j + 1 < n)
      cumulative += weights(static_cast<Eigen::Index>(++j));
    idx[i] = j;
  }
  return idx;
}

RbpfState rbpf_step(RbpfState const &state, double y, TransitionMatrix const &pi,
                    std::span<int const> forced)
{
  if (!std::isfinite(y))
    throw RejectedInput("non-finite observation");
  if (!forced.empty() && forced.size() != state.size())
    throw InvalidArgument("forced regime list must have one entry per particle");
  RbpfState s = state;
  s.t = state.t + 1;
  auto const n = state.size();
  for (std::size_t i = 0; i < n; ++i) {
    auto &p = s.particles[i];
    Eigen::RowVectorXd const row = prior_row(p.last_state, pi);
    int z = 0;
    double lw = state.log_weights(static_cast<Eigen::Index>(i));
    if (forced.empty()) {
      z = sample_index(row, counter_uniform(state.seed, i, static_cast<std::uint64_t>(s.t)));
    } else {
      z = forced[i];
      lw = row(z) > 0.0 ? lw + std::log(row(z)) : kNegInf;
    }
    auto const g = gaussian_predictive(p.summaries[static_cast<std::size_t>(z)]);
    s.log_weights(static_cast<Eigen::Index>(i)) = lw + normal_logpdf(y, g.mean, g.variance);
    p.summaries[static_cast<std::size_t>(z)] = gaussian_update(p.summaries[static_cast<std::size_t>(z)], y);
    p.last_state = z;
  }
  double const lse = log_sum_exp(s.log_weights.array());
  if (!std::isfinite(lse))
    throw DegenerateLikelihood(static_cast<std::size_t>(s.t),
                               "all particle weights are zero at t=" + std::to_string(s.t));
  s.log_weights.array() -= lse;
  s.weights = s.log_weights.array().exp().matrix();

  if (s.resampling && s.ess() / static_cast<double>(n) < s.ess_threshold) {
    auto const idx =
      systematic_resample(s.weights, counter_uniform(s.seed, kResampleStream, static_cast<std::uint64_t>(s.t)));
    std::vector<RbpfParticle> next;
    next.reserve(n);
    for (auto j : idx)
      next.push_back(s.particles[j]);
    s.particles = std::move(next);
    s.log_weights.setConstant(-std::log(static_cast<double>(n)));
    s.weights.setConstant(1.0 / static_cast<double>(n));
    ++s.resample_count;
  }
  return s;
}

PredictiveMixture rbpf_predictive(RbpfState const &state, TransitionMatrix const &pi)
{
  int const k = pi.k();
  auto const n = static_cast<Eigen::Index>(state.size()) * k;
  Eigen::VectorXd w(n), mu(n), var(n);
  for (std::size_t i = 0; i < state.size(); ++i) {
    auto const &p = state.particles[i];
    Eigen::RowVectorXd const row = prior_row(p.last_state, pi);
    for (int j = 0; j < k; ++j) {
      auto const idx = static_cast<Eigen::Index>(i) * k + j;
      auto const g = gaussian_predictive(p.summaries[static_cast<std::size_t>(j)]);
      w(idx) = state.weights(static_cast<Eigen::Index>(i)) * row(j);
      mu(idx) = g.mean;
      var(idx) = g.variance;
    }
  }
  w /= w.sum();
  return {w, mu, var};
}

} // namespace shmm
