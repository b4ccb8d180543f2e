#pragma once

#include "shmm/mixture.hpp"
#include "shmm/regime_models.hpp"
#include "shmm/transition.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace shmm {

// ---------------------------------------------------------------------------
// Online EM: one forward-filter step (E) followed by a stochastic-approximation
// update of the per-regime sufficient statistics (M), gamma_t = t^(-step_exponent).
// The transition matrix is held fixed.
// ---------------------------------------------------------------------------

struct OnlineEmOptions
{
  double step_exponent = 0.6;
  long burn_in = 10;      // M-step not applied for t <= burn_in
  double min_mass = 1e-8; // s0 below this keeps the initial mean
};

struct OnlineEmState
{
  Eigen::VectorXd mean_estimates;
  Eigen::VectorXd filter_probs;
  Eigen::VectorXd s0;
  Eigen::VectorXd s1;
  Eigen::VectorXd init_means;
  double obs_var = 1.0;
  OnlineEmOptions options;
  long t = 0;
};

/// K values evenly spaced over the range of `warmup`; a degenerate range is widened
/// to +-spread about its midpoint, and K=1 gives the midpoint.
std::vector<double> warmup_means(std::span<double const> warmup, std::size_t k, double spread = 1.0);

/// K means evenly spaced over the range of `warmup`; filter starts at pi.initial.
OnlineEmState online_em_init(TransitionMatrix const &pi, double obs_var, std::span<double const> warmup,
                             OnlineEmOptions options = {});
OnlineEmState online_em_step(OnlineEmState const &state, double y, TransitionMatrix const &pi);
PredictiveMixture online_em_predictive(OnlineEmState const &state, TransitionMatrix const &pi);

// ---------------------------------------------------------------------------
// Rao-Blackwellised particle filter: regimes sampled from the transition prior,
// regime means integrated analytically by the conjugate model.
// ---------------------------------------------------------------------------

struct RbpfParticle
{
  int last_state = -1;  // -1 before the first observation
  std::vector<GaussianConjugateState> summaries;
};

struct RbpfState
{
  std::vector<RbpfParticle> particles;
  Eigen::VectorXd log_weights;  // normalised
  Eigen::VectorXd weights;
  std::uint64_t seed = 0;
  double ess_threshold = 0.5;
  bool resampling = true;
  long t = 0;
  long resample_count = 0;

  std::size_t size() const { return particles.size(); }
  double ess() const { return 1.0 / weights.squaredNorm(); }
};

RbpfState rbpf_init(std::vector<GaussianConjugateState> const &priors, std::size_t n_particles,
                    std::uint64_t seed, double ess_threshold = 0.5);

/// Particle i draws z_t from stream i. When `forced` is nonempty particle i takes
/// regime forced[i] instead and its weight also absorbs the transition probability.
RbpfState rbpf_step(RbpfState const &state, double y, TransitionMatrix const &pi,
                    std::span<int const> forced = {});
PredictiveMixture rbpf_predictive(RbpfState const &state, TransitionMatrix const &pi);

/// Systematic resampling: ancestor indices for N equally spaced points offset by u0 in (0,1).
std::vector<std::size_t> systematic_resample(Eigen::Ref<Eigen::VectorXd const> weights, double u0);

} // namespace shmm
