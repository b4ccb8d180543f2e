#pragma once

#include "shmm/mixture.hpp"
#include "shmm/regime_models.hpp"
#include "shmm/transition.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace shmm {

/// One full regime path with its exact posterior weight and replayed summaries.
struct EnumeratedPath
{
  std::vector<int> path;
  double log_weight = 0.0;  // normalised
  double weight = 0.0;
  std::vector<RegimeSummary> summaries;
};

/// All K^t paths in lexicographic order.
struct PathPosterior
{
  std::vector<EnumeratedPath> paths;
  std::size_t t = 0;

  /// Indices ordered weight-descending; ties keep lexicographic order.
  std::vector<std::size_t> ranked() const;
};

inline constexpr std::size_t kMaxEnumeratedPaths = 1'000'000;
inline constexpr std::size_t kMaxSupports = 100'000;

/// Brute-force path posterior by depth-first enumeration. Throws InstanceTooLarge
/// when K^t exceeds `cap`.
PathPosterior exact_path_posterior(std::span<double const> observations, TransitionMatrix const &pi,
                                   std::vector<RegimeSummary> const &priors,
                                   std::size_t cap = kMaxEnumeratedPaths);

/// f_Z(y) = sum_k pi(z_t, k) f_{b_{t,k}}(y) for one enumerated path.
PredictiveMixture path_conditional_predictive(EnumeratedPath const &path, TransitionMatrix const &pi,
                                              std::size_t t);
/// Mixture of path-conditional predictives over `members` weighted by posterior
/// weight, renormalised. All paths when `members` is empty.
PredictiveMixture posterior_predictive(PathPosterior const &post, TransitionMatrix const &pi,
                                       std::span<std::size_t const> members = {});

struct DivergenceResult
{
  double value = 0.0;
  double error_estimate = 0.0;
  bool infinite = false;
  bool converged = true;
};

/// KL(p || q) by trapezoid quadrature on the mixtures' +-10 sd range.
DivergenceResult kl_mixture(PredictiveMixture const &p, PredictiveMixture const &q);

/// chi^2(num || den) = int num^2/den - 1. Non-integrable tails are detected from the
/// widest components and reported as infinite.
DivergenceResult chi2_mixture(PredictiveMixture const &num, PredictiveMixture const &den);

/// log(1 + delta * c).
inline double kl_bound(double delta, double c) { return std::log1p(delta * c); }

/// Discarded mass: sum of weights outside `support`, summed in ascending order so
/// equal multisets give bit-equal results.
double discarded_mass(PathPosterior const &post, std::span<std::size_t const> support);

struct TruncationReport
{
  std::vector<std::vector<int>> support;
  double w_a = 1.0;
  double delta = 0.0;
  double chi2_c = 0.0;
  double kl_exact = 0.0;
  double bound = 0.0;
  double strengthened_bound = 0.0;  // log(1 + delta^2 C)
  double quadrature_error_estimate = 0.0;
  bool assumption_violated = false;
  bool bound_holds = true;
  bool strengthened_holds = true;
};

inline constexpr double kBoundSlack = 1e-6;

/// Theorem quantities for an explicit support (indices into post.paths).
TruncationReport truncation_report(PathPosterior const &post, TransitionMatrix const &pi,
                                   std::span<std::size_t const> support);

/// Enumerates all paths and reports on the top-S support.
TruncationReport verify_theorem(std::span<double const> observations, TransitionMatrix const &pi,
                                std::vector<RegimeSummary> const &priors, int s_budget);

struct SupportSweepRow
{
  std::vector<std::size_t> support;
  double delta = 0.0;
  double chi2_c = 0.0;
  bool chi2_infinite = false;
  double bound = 0.0;
  double kl_exact = 0.0;
  bool is_top = false;
};

struct SupportSweep
{
  std::vector<SupportSweepRow> rows;
  double top_delta = 0.0;
  double min_delta = 0.0;
  bool top_attains_min_delta = false;
  double top_kl = 0.0;
  double min_kl = 0.0;
  bool top_minimizes_kl = false;  // recorded, not asserted
};

/// Every size-S support; throws InstanceTooLarge beyond `cap` subsets.
SupportSweep support_sweep(PathPosterior const &post, TransitionMatrix const &pi, int s_budget,
                           std::size_t cap = kMaxSupports);
SupportSweep support_sweep(std::span<double const> observations, TransitionMatrix const &pi,
                           std::vector<RegimeSummary> const &priors, int s_budget,
                           std::size_t cap = kMaxSupports);

struct WeightProbeReport
{
  int trials = 0;
  double kl_renormalised = 0.0;
  double min_gap = 0.0;  // min over trials of KL(p||q_alpha) - KL(p||q_A)
  std::vector<double> argmin_alpha;
  std::vector<double> gaps;
  int negative_findings = 0;  // gaps below -tolerance
  double tolerance = 1e-6;
  double quadrature_error_estimate = 0.0;
};

/// Random simplex weights over a fixed support against the renormalised weights.
/// Negative gaps are reported as found, never clamped.
WeightProbeReport weight_optimality_probe(PathPosterior const &post, TransitionMatrix const &pi,
                                          std::span<std::size_t const> support, int trials,
                                          std::uint64_t seed);

} // namespace shmm
