#pragma once

#include "shmm/mixture.hpp"
#include "shmm/regime_models.hpp"
#include "shmm/transition.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <vector>

namespace shmm {

/// One link of an append-only regime history. Children point at their parent so
/// branching never copies a history.
struct PathNode
{
  int regime;
  std::shared_ptr<PathNode const> parent;
  std::size_t length;
};

using PathPtr = std::shared_ptr<PathNode const>;
using SummaryPtr = std::shared_ptr<RegimeSummary const>;

PathPtr extend(PathPtr const &parent, int regime);
/// Full history, oldest first. Empty for the root.
std::vector<int> materialize(PathPtr const &path);
/// Three-way lexicographic comparison of two histories.
int compare_histories(PathPtr const &a, PathPtr const &b);

struct PathHypothesis
{
  PathPtr history;  // null at t = 0
  double log_weight = 0.0;
  std::vector<SummaryPtr> summaries;

  /// z_t, or -1 for the root hypothesis.
  int last_state() const { return history ? history->regime : -1; }
  std::size_t length() const { return history ? history->length : 0; }
  std::vector<int> path() const { return materialize(history); }
};

/// Normalised set of retained hypotheses, weight-descending.
struct Beam
{
  std::vector<PathHypothesis> hypotheses;
  Eigen::VectorXd weights;
  std::size_t t = 0;

  std::size_t size() const { return hypotheses.size(); }
  void validate() const;
};

/// Candidate extensions of a beam with unnormalised log weights.
struct CandidateSet
{
  std::vector<PathHypothesis> candidates;
  std::vector<std::size_t> parent;  // index into the source beam
  std::vector<int> regime;
  std::size_t t = 0;  // time index of the observation that produced them
};

/// Single root hypothesis carrying the regime priors; z_0 is marginalised via pi.initial.
Beam initial_beam(std::vector<RegimeSummary> const &priors);

/// Transition row used when extending `h`: pi row of z_t, or initial^T pi at the root.
Eigen::RowVectorXd transition_row(PathHypothesis const &h, TransitionMatrix const &pi);

/// All S x K extensions, each with its own regime summary updated by `y`.
CandidateSet branch(Beam const &beam, double y, TransitionMatrix const &pi);

/// Keeps the `s_budget` heaviest positive-mass candidates and renormalises.
/// Ties: lexicographically smaller history first.
Beam truncate_top_s(CandidateSet const &candidates, int s_budget);

/// branch followed by truncate_top_s; only retained candidates are updated.
Beam step(Beam const &beam, double y, TransitionMatrix const &pi, int s_budget);

/// p(y_{t+1} | Y_t) under the beam: S x K components.
PredictiveMixture one_step_predictive(Beam const &beam, TransitionMatrix const &pi);

/// Mixtures for horizons 1..horizon with summaries frozen at time t.
std::vector<PredictiveMixture> multi_step_forecast(Beam const &beam, TransitionMatrix const &pi,
                                                   int horizon);

} // namespace shmm
