#include "shmm/beam.hpp"

#include "shmm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace shmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Scored
{
  std::size_t parent;
  int regime;
  double log_weight;
};

// weight-descending, then history, then regime index
bool heavier(Scored const &a, Scored const &b, Beam const &beam)
{
  if (a.log_weight != b.log_weight)
    return a.log_weight > b.log_weight;
  if (a.parent != b.parent) {
    int const c = compare_histories(beam.hypotheses[a.parent].history,
                                    beam.hypotheses[b.parent].history);
    if (c != 0)
      return c < 0;
  }
  return a.regime < b.regime;
}

std::vector<Scored> score(Beam const &beam, double y, TransitionMatrix const &pi)
{
  if (!std::isfinite(y))
    throw RejectedInput("non-finite observation at t=" + std::to_string(beam.t + 1));
  int const k = pi.k();
  double const t_next = static_cast<double>(beam.t + 1);
  std::vector<Scored> out;
  out.reserve(beam.size() * static_cast<std::size_t>(k));
  bool any_finite = false;
  for (std::size_t s = 0; s < beam.size(); ++s) {
    auto const &h = beam.hypotheses[s];
    if (static_cast<int>(h.summaries.size()) != k)
      throw InvalidArgument("hypothesis summary count does not match K");
    Eigen::RowVectorXd const row = transition_row(h, pi);
    double const lw = std::log(beam.weights(static_cast<Eigen::Index>(s)));
    for (int j = 0; j < k; ++j) {
      double value = kNegInf;
      if (row(j) > 0.0 && lw > kNegInf)
        value = lw + std::log(row(j)) + predictive_logpdf(*h.summaries[j], t_next, y);
      if (std::isnan(value))
        throw NumericalError("NaN candidate log-weight at t=" + std::to_string(beam.t + 1));
      any_finite = any_finite || value > kNegInf;
      out.push_back({s, j, value});
    }
  }
  if (!any_finite)
    throw DegenerateLikelihood(beam.t + 1, "all candidate likelihoods are zero at t=" +
                                             std::to_string(beam.t + 1));
  return out;
}

PathHypothesis materialize_candidate(Beam const &beam, Scored const &c, double y)
{
  auto const &parent = beam.hypotheses[c.parent];
  PathHypothesis h;
  h.history = extend(parent.history, c.regime);
  h.log_weight = c.log_weight;
  h.summaries = parent.summaries;
  h.summaries[c.regime] = std::make_shared<RegimeSummary const>(
    update(*parent.summaries[c.regime], static_cast<double>(beam.t + 1), y));
  return h;
}

void check_budget(int s_budget)
{
  if (s_budget < 1)
    throw InvalidBudget("hypothesis budget must be >= 1, got " + std::to_string(s_budget));
}

// Normalises retained log weights in place; returns the weight vector.
Eigen::VectorXd normalize(std::vector<PathHypothesis> &kept)
{
  Eigen::ArrayXd lw(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i)
    lw(static_cast<Eigen::Index>(i)) = kept[i].log_weight;
  double const lse = log_sum_exp(lw);
  Eigen::VectorXd w(lw.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    kept[i].log_weight -= lse;
    w(static_cast<Eigen::Index>(i)) = std::exp(kept[i].log_weight);
  }
  return w;
}

} // namespace

PathPtr extend(PathPtr const &parent, int regime)
{
  std::size_t const len = parent ? parent->length + 1 : 1;
  return std::make_shared<PathNode const>(PathNode{regime, parent, len});
}

std::vector<int> materialize(PathPtr const &path)
{
  std::vector<int> out(path ? path->length : 0);
  std::size_t i = out.size();
  for (PathNode const *node = path.get(); node != nullptr; node = node->parent.get())
    out[--i] = node->regime;
  return out;
}

int compare_histories(PathPtr const &a, PathPtr const &b)
{
  if (a == b)
    return 0;
  auto const ha = materialize(a);
  auto const hb = materialize(b);
  if (ha < hb)
    return -1;
  return hb < ha ? 1 : 0;
}

void Beam::validate() const
{
  if (hypotheses.empty() || static_cast<std::size_t>(weights.size()) != hypotheses.size())
    throw InvalidArgument("beam must hold at least one hypothesis with matching weights");
  if (std::abs(weights.sum() - 1.0) > 1e-10)
    throw InvalidArgument("beam weights do not sum to 1");
  for (std::size_t i = 0; i < hypotheses.size(); ++i)
    if (hypotheses[i].length() != t)
      throw InvalidArgument("hypothesis history length differs from beam time index");
}

Beam initial_beam(std::vector<RegimeSummary> const &priors)
{
  if (priors.empty())
    throw InvalidArgument("at least one regime prior is required");
  PathHypothesis root;
  root.log_weight = 0.0;
  for (auto const &p : priors)
    root.summaries.push_back(std::make_shared<RegimeSummary const>(p));
  Beam b;
  b.hypotheses.push_back(std::move(root));
  b.weights = Eigen::VectorXd::Ones(1);
  b.t = 0;
  return b;
}

Eigen::RowVectorXd transition_row(PathHypothesis const &h, TransitionMatrix const &pi)
{
  int const last = h.last_state();
  if (last < 0)
    return pi.first_step();
  return pi.rows.row(last);
}

CandidateSet branch(Beam const &beam, double y, TransitionMatrix const &pi)
{
  auto const scored = score(beam, y, pi);
  CandidateSet out;
  out.t = beam.t + 1;
  out.candidates.reserve(scored.size());
  for (auto const &c : scored) {
    out.candidates.push_back(materialize_candidate(beam, c, y));
    out.parent.push_back(c.parent);
    out.regime.push_back(c.regime);
  }
  return out;
}

Beam truncate_top_s(CandidateSet const &candidates, int s_budget)
{
  check_budget(s_budget);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < candidates.candidates.size(); ++i)
    if (candidates.candidates[i].log_weight > kNegInf)
      order.push_back(i);
  if (order.empty())
    throw DegenerateLikelihood(candidates.t, "no candidate with finite log-weight at t=" +
                                               std::to_string(candidates.t));
  auto const &c = candidates.candidates;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (c[a].log_weight != c[b].log_weight)
      return c[a].log_weight > c[b].log_weight;
    int const cmp = compare_histories(c[a].history, c[b].history);
    if (cmp != 0)
      return cmp < 0;
    return candidates.regime[a] < candidates.regime[b];
  });
  order.resize(std::min(order.size(), static_cast<std::size_t>(s_budget)));
  Beam out;
  out.t = candidates.t;
  for (auto i : order)
    out.hypotheses.push_back(c[i]);
  out.weights = normalize(out.hypotheses);
  return out;
}

Beam step(Beam const &beam, double y, TransitionMatrix const &pi, int s_budget)
{
  check_budget(s_budget);
  auto scored = score(beam, y, pi);
  auto const finite_end = std::partition(scored.begin(), scored.end(),
                                         [](Scored const &c) { return c.log_weight > kNegInf; });
  scored.erase(finite_end, scored.end());
  auto const keep = std::min(scored.size(), static_cast<std::size_t>(s_budget));
  auto const cmp = [&](Scored const &a, Scored const &b) { return heavier(a, b, beam); };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), cmp);
  Beam out;
  out.t = beam.t + 1;
  out.hypotheses.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i)
    out.hypotheses.push_back(materialize_candidate(beam, scored[i], y));
  out.weights = normalize(out.hypotheses);
  return out;
}

PredictiveMixture one_step_predictive(Beam const &beam, TransitionMatrix const &pi)
{
  return multi_step_forecast(beam, pi, 1).front();
}

std::vector<PredictiveMixture> multi_step_forecast(Beam const &beam, TransitionMatrix const &pi,
                                                   int horizon)
{
  if (horizon < 1)
    throw InvalidHorizon("forecast horizon must be >= 1, got " + std::to_string(horizon));
  int const k = pi.k();
  auto const n = static_cast<Eigen::Index>(beam.size()) * k;
  std::vector<PredictiveMixture> out;
  out.reserve(static_cast<std::size_t>(horizon));

  // per-hypothesis regime marginal at horizon h, advanced by one pi multiply per h
  std::vector<Eigen::RowVectorXd> marginal(beam.size());
  for (std::size_t s = 0; s < beam.size(); ++s)
    marginal[s] = transition_row(beam.hypotheses[s], pi);

  for (int h = 1; h <= horizon; ++h) {
    Eigen::VectorXd w(n), mu(n), var(n);
    double const t_query = static_cast<double>(beam.t + static_cast<std::size_t>(h));
    for (std::size_t s = 0; s < beam.size(); ++s) {
      auto const &hyp = beam.hypotheses[s];
      for (int j = 0; j < k; ++j) {
        auto const idx = static_cast<Eigen::Index>(s) * k + j;
        auto const g = predictive(*hyp.summaries[j], t_query);
        w(idx) = beam.weights(static_cast<Eigen::Index>(s)) * marginal[s](j);
        mu(idx) = g.mean;
        var(idx) = g.variance;
      }
      marginal[s] = marginal[s] * pi.rows;
    }
    w /= w.sum();
    out.emplace_back(w, mu, var);
  }
  return out;
}

} // namespace shmm
