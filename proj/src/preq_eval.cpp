#include "shmm/preq_eval.hpp"

#include "shmm/errors.hpp"
#include "shmm/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

namespace shmm {

ShmmMethod::ShmmMethod(TransitionMatrix pi, std::vector<RegimeSummary> const &priors, int s_budget)
  : pi_(std::move(pi)), beam_(initial_beam(priors)), s_budget_(s_budget)
{
  if (s_budget < 1)
    throw InvalidBudget("hypothesis budget must be >= 1");
  if (static_cast<int>(priors.size()) != pi_.k())
    throw InvalidArgument("regime prior count must equal K");
}

PredictiveMixture ShmmMethod::predict() { return one_step_predictive(beam_, pi_); }

void ShmmMethod::update(double y) { beam_ = step(beam_, y, pi_, s_budget_); }

int ShmmMethod::top_state() const { return beam_.hypotheses.front().last_state(); }

std::vector<double> ShmmMethod::regime_means() const
{
  std::vector<double> out;
  for (auto const &s : beam_.hypotheses.front().summaries)
    out.push_back(predictive(*s, static_cast<double>(beam_.t + 1)).mean);
  return out;
}

OnlineEmMethod::OnlineEmMethod(TransitionMatrix pi, double obs_var, std::span<double const> warmup,
                               OnlineEmOptions options)
  : pi_(std::move(pi)), state_(online_em_init(pi_, obs_var, warmup, options))
{
}

PredictiveMixture OnlineEmMethod::predict() { return online_em_predictive(state_, pi_); }

void OnlineEmMethod::update(double y) { state_ = online_em_step(state_, y, pi_); }

int OnlineEmMethod::top_state() const
{
  Eigen::Index i = 0;
  state_.filter_probs.maxCoeff(&i);
  return static_cast<int>(i);
}

std::vector<double> OnlineEmMethod::regime_means() const
{
  return {state_.mean_estimates.data(), state_.mean_estimates.data() + state_.mean_estimates.size()};
}

RbpfMethod::RbpfMethod(TransitionMatrix pi, std::vector<GaussianConjugateState> const &priors,
                       std::size_t n_particles, std::uint64_t seed, double ess_threshold)
  : pi_(std::move(pi)), state_(rbpf_init(priors, n_particles, seed, ess_threshold))
{
}

PredictiveMixture RbpfMethod::predict() { return rbpf_predictive(state_, pi_); }

void RbpfMethod::update(double y) { state_ = rbpf_step(state_, y, pi_); }

int RbpfMethod::top_state() const
{
  Eigen::Index i = 0;
  state_.weights.maxCoeff(&i);
  return state_.particles[static_cast<std::size_t>(i)].last_state;
}

std::vector<double> RbpfMethod::regime_means() const
{
  Eigen::Index i = 0;
  state_.weights.maxCoeff(&i);
  std::vector<double> out;
  for (auto const &s : state_.particles[static_cast<std::size_t>(i)].summaries)
    out.push_back(s.post_mean);
  return out;
}

std::pair<double, double> point_errors(std::span<StepRecord const> records)
{
  if (records.empty())
    return {0.0, 0.0};
  double abs_sum = 0.0, sq_sum = 0.0;
  for (auto const &r : records) {
    double const e = r.observation - r.predictive_mean;
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  double const n = static_cast<double>(records.size());
  return {abs_sum / n, std::sqrt(sq_sum / n)};
}

PrequentialResult run_prequential(MethodFactory const &make, std::span<double const> stream,
                                  PrequentialOptions const &options)
{
  if (stream.empty())
    throw InvalidArgument("prequential stream must be nonempty");
  PrequentialResult res;
  res.method = options.method;
  res.s_budget = options.s_budget;
  res.seed = options.seed;
  res.per_step.reserve(stream.size());

  using clock = std::chrono::steady_clock;
  auto method = make();
  auto const start = clock::now();
  for (std::size_t i = 0; i < stream.size(); ++i) {
    try {
      auto const mix = method->predict();
      auto const mom = mixture_moments(mix);
      StepRecord r;
      r.t = i + 1;
      r.observation = stream[i];
      r.predictive_mean = mom.mean;
      r.predictive_variance = mom.variance;
      r.log_score = log_density(mix, stream[i]);
      method->update(stream[i]);
      r.top_path_state = method->top_state();
      r.regime_means = method->regime_means();
      res.per_step.push_back(std::move(r));
    } catch (std::exception const &e) {
      res.failed = true;
      res.failed_at = i + 1;
      res.failure = e.what();
      break;
    }
  }
  res.runtime_seconds = std::chrono::duration<double>(clock::now() - start).count();
  res.runtime_min_seconds = res.runtime_seconds;

  for (int rep = 1; rep < options.timing_repeats && !res.failed; ++rep) {
    auto m = make();
    auto const t0 = clock::now();
    for (double y : stream) {
      auto const mix = m->predict();
      auto const mom = mixture_moments(mix);
      volatile double sink = mom.mean + log_density(mix, y);
      (void)sink;
      m->update(y);
    }
    res.runtime_min_seconds =
      std::min(res.runtime_min_seconds, std::chrono::duration<double>(clock::now() - t0).count());
  }

  auto const [mae, rmse] = point_errors(res.per_step);
  res.mae = mae;
  res.rmse = rmse;
  return res;
}

SweepResult sweep_budget(std::vector<MethodSpec> const &methods, std::vector<int> const &s_values,
                         std::vector<std::uint64_t> const &seeds,
                         std::function<std::vector<double>(std::uint64_t)> const &dataset,
                         SweepOptions const &options)
{
  struct Job
  {
    std::size_t method;
    int s;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t m = 0; m < methods.size(); ++m)
    for (int s : s_values)
      for (auto seed : seeds)
        jobs.push_back({m, s, seed});

  std::map<std::uint64_t, std::vector<double>> streams;
  for (auto seed : seeds)
    streams.emplace(seed, dataset(seed));

  SweepResult out;
  out.cells.resize(jobs.size());
  parallel_for(jobs.size(), options.threads, [&](std::size_t i) {
    auto const &job = jobs[i];
    auto const &spec = methods[job.method];
    auto const &stream = streams.at(job.seed);
    MethodFactory factory = [&] { return spec.make(job.s, job.seed, stream); };
    auto const r = run_prequential(factory, stream,
                                   {spec.name, job.s, job.seed, options.timing_repeats});
    out.cells[i] = {spec.name, job.s, job.seed, r.mae, r.rmse, r.runtime_seconds, r.runtime_min_seconds,
                    r.failed};
  });
  out.aggregate = aggregate(out.cells);
  return out;
}

std::vector<AggregateRow> aggregate(std::vector<SweepCell> const &cells)
{
  // group key order follows first appearance; values sorted by seed inside a group
  std::vector<std::pair<std::string, int>> keys;
  std::map<std::pair<std::string, int>, std::vector<SweepCell>> groups;
  for (auto const &c : cells) {
    auto key = std::make_pair(c.method, c.s_budget);
    if (!groups.contains(key))
      keys.push_back(key);
    groups[key].push_back(c);
  }
  auto mean_std = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v)
      sum += x;
    double const mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v)
      ss += (x - mean) * (x - mean);
    double const sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    return std::make_pair(mean, sd);
  };
  std::vector<AggregateRow> rows;
  for (auto const &key : keys) {
    auto const &g = groups[key];
    std::vector<double> mae, rmse, rt, rtmin;
    for (auto const &c : g) {
      mae.push_back(c.mae);
      rmse.push_back(c.rmse);
      rt.push_back(c.runtime_seconds);
      rtmin.push_back(c.runtime_min_seconds);
    }
    AggregateRow row;
    row.method = key.first;
    row.s_budget = key.second;
    row.n = g.size();
    std::tie(row.mae_mean, row.mae_std) = mean_std(mae);
    std::tie(row.rmse_mean, row.rmse_std) = mean_std(rmse);
    std::tie(row.runtime_mean, row.runtime_std) = mean_std(rt);
    row.runtime_min_mean = mean_std(rtmin).first;
    rows.push_back(row);
  }
  return rows;
}

} // namespace shmm
