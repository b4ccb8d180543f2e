#pragma once

#include "shmm/baselines.hpp"
#include "shmm/beam.hpp"
#include "shmm/mixture.hpp"
#include "shmm/transition.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace shmm {

/// A streaming predictor scored predict-then-update.
class PrequentialMethod
{
public:
  virtual ~PrequentialMethod() = default;
  /// Predictive for the next observation from the current state.
  virtual PredictiveMixture predict() = 0;
  virtual void update(double y) = 0;
  /// Most probable current regime, or -1 when undefined.
  virtual int top_state() const { return -1; }
  /// Current regime-mean estimates; empty when the method has none.
  virtual std::vector<double> regime_means() const { return {}; }
};

using MethodFactory = std::function<std::unique_ptr<PrequentialMethod>()>;

class ShmmMethod final : public PrequentialMethod
{
public:
  ShmmMethod(TransitionMatrix pi, std::vector<RegimeSummary> const &priors, int s_budget);
  PredictiveMixture predict() override;
  void update(double y) override;
  int top_state() const override;
  std::vector<double> regime_means() const override;
  Beam const &beam() const { return beam_; }

private:
  TransitionMatrix pi_;
  Beam beam_;
  int s_budget_;
};

class OnlineEmMethod final : public PrequentialMethod
{
public:
  OnlineEmMethod(TransitionMatrix pi, double obs_var, std::span<double const> warmup,
                 OnlineEmOptions options = {});
  PredictiveMixture predict() override;
  void update(double y) override;
  int top_state() const override;
  std::vector<double> regime_means() const override;

private:
  TransitionMatrix pi_;
  OnlineEmState state_;
};

class RbpfMethod final : public PrequentialMethod
{
public:
  RbpfMethod(TransitionMatrix pi, std::vector<GaussianConjugateState> const &priors,
             std::size_t n_particles, std::uint64_t seed, double ess_threshold = 0.5);
  PredictiveMixture predict() override;
  void update(double y) override;
  int top_state() const override;
  std::vector<double> regime_means() const override;

private:
  TransitionMatrix pi_;
  RbpfState state_;
};

struct StepRecord
{
  std::size_t t = 0;
  double observation = 0.0;
  double predictive_mean = 0.0;
  double predictive_variance = 0.0;
  double log_score = 0.0;
  int top_path_state = -1;  // regime after consuming y_t
  std::vector<double> regime_means;
};

struct PrequentialResult
{
  std::vector<StepRecord> per_step;
  double mae = 0.0;
  double rmse = 0.0;
  double runtime_seconds = 0.0;
  double runtime_min_seconds = 0.0;  // minimum over timing repeats
  std::string method;
  int s_budget = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::size_t failed_at = 0;
  std::string failure;
};

struct PrequentialOptions
{
  std::string method;
  int s_budget = 0;
  std::uint64_t seed = 0;
  int timing_repeats = 1;
};

/// At each t the predictive is formed before y_t is consumed. Runtime covers the
/// predict/update loop only. A failure at step t returns the records before t.
PrequentialResult run_prequential(MethodFactory const &make, std::span<double const> stream,
                                  PrequentialOptions const &options);

/// MAE and RMSE of predictive means against observations.
std::pair<double, double> point_errors(std::span<StepRecord const> records);

struct MethodSpec
{
  std::string name;
  /// Builds a method for a given budget, seed and stream (the stream is visible for
  /// initialisers that need a warm-up window).
  std::function<std::unique_ptr<PrequentialMethod>(int s_budget, std::uint64_t seed,
                                                   std::span<double const> stream)>
    make;
};

struct SweepCell
{
  std::string method;
  int s_budget = 0;
  std::uint64_t seed = 0;
  double mae = 0.0;
  double rmse = 0.0;
  double runtime_seconds = 0.0;
  double runtime_min_seconds = 0.0;
  bool failed = false;
};

struct AggregateRow
{
  std::string method;
  int s_budget = 0;
  std::size_t n = 0;
  double mae_mean = 0.0, mae_std = 0.0;
  double rmse_mean = 0.0, rmse_std = 0.0;
  double runtime_mean = 0.0, runtime_std = 0.0;
  double runtime_min_mean = 0.0;
};

struct SweepOptions
{
  unsigned threads = 1;
  int timing_repeats = 1;
};

struct SweepResult
{
  std::vector<SweepCell> cells;  // method-major, then S, then seed
  std::vector<AggregateRow> aggregate;
};

/// Cross product of methods x s_values x seeds; `dataset(seed)` yields the stream.
SweepResult sweep_budget(std::vector<MethodSpec> const &methods, std::vector<int> const &s_values,
                         std::vector<std::uint64_t> const &seeds,
                         std::function<std::vector<double>(std::uint64_t)> const &dataset,
                         SweepOptions const &options = {});

/// Mean and sample standard deviation per (method, S); independent of cell order.
std::vector<AggregateRow> aggregate(std::vector<SweepCell> const &cells);

} // namespace shmm
