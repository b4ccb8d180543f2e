#pragma once

#include "shmm/transition.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace shmm {

/// Observations with ground-truth regimes and time since the last switch.
struct Series
{
  std::vector<double> y;
  std::vector<int> regimes;
  std::vector<double> t_local;

  std::size_t size() const { return y.size(); }
  friend bool operator==(Series const &, Series const &) = default;
};

/// Two-regime drift + oscillation random walk:
///   y_t = y_{t-1} + slope_k dt + w1 sin(w2 t_local) dt + eps_t,  eps_t ~ N(0, sigma^2).
struct GpDgpConfig
{
  std::array<double, 2> slopes{0.15, -0.15};
  double w1 = 0.3;
  double w2 = 0.5;
  double dt = 0.1;
  double sigma = 0.05;
  TransitionMatrix pi = TransitionMatrix::sticky(2, 0.99);
  std::size_t length = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GaussHmmConfig
{
  std::vector<double> means{-3.0, 0.0, 3.0};
  double sigma = 1.0;
  TransitionMatrix pi = TransitionMatrix::sticky(3, 0.98);
  std::size_t length = 2000;
  std::uint64_t seed = 0;

  void validate() const;
};

Series gen_gp_regime_series(GpDgpConfig const &cfg);
Series gen_gaussian_hmm(GaussHmmConfig const &cfg);

} // namespace shmm
