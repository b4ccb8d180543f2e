#include "shmm/datagen.hpp"

#include "shmm/errors.hpp"
#include "shmm/random.hpp"

#include <cmath>

namespace shmm {

namespace {

// Regime path z_1..z_T with z_0 ~ initial, plus t_local (0 at a switch step).
void sample_regimes(TransitionMatrix const &pi, std::size_t length, double dt, Rng &rng, Series &out)
{
  int prev = rng.categorical(pi.initial.transpose());
  std::size_t segment_start = 0;
  out.regimes.reserve(length);
  out.t_local.reserve(length);
  for (std::size_t t = 1; t <= length; ++t) {
    int const z = rng.categorical(pi.rows.row(prev));
    if (z != prev)
      segment_start = t;
    out.regimes.push_back(z);
    out.t_local.push_back(static_cast<double>(t - segment_start) * dt);
    prev = z;
  }
}

} // namespace

void GpDgpConfig::validate() const
{
  pi.validate();
  if (pi.k() != 2)
    throw InvalidArgument("GP regime process has exactly two regimes");
  if (!(dt > 0.0))
    throw InvalidArgument("dt must be positive");
  if (!(sigma >= 0.0))
    throw InvalidArgument("sigma must be non-negative");
  if (length < 1)
    throw InvalidArgument("length must be >= 1");
}

void GaussHmmConfig::validate() const
{
  pi.validate();
  if (static_cast<int>(means.size()) != pi.k())
    throw InvalidArgument("number of regime means must equal K");
  if (!(sigma >= 0.0))
    throw InvalidArgument("sigma must be non-negative");
  if (length < 1)
    throw InvalidArgument("length must be >= 1");
}

Series gen_gp_regime_series(GpDgpConfig const &cfg)
{
  cfg.validate();
  Rng rng(cfg.seed);
  Series out;
  sample_regimes(cfg.pi, cfg.length, cfg.dt, rng, out);
  out.y.reserve(cfg.length);
  double y = 0.0;
  for (std::size_t i = 0; i < cfg.length; ++i) {
    double const eps = cfg.sigma * rng.normal();
    y += cfg.slopes[static_cast<std::size_t>(out.regimes[i])] * cfg.dt +
         cfg.w1 * std::sin(cfg.w2 * out.t_local[i]) * cfg.dt + eps;
    out.y.push_back(y);
  }
  return out;
}

Series gen_gaussian_hmm(GaussHmmConfig const &cfg)
{
  cfg.validate();
  Rng rng(cfg.seed);
  Series out;
  sample_regimes(cfg.pi, cfg.length, 1.0, rng, out);
  out.y.reserve(cfg.length);
  for (std::size_t i = 0; i < cfg.length; ++i)
    out.y.push_back(cfg.means[static_cast<std::size_t>(out.regimes[i])] + cfg.sigma * rng.normal());
  return out;
}

} // namespace shmm
