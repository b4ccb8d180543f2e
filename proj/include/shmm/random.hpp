#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace shmm {

inline std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Uniform in (0,1) from 53 random bits; never returns exactly 0.
inline double bits_to_unit(std::uint64_t bits)
{
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Counter-based uniform: a pure function of (seed, stream, counter).
inline double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter)
{
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ stream);
  h = splitmix64(h ^ counter);
  return bits_to_unit(h);
}

/// Inverse-CDF draw from an unnormalised probability row.
inline int sample_index(Eigen::Ref<Eigen::RowVectorXd const> probs, double u)
{
  double const total = probs.sum();
  double acc = 0.0;
  int last_positive = 0;
  for (Eigen::Index j = 0; j < probs.size(); ++j) {
    if (probs(j) <= 0.0)
      continue;
    acc += probs(j);
    last_positive = static_cast<int>(j);
    if (u * total < acc)
      return last_positive;
  }
  return last_positive;
}

/// Seeded stream with library-independent transforms (Box-Muller normals).
class Rng
{
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return bits_to_unit(engine_()); }

  double normal()
  {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double const u1 = uniform();
    double const u2 = uniform();
    double const r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  int categorical(Eigen::Ref<Eigen::RowVectorXd const> probs) { return sample_index(probs, uniform()); }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

} // namespace shmm
