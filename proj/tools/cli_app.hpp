#pragma once

#include "shmm/datagen.hpp"
#include "shmm/io.hpp"
#include "shmm/preq_eval.hpp"
#include "shmm/regime_models.hpp"
#include "shmm/transition.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace shmm::cli {

using io::json;

enum ExitCode : int
{
  kOk = 0,
  kConfigError = 2,
  kNumericalFailure = 3,
  kTheoremFailure = 4,
};

/// Invalid configuration; `line` is 1-based in the config text, 0 when unknown.
class ConfigError : public std::runtime_error
{
public:
  ConfigError(std::string const &what, int line) : std::runtime_error(what), line(line) {}
  int line;
};

/// Full default configuration document.
json default_config();

/// Defaults merged with the user document, validated.
struct ExperimentConfig
{
  json resolved;
  std::string source_text;

  std::string experiment() const { return resolved.at("experiment").get<std::string>(); }
  std::string dataset_kind() const;
  std::uint64_t seed() const { return resolved.at("seed").get<std::uint64_t>(); }
  int s_budget() const { return resolved.at("s_budget").get<int>(); }

  GaussHmmConfig gauss_hmm(std::uint64_t seed) const;
  GpDgpConfig gp_hmm(std::uint64_t seed) const;
  /// Transition matrix of the configured dataset (the filters' known prior).
  TransitionMatrix transition() const;
  int regime_count() const { return transition().k(); }
  /// Regime priors for the SHMM (conjugate Gaussian or GP depending on dataset).
  /// `stream` feeds the "warmup" prior-mean mode; other modes ignore it.
  std::vector<RegimeSummary> shmm_priors(std::span<double const> stream = {}) const;
  /// Conjugate priors from a method block ("/methods/shmm" or "/methods/rbpf").
  std::vector<GaussianConjugateState> gaussian_priors(std::string const &block,
                                                      std::span<double const> stream = {}) const;
  std::vector<double> prior_means(std::string const &block, std::span<double const> stream) const;
  double emission_variance() const;

  /// Throws ConfigError pointing at the line of `key` in the source text.
  [[noreturn]] void fail(std::string const &key, std::string const &message) const;
};

ExperimentConfig parse_config(std::string const &text, std::optional<std::uint64_t> seed_override = {});
ExperimentConfig load_config(std::filesystem::path const &path,
                             std::optional<std::uint64_t> seed_override = {});

/// Generates the configured dataset for `seed`.
Series generate_series(ExperimentConfig const &cfg, std::uint64_t seed);
json dataset_header(ExperimentConfig const &cfg, std::uint64_t seed);

/// Method builders keyed by name: "shmm", "online_em", "rbpf". The builders keep a
/// reference to `cfg`.
MethodSpec method_spec(ExperimentConfig const &cfg, std::string const &name);

std::vector<std::uint64_t> seed_list(ExperimentConfig const &cfg, std::string const &block);

/// Raw per-(method, seed) table; runtime written as NA when timing is off.
void write_results_csv(std::filesystem::path const &path, std::vector<SweepCell> const &cells,
                       json const &meta, bool timing);
void write_aggregate_csv(std::filesystem::path const &path, std::vector<AggregateRow> const &rows,
                         json const &meta, bool timing);

struct VerifyOutcome
{
  json report;
  bool all_bounds_hold = true;
};

/// Runs the theorem checks over the configured instance grid.
VerifyOutcome run_verify(ExperimentConfig const &cfg, unsigned threads);

/// Entry point; returns the process exit code.
int run(std::vector<std::string> const &args, std::ostream &out, std::ostream &err);

} // namespace shmm::cli
