#pragma once

#include "shmm/beam.hpp"
#include "shmm/datagen.hpp"
#include "shmm/mixture.hpp"
#include "shmm/preq_eval.hpp"
#include "shmm/regime_models.hpp"
#include "shmm/theorem_lab.hpp"
#include "shmm/transition.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace shmm::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

json to_json(TransitionMatrix const &pi);
TransitionMatrix transition_from_json(json const &j);

json to_json(KernelHyper const &h);
KernelHyper kernel_from_json(json const &j, KernelHyper defaults = {});

json to_json(RegimeSummary const &s);
RegimeSummary summary_from_json(json const &j);

json to_json(PredictiveMixture const &m);

/// Self-describing beam snapshot; histories are materialised.
json beam_to_json(Beam const &beam);
/// Rebuilds shared history chains; GP factors are refactorised from stored data.
Beam beam_from_json(json const &j);

json to_json(StepRecord const &r);
json to_json(TruncationReport const &r);
json to_json(SupportSweep const &s);
json to_json(WeightProbeReport const &r);

struct Dataset
{
  json header;
  Series series;
};

/// JSON Lines: header object, then one {t, y, true_regime, t_local} record per step.
void write_dataset(std::filesystem::path const &path, json const &header, Series const &series);
Dataset read_dataset(std::filesystem::path const &path);

/// Shortest round-trip decimal form used in CSV output.
std::string format_double(double v);

} // namespace shmm::io
