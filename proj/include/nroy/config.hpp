#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nroy/analysis.hpp"
#include "nroy/serialize.hpp"

namespace nroy {

/**
 * One JSON file drives every command: the parameter space, the targets, and
 * optional sections overriding training, proposal, wave, stopping and
 * analysis defaults. Parsing is strict — an unknown key anywhere is a schema
 * error naming its path — so typos cannot silently fall back to defaults.
 * docs/config-schema.json is the published description of the format.
 */
struct Config {
  ParameterSpace space;
  TargetMap targets;
  std::map<std::string, Discrepancy> discrepancies;
  std::vector<std::string> outputs;      // outputs to emulate; empty = derive
  std::vector<std::string> sim_outputs;  // simulator column names; empty = derive
  std::string simulator;                 // "sirs-ode", "sirs-gillespie[:R]" or "cmd:<shell>"
  std::uint64_t seed = 1;
  int workers = 1;
  bool variance_mode = false;  // emulate replicate means with variance emulators

  TrainingOptions training;
  ProposalOptions proposal;  // cutoff, rank and seed come from the wave level

  // wave-level knobs (the "wave" section)
  std::size_t n_train = 30;
  std::size_t n_valid = 60;
  double cutoff = 3.0;
  int nth = 1;
  double max_type1_fraction = 0.1;
  bool retain_previous = false;
  bool advance_flagged = false;

  StoppingRule stopping;
  SpaceRemovedOptions sweep;           // the "analysis" section
  std::map<std::string, double> fixed; // slice plots: pinned values for unplotted inputs

  /// Assembled options for run_wave, seeds and worker counts threaded through.
  WaveOptions wave_options() const;

  /// Outputs to emulate: the explicit list, else every target key. Empty
  /// only when both are absent.
  std::vector<std::string> emulated_outputs() const;

  /// Column names a simulator batch must produce: the explicit list, else
  /// the bundled epidemic outputs for the built-in simulators, else the
  /// emulated outputs.
  std::vector<std::string> simulator_outputs() const;
};

Config config_from_json(const ojson& j);
Config read_config(const std::string& path);

}  // namespace nroy
