#pragma once

#include <json.hpp>
#include <string>

#include "nroy/analysis.hpp"
#include "nroy/diagnostics.hpp"
#include "nroy/emulator.hpp"
#include "nroy/param_space.hpp"

namespace nroy {

// Insertion-ordered JSON: serialization emits keys in a fixed order so that
// load -> re-serialize round-trips byte for byte.
using ojson = nlohmann::ordered_json;

ojson space_to_json(const ParameterSpace& space);
ParameterSpace space_from_json(const ojson& j);

ojson target_to_json(const Target& t);
Target target_from_json(const ojson& j);
ojson targets_to_json(const TargetMap& targets);
TargetMap targets_from_json(const ojson& j);

/// Versioned serialization of a trained emulator set: priors, training data
/// and flags. Reloading re-adjusts deterministically, so the reconstruction
/// predicts identically and re-serializes to identical bytes.
ojson emulator_set_to_json(const EmulatorSet& ems);
EmulatorSet emulator_set_from_json(const ojson& j);

void write_emulator_set(const std::string& path, const EmulatorSet& ems);
EmulatorSet read_emulator_set(const std::string& path);

/// Compact validation summary: pass verdict, failing rows and the per-output
/// failure lists. Per-point detail lives in the CSVs written alongside.
ojson diagnostics_to_json(const DiagnosticReport& report);

/// Whole-match persistence under one directory: an index file `state.json`
/// plus one `wave_<k>` directory per wave holding `design.csv`, `runs.csv`,
/// `emulators.json` and `diagnostics.json`. save_wave_state rewrites the
/// index and the directories of waves not yet on disk; reloading restores
/// everything the next wave needs (validation reports stay on disk only —
/// their verdicts live in the index).
void save_wave_state(const std::string& dir, const WaveState& state);
WaveState load_wave_state(const std::string& dir);

/// Strict file helpers: read the whole file or fail with a schema error.
std::string read_text_file(const std::string& path);
ojson parse_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace nroy
