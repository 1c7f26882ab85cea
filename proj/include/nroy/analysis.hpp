#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nroy/diagnostics.hpp"
#include "nroy/emulator.hpp"
#include "nroy/param_space.hpp"
#include "nroy/proposal.hpp"
#include "nroy/training.hpp"

namespace nroy {

/// One model evaluation: a natural-unit input point to a vector of outputs in
/// a declared, fixed order. Throwing reports a failed run; the wave driver
/// records and excludes the point rather than aborting.
using Simulator = std::function<Eigen::VectorXd(const Eigen::RowVectorXd&)>;

/// Whole-design evaluation: an n x d matrix of natural-unit points to an
/// n x m matrix of outputs in the declared order, one row per input row.
/// A row with any non-finite entry reports that point as failed.
using BatchSimulator = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

// ---------------------------------------------------------------------------
// Wave bookkeeping

/// Everything one refinement wave produced. `design` holds the points the
/// wave proposed (inputs only, failed rows included); `runs` the completed
/// simulations in design order, plus any retained earlier-wave rows appended
/// at the end. Row indices in the split and failure vectors refer to `runs`
/// and `design` respectively.
struct WaveRecord {
  int wave = 0;  // 1-based
  ParameterSpace box;
  RunTable design;
  RunTable runs;
  std::vector<std::size_t> failed_rows;  // design rows with no completed run
  std::vector<std::size_t> train_rows;   // runs rows used for training
  std::vector<std::size_t> valid_rows;   // runs rows held out for validation
  std::vector<std::string> outputs;      // outputs emulated this wave
  EmulatorSet emulators;
  DiagnosticReport validation;
  double type1_fraction = 0.0;  // share of validation rows failing classification
  bool flagged = false;         // type1_fraction above the configured limit
  std::size_t n_retained = 0;   // earlier-wave runs folded into training

  bool has_emulators() const { return !emulators.names.empty(); }
  std::size_t n_fresh() const { return runs.rows() - n_retained; }
};

enum class StopReason { none, variance_dominated, empty_space, enough_matches, wave_limit };

const char* to_string(StopReason r);

struct StopRecord {
  StopReason reason = StopReason::none;
  int at_wave = 0;
  std::string detail;
};

/// Cross-wave state of a history match: the exploration box, the targets,
/// the names the simulator's output vector binds to, and the waves run so
/// far. `stop` records a verdict; run_wave sets it only when a proposal
/// comes back empty, otherwise the driver records check_stopping results.
struct WaveState {
  ParameterSpace space;
  TargetMap targets;
  std::vector<std::string> sim_outputs;
  std::vector<WaveRecord> waves;
  StopRecord stop;

  bool stopped() const { return stop.reason != StopReason::none; }
};

/// When to stop adding waves. The variance test asks that, for every
/// emulated output of the latest wave, the predictive sd at every design
/// point sits below `variance_ratio` times the combined observation sd
/// (target sd and discrepancy in quadrature). `target_matches <= 0`
/// disables the match-count test.
struct StoppingRule {
  double variance_ratio = 0.5;
  int max_waves = 3;
  int target_matches = -1;

  void validate() const;
};

struct WaveOptions {
  std::size_t n_train = 30;
  std::size_t n_valid = 60;
  double cutoff = 3.0;
  int nth = 1;                      // order statistic of the proposal measure
  double max_type1_fraction = 0.1;  // flag the wave above this failure share
  bool retain_previous = false;     // reuse earlier in-region runs for training
  bool advance_flagged = false;     // proceed past a flagged previous wave
  std::vector<std::string> outputs;  // outputs to emulate; empty = all targets
  std::map<std::string, Discrepancy> discrepancies;  // attached to the trained priors
  std::uint64_t seed = 1;
  TrainingOptions training;
  ProposalOptions proposal;  // cutoff, rank and seed are overridden per wave

  void validate() const;
};

/**
 * Run the next wave. Wave 1 draws two disjoint Latin hypercubes over the
 * full space (training then validation); later waves shrink the box to the
 * rectangle enclosing the previous wave's design and propose points whose
 * worst nth-maximum implausibility across every completed wave's emulators
 * stays within the cutoff. Every proposed point is simulated; a throwing
 * simulator marks the row failed with a warning and the point is excluded.
 * Survivors are split (proportionally when the proposal came up short),
 * emulators are trained on the training block and validated on the held-out
 * block — leave-one-out when nothing could be held out — and the share of
 * validation rows failing the classification test flags the wave when it
 * exceeds the configured limit. A flagged wave blocks the next call unless
 * `advance_flagged` is set. An empty proposal records an empty wave and
 * marks the state stopped instead of failing.
 *
 * With `retain_previous`, earlier-wave runs that fall inside the new box,
 * pass the current measure at the cutoff and duplicate no training input are
 * appended to the training block.
 *
 * Returns the recorded wave. Progress and warnings go to standard error.
 */
WaveRecord& run_wave(WaveState& state, const Simulator& sim, const WaveOptions& opts = {});

/// run_wave for simulators that evaluate a whole design at once — external
/// processes, vectorized models. Failed points are rows with non-finite
/// entries rather than exceptions; everything else matches run_wave.
WaveRecord& run_wave_batch(WaveState& state, const BatchSimulator& sim,
                           const WaveOptions& opts = {});

/**
 * Stopping verdict for the state as it stands, first match wins:
 * empty proposal; cumulative fresh-run full matches reaching
 * `target_matches`; every latest-wave output variance-dominated; wave count
 * reaching `max_waves`. Does not modify the state.
 */
StopRecord check_stopping(const WaveState& state, const StoppingRule& rule);

/// Full-match census of a run table: rows whose every targeted output lies
/// within its target's three-sigma band (the interval itself for interval
/// targets). A missing output column is a schema error.
struct MatchCount {
  std::size_t count = 0;
  std::vector<bool> mask;  // per runs row
};

MatchCount match_count(const RunTable& runs, const TargetMap& targets);

// ---------------------------------------------------------------------------
// Space-removal summaries

/// Which ingredient of the implausibility a multiplier sweep rescales:
/// the observation sd, the emulator's predictive variance, the correlation
/// length-scales (emulators are re-adjusted), or both discrepancy sds.
enum class ModifiedQuantity { obs_sd, emulator_var, corr_length, discrepancy };

const char* to_string(ModifiedQuantity m);
ModifiedQuantity modified_quantity_from_name(const std::string& name);

struct SpaceRemovedOptions {
  int ppd = 20;          // lattice points per dimension
  double budget = 1e6;   // lattice size cap; past it a Latin hypercube this big is used
  ModifiedQuantity modified = ModifiedQuantity::obs_sd;
  std::vector<double> multipliers = {0.8, 0.9, 1.0, 1.1, 1.2};
  std::vector<double> cutoffs = {3.0};
  int nth = 1;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SpaceRemoved {
  std::vector<double> multipliers;
  std::vector<double> cutoffs;
  Eigen::MatrixXd removed;  // multipliers x cutoffs: fraction of points ruled out
  std::size_t n_points = 0;
  bool lattice = true;  // false when the budget forced the Latin-hypercube fallback
};

/**
 * Fraction of the training box ruled out (nth-maximum implausibility above
 * the cutoff), swept over sensitivity multipliers of one implausibility
 * ingredient and over cutoffs. Evaluation points are cell centres of the
 * ppd-per-dimension lattice, or a seeded Latin hypercube of `budget` points
 * when the lattice would exceed the budget. The multiplier-one row is the
 * unmodified fraction whatever the modified quantity.
 */
SpaceRemoved space_removed(const EmulatorSet& ems, const TargetMap& targets,
                           const SpaceRemovedOptions& opts = {});

// ---------------------------------------------------------------------------
// Lattice visualization summaries

struct LatticeOptions {
  int ppd = 20;
  double cutoff = 3.0;
  int nth = 1;  // used by the emulator-set overload's measure

  void validate() const;
};

/// One parameter pair's panels on the ppd x ppd grid of cell centres;
/// element (a, b) aggregates the lattice slab with parameter i in cell a and
/// parameter j in cell b. Row index a follows parameter i.
struct PairPanel {
  std::size_t i = 0;
  std::size_t j = 0;
  Eigen::MatrixXd min_score;      // minimum measure score over the slab
  Eigen::MatrixXd optical_depth;  // fraction of the slab at or below the cutoff
};

struct LatticeSummary {
  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> axes;  // per-parameter cell-centre coordinates
  std::vector<PairPanel> panels;      // all pairs i < j, lexicographic
  Eigen::MatrixXd depth_1d;           // dim x ppd: acceptable fraction per axis bin
  int ppd = 0;
  double cutoff = 3.0;
};

/**
 * Minimum-score and optical-depth maps for every parameter pair, plus the
 * one-dimensional depth profiles, from one streamed pass over the full
 * cell-centre lattice. The score is the supplied acceptance measure;
 * lattices past twenty million points are refused.
 */
LatticeSummary lattice_summary(const ParameterSpace& box, const AcceptanceMeasure& measure,
                               const LatticeOptions& opts = {});

/** Lattice summary under the nth-maximum implausibility of an emulator set. */
LatticeSummary lattice_summary(const EmulatorSet& ems, const TargetMap& targets,
                               const LatticeOptions& opts = {});

}  // namespace nroy
