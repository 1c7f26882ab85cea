#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "nroy/emulator.hpp"

namespace nroy {

// Per-output validation detail: predicted moments, simulator values,
// implausibilities where a target exists, standardized errors, and the rows
// failing each of the three tests.
struct EmulatorDiagnostics {
  std::string output_name;
  Eigen::VectorXd exp;    // adjusted expectation at the validation inputs
  Eigen::VectorXd sd;     // adjusted predictive sd
  Eigen::VectorXd sim;    // simulator outputs being validated against
  Eigen::VectorXd i_em;   // emulator implausibility (empty without a target)
  Eigen::VectorXd i_sim;  // simulator implausibility (empty without a target)
  Eigen::VectorXd u;      // standardized prediction errors
  std::vector<Eigen::Index> comparison_failures;
  std::vector<Eigen::Index> classification_failures;
  std::vector<Eigen::Index> standardized_failures;
  bool underconfident = false;  // every |U| below 1: suspicious over-caution
};

struct DiagnosticReport {
  std::vector<std::string> input_names;
  Eigen::MatrixXd inputs;  // validation inputs the row indices refer to
  std::vector<EmulatorDiagnostics> per_emulator;
  // union of failing rows over emulators and tests; far-from-observation
  // exemptions applied when targets are known
  std::vector<Eigen::Index> failing_rows;
  Eigen::MatrixXd failing_points;
  bool leave_one_out = false;

  bool passed() const { return failing_rows.empty(); }
};

/**
 * Prediction-accuracy check: a point fails when the simulator value sits
 * more than c predictive sds from the adjusted expectation. With a target,
 * failures where the simulator itself is implausible (I_sim > c) are
 * exempted — mispredictions far from the observation region are harmless.
 */
std::vector<Eigen::Index> comparison_test(const TrainedEmulator& em, const RunTable& validation,
                                          double c = 3.0, const Target* target = nullptr);

/**
 * Type-I screen: points the emulator would rule out (I_em > cutoff) that the
 * simulator keeps (I_sim <= cutoff). These are the dangerous mistakes — a
 * match cut from the search by emulation error alone.
 */
std::vector<Eigen::Index> classification_test(const TrainedEmulator& em, const RunTable& validation,
                                              const Target& target, double cutoff = 3.0);

struct StandardizedErrors {
  Eigen::VectorXd u;
  std::vector<Eigen::Index> failures;  // |U| > 3
  bool underconfident = false;         // max |U| < 1
};

/** (f(x) - E_D[f(x)]) / sd_D[f(x)] per validation row. */
StandardizedErrors standardized_errors(const TrainedEmulator& em, const RunTable& validation);

/**
 * Full three-test suite over an emulator set. Without a validation table the
 * emulators are cross-validated leave-one-out on their own training runs;
 * past 50 runs the held-out moments come from precision-matrix downdates
 * rather than per-fold re-adjustment. Classification needs targets and is
 * skipped without them. For variance-mode sets the validation table is
 * aggregated: expectation emulators are checked against replicate means and
 * variance emulators against sample variances.
 */
DiagnosticReport validation_diagnostics(const EmulatorSet& ems, const TargetMap* targets = nullptr,
                                        const RunTable* validation = nullptr, double c = 3.0);

/** One CSV of per-point test data per (output, test), named <output>_<test>.csv. */
void write_diagnostic_csvs(const DiagnosticReport& report, const std::string& dir);

}  // namespace nroy
