#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "nroy/emulator.hpp"
#include "nroy/param_space.hpp"

namespace nroy {

// Per-point acceptance scores over rows of natural-unit points; a point is
// accepted when its score does not exceed the cutoff in force. Scores must be
// deterministic and are compared against several cutoffs during a proposal,
// so binary regions encode as 0 (inside) / infinity (outside). The default
// measure is nth-maximum implausibility across the emulator set.
using AcceptanceMeasure = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

AcceptanceMeasure implausibility_measure(const EmulatorSet& ems, const TargetMap& targets,
                                         int nth = 1);

struct ProposalOptions {
  double cutoff = 3.0;
  int nth = 1;                      // order statistic for the default measure
  std::size_t lhd_multiplier = 10;  // initial design size = multiplier * n, capped
  std::size_t lhd_cap = 5000;
  std::size_t n_lines = 20;
  std::size_t points_per_line = 20;
  std::size_t burn_in_batch = 100;  // candidates per ellipsoid-radius tuning step
  double oversample = 1.25;         // candidate pool target, as a multiple of n
  int resample = 1;
  std::uint64_t seed = 1;
  // descending absolute cutoffs tried when the requested one yields nothing;
  // empty derives cutoff * {2, 1.5, 1.25}
  std::vector<double> ladder;

  void validate() const;
};

/** Latin hypercube over the box, keeping rows the measure accepts at the
 * cutoff. An empty result is not an error. */
RunTable lhd_reject(const ParameterSpace& box, std::size_t size, const AcceptanceMeasure& measure,
                    double cutoff, std::uint64_t seed);

/**
 * Boundary detection: pairs of accepted points are drawn with probability
 * proportional to their separation; the line through each pair is extended to
 * the box faces and evaluated at equally spaced stops. A stop is retained
 * when it is accepted and either neighbours a rejected stop or terminates the
 * ray on the box boundary. Fewer than two input points yield an empty table
 * with a warning.
 */
RunTable line_sample(const RunTable& accepted, const ParameterSpace& box,
                     const AcceptanceMeasure& measure, double cutoff, const ProposalOptions& opts,
                     std::uint64_t seed);

struct WeightedPoints {
  Eigen::MatrixXd points;   // natural units
  Eigen::VectorXd weights;  // 1 / number of ellipsoids containing the point
};

/**
 * Mixture-of-ellipsoids sampler: every seed point centres an ellipsoid shaped
 * like the seed covariance and scaled so its longest semi-axis reaches the
 * nearest box face; a burn-in phase tunes a shared radius factor until the
 * measure accepts between 10% and 80% of candidates. Accepted candidates
 * carry weight 1/(containing ellipsoids) so overlap regions are not
 * over-represented. A degenerate seed covariance falls back to axis-aligned
 * shapes from the box with a warning.
 */
WeightedPoints ellipsoid_importance_sample(const Eigen::MatrixXd& seeds, const ParameterSpace& box,
                                           const AcceptanceMeasure& measure, double cutoff,
                                           std::size_t n_wanted, const ProposalOptions& opts,
                                           std::uint64_t seed);

/**
 * Full proposal pipeline over an explicit box and measure: rejection
 * sampling, boundary line sampling, ellipsoid importance sampling, optional
 * resample passes, and a final maximin thinning to n_points. When the
 * requested cutoff yields nothing the search climbs a ladder of looser
 * cutoffs for a foothold and tightens back down, reusing survivors as seeds.
 * Returns an inputs-only table; fewer than n_points rows (with a warning)
 * means the region is too small, zero rows that it was not found at all.
 * Stage progress goes to standard error.
 */
RunTable generate_new_design(const ParameterSpace& box, std::size_t n_points,
                             const AcceptanceMeasure& measure, const ProposalOptions& opts = {});

/** Pipeline over trained emulators: box = training space, measure =
 * nth-maximum implausibility against the targets. */
RunTable generate_new_design(const EmulatorSet& ems, std::size_t n_points, const TargetMap& targets,
                             const ProposalOptions& opts = {});

}  // namespace nroy
