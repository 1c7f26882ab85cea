#pragma once

#include <cstdint>
#include <utility>

#include "nroy/emulator.hpp"
#include "nroy/param_space.hpp"

namespace nroy {

// Toy epidemic with waning immunity: susceptible -> infected -> recovered ->
// susceptible, rates per unit time. Bundled as the demonstration simulator.
struct SirsParams {
  double aSI = 0.0;  // infection
  double aIR = 0.0;  // recovery
  double aSR = 0.0;  // waning immunity

  void validate() const;
};

struct SirsOutputs {
  double nS = 0.0;
  double nI = 0.0;
  double nR = 0.0;
};

/// Exploration box aSI in [0.1, 0.8], aIR in [0, 0.5], aSR in [0, 0.05].
ParameterSpace sirs_space();

/// Bundled observation targets: nS in (580, 651); nI 169 with sd 8.45;
/// nR in (199, 221).
TargetMap sirs_targets();

/**
 * Deterministic SIRS run from (S, I, R) = (950, 50, 0): fixed-step RK4,
 * population-conserving by construction, returning the state at t_end.
 * The fixed step keeps results bit-stable across platforms.
 */
SirsOutputs sirs_deterministic(const SirsParams& p, double t_end = 10.0, double dt = 0.01);

/**
 * Stochastic SIRS via the exact stochastic simulation algorithm on integer
 * counts, events infect (rate aSI*S*I/N), recover (aIR*I) and wane (aSR*R).
 * Returns one row per replicate — identical inputs, replicate keys 0..reps-1 —
 * deterministic per (seed, replicate index).
 */
RunTable sirs_gillespie(const SirsParams& p, double t_end, std::uint64_t seed, int reps);

/**
 * Initial training and validation designs: two disjoint seeded Latin
 * hypercubes of n_train and n_valid points with deterministic SIRS outputs
 * attached.
 */
std::pair<RunTable, RunTable> make_wave0(const ParameterSpace& space, std::size_t n_train = 30,
                                         std::size_t n_valid = 60, std::uint64_t seed = 1);

}  // namespace nroy
