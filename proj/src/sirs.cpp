#include "nroy/sirs.hpp"

#include <array>
#include <cmath>

#include "nroy/common.hpp"
#include "nroy/rng.hpp"

namespace nroy {

namespace {

constexpr double kS0 = 950.0, kI0 = 50.0, kR0 = 0.0;

std::array<double, 3> deriv(const SirsParams& p, const std::array<double, 3>& s) {
  const double n = s[0] + s[1] + s[2];
  const double infect = p.aSI * s[0] * s[1] / n;
  const double recover = p.aIR * s[1];
  const double wane = p.aSR * s[2];
  return {wane - infect, infect - recover, recover - wane};
}

}  // namespace

void SirsParams::validate() const {
  if (!(aSI >= 0.0 && aIR >= 0.0 && aSR >= 0.0))
    fail(ErrorKind::argument, "SIRS rates must be non-negative");
}

ParameterSpace sirs_space() {
  return ParameterSpace({"aSI", "aIR", "aSR"}, {{0.1, 0.8}, {0.0, 0.5}, {0.0, 0.05}});
}

TargetMap sirs_targets() {
  return TargetMap{{"nS", Target::interval(580.0, 651.0)},
                   {"nI", Target::value(169.0, 8.45)},
                   {"nR", Target::interval(199.0, 221.0)}};
}

SirsOutputs sirs_deterministic(const SirsParams& p, double t_end, double dt) {
  p.validate();
  if (!(t_end >= 0.0) || !(dt > 0.0)) fail(ErrorKind::argument, "need t_end >= 0 and dt > 0");
  std::array<double, 3> y{kS0, kI0, kR0};
  const long steps = std::lround(t_end / dt);
  for (long s = 0; s < steps; ++s) {
    const auto k1 = deriv(p, y);
    const auto at = [&](const std::array<double, 3>& k, double h) {
      return std::array<double, 3>{y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]};
    };
    const auto k2 = deriv(p, at(k1, dt / 2.0));
    const auto k3 = deriv(p, at(k2, dt / 2.0));
    const auto k4 = deriv(p, at(k3, dt));
    for (int i = 0; i < 3; ++i) y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return {y[0], y[1], y[2]};
}

RunTable sirs_gillespie(const SirsParams& p, double t_end, std::uint64_t seed, int reps) {
  p.validate();
  if (reps < 1) fail(ErrorKind::argument, "need at least one replicate");
  if (!(t_end >= 0.0)) fail(ErrorKind::argument, "need t_end >= 0");

  RunTable table;
  table.input_names = {"aSI", "aIR", "aSR"};
  table.inputs.resize(reps, 3);
  table.output_names = {"nS", "nI", "nR"};
  table.outputs.resize(reps, 3);
  table.replicate.resize(static_cast<std::size_t>(reps));

  const Rng base(seed);
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng = base.stream(static_cast<std::uint64_t>(rep));
    long s = 950, i = 50, r = 0;
    double t = 0.0;
    for (;;) {
      const double n = static_cast<double>(s + i + r);
      const double rate_infect = p.aSI * static_cast<double>(s) * static_cast<double>(i) / n;
      const double rate_recover = p.aIR * static_cast<double>(i);
      const double rate_wane = p.aSR * static_cast<double>(r);
      const double total = rate_infect + rate_recover + rate_wane;
      if (total <= 0.0) break;
      t += -std::log(1.0 - rng.uniform()) / total;
      if (t > t_end) break;
      const double pick = rng.uniform() * total;
      if (pick < rate_infect) {
        --s;
        ++i;
      } else if (pick < rate_infect + rate_recover) {
        --i;
        ++r;
      } else {
        --r;
        ++s;
      }
    }
    table.inputs.row(rep) << p.aSI, p.aIR, p.aSR;
    table.outputs.row(rep) << static_cast<double>(s), static_cast<double>(i),
        static_cast<double>(r);
    table.replicate[static_cast<std::size_t>(rep)] = rep;
  }
  return table;
}

std::pair<RunTable, RunTable> make_wave0(const ParameterSpace& space, std::size_t n_train,
                                         std::size_t n_valid, std::uint64_t seed) {
  const int iS = space.index_of("aSI"), iI = space.index_of("aIR"), iR = space.index_of("aSR");
  if (iS < 0 || iI < 0 || iR < 0)
    fail(ErrorKind::schema, "space must name the parameters aSI, aIR and aSR");

  auto attach = [&](RunTable design) {
    const Eigen::Index n = design.inputs.rows();
    design.output_names = {"nS", "nI", "nR"};
    design.outputs.resize(n, 3);
    for (Eigen::Index row = 0; row < n; ++row) {
      const SirsParams p{design.inputs(row, iS), design.inputs(row, iI), design.inputs(row, iR)};
      const SirsOutputs out = sirs_deterministic(p);
      design.outputs.row(row) << out.nS, out.nI, out.nR;
    }
    return design;
  };

  RunTable train = attach(latin_hypercube(n_train, space, seed));
  RunTable valid = attach(latin_hypercube(n_valid, space, seed ^ 0x9e3779b97f4a7c15ULL));
  return {std::move(train), std::move(valid)};
}

}  // namespace nroy
