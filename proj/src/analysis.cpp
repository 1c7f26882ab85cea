#include "nroy/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "nroy/common.hpp"
#include "nroy/rng.hpp"

namespace nroy {

namespace {

std::uint64_t sub_seed(std::uint64_t base, std::uint64_t tag) {
  return splitmix64(base ^ splitmix64(tag ^ 0xa0761d6478bd642full));
}

int clamped_nth(int nth, std::size_t n_outputs) {
  return std::min(nth, static_cast<int>(n_outputs));
}

/// Worst nth-maximum implausibility over every completed wave's emulators.
/// The rank is clamped per wave to that wave's output count. Captures the
/// state by reference; valid for the duration of one run_wave call.
AcceptanceMeasure cumulative_measure(const WaveState& state, int nth) {
  std::vector<const EmulatorSet*> sets;
  for (const auto& w : state.waves)
    if (w.has_emulators()) sets.push_back(&w.emulators);
  if (sets.empty()) fail(ErrorKind::argument, "no trained emulators to propose from");
  const TargetMap* targets = &state.targets;
  return [sets, targets, nth](const Eigen::MatrixXd& X) {
    Eigen::VectorXd worst = Eigen::VectorXd::Zero(X.rows());
    for (const EmulatorSet* s : sets)
      worst = worst.cwiseMax(nth_implausibility(*s, X, *targets, clamped_nth(nth, s->size())));
    return worst;
  };
}

/// Cell-centre coordinates of lattice rows [start, start + len) in odometer
/// order, last dimension fastest.
Eigen::MatrixXd lattice_chunk(const ParameterSpace& box, int ppd, std::size_t start,
                              std::size_t len) {
  const std::size_t d = box.dim();
  std::vector<double> lo(d), w(d);
  for (std::size_t j = 0; j < d; ++j) {
    lo[j] = box.range(j).first;
    w[j] = (box.range(j).second - box.range(j).first) / static_cast<double>(ppd);
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < len; ++r) {
    std::size_t t = start + r;
    for (std::size_t j = d; j-- > 0;) {
      const std::size_t cell = t % static_cast<std::size_t>(ppd);
      t /= static_cast<std::size_t>(ppd);
      X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
          lo[j] + (static_cast<double>(cell) + 0.5) * w[j];
    }
  }
  return X;
}

/// Re-adjust every emulator of the set with its correlation length-scales
/// multiplied by u. Stored observation-noise variances are kept as they are.
EmulatorSet scale_correlation_lengths(const EmulatorSet& ems, double u) {
  EmulatorSet out;
  out.variance_mode = ems.variance_mode;
  out.names = ems.names;
  const auto rebuild = [u](const TrainedEmulator& em) {
    EmulatorPrior p = em.prior();
    p.corr.theta *= u;
    return TrainedEmulator(std::move(p), em.train_inputs(), em.train_outputs(),
                           em.obs_noise_var());
  };
  for (const auto& [name, em] : ems.expectation) out.expectation.emplace(name, rebuild(em));
  for (const auto& [name, em] : ems.variance) out.variance.emplace(name, rebuild(em));
  return out;
}

std::size_t checked_lattice_size(std::size_t d, int ppd, double limit, const char* what) {
  const double n = std::pow(static_cast<double>(ppd), static_cast<double>(d));
  if (n > limit)
    fail(ErrorKind::argument, std::string(what) + " lattice would need " + format_double(n) +
                                  " points; reduce the points per dimension");
  return static_cast<std::size_t>(n + 0.5);
}

}  // namespace

// ---------------------------------------------------------------------------
// small enums / validation

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::none: return "none";
    case StopReason::variance_dominated: return "variance_dominated";
    case StopReason::empty_space: return "empty_space";
    case StopReason::enough_matches: return "enough_matches";
    case StopReason::wave_limit: return "wave_limit";
  }
  return "none";
}

const char* to_string(ModifiedQuantity m) {
  switch (m) {
    case ModifiedQuantity::obs_sd: return "obs";
    case ModifiedQuantity::emulator_var: return "var";
    case ModifiedQuantity::corr_length: return "hp";
    case ModifiedQuantity::discrepancy: return "disc";
  }
  return "obs";
}

ModifiedQuantity modified_quantity_from_name(const std::string& name) {
  if (name == "obs") return ModifiedQuantity::obs_sd;
  if (name == "var") return ModifiedQuantity::emulator_var;
  if (name == "hp") return ModifiedQuantity::corr_length;
  if (name == "disc") return ModifiedQuantity::discrepancy;
  fail(ErrorKind::schema,
       "unknown modified quantity '" + name + "'; expected obs, var, hp or disc");
}

void StoppingRule::validate() const {
  if (!(variance_ratio > 0.0)) fail(ErrorKind::argument, "variance ratio must be positive");
  if (max_waves < 1) fail(ErrorKind::argument, "wave limit must be at least one");
}

void WaveOptions::validate() const {
  if (n_train < 2) fail(ErrorKind::argument, "waves need at least two training points");
  if (!(cutoff > 0.0)) fail(ErrorKind::argument, "cutoff must be positive");
  if (nth < 1) fail(ErrorKind::argument, "implausibility rank must be at least one");
  if (!(max_type1_fraction >= 0.0))
    fail(ErrorKind::argument, "classification failure limit must be non-negative");
  training.validate();
  proposal.validate();
}

void SpaceRemovedOptions::validate() const {
  if (ppd < 2) fail(ErrorKind::argument, "lattice needs at least two points per dimension");
  if (!(budget >= 2.0)) fail(ErrorKind::argument, "evaluation budget must be at least two");
  if (multipliers.empty()) fail(ErrorKind::argument, "multiplier sweep must not be empty");
  for (double u : multipliers)
    if (!(u > 0.0)) fail(ErrorKind::argument, "multipliers must be positive");
  if (cutoffs.empty()) fail(ErrorKind::argument, "cutoff sweep must not be empty");
  for (double c : cutoffs)
    if (!(c >= 0.0)) fail(ErrorKind::argument, "cutoffs must be non-negative");
  if (nth < 1) fail(ErrorKind::argument, "implausibility rank must be at least one");
}

void LatticeOptions::validate() const {
  if (ppd < 2) fail(ErrorKind::argument, "lattice needs at least two points per dimension");
  if (!(cutoff >= 0.0)) fail(ErrorKind::argument, "cutoff must be non-negative");
  if (nth < 1) fail(ErrorKind::argument, "implausibility rank must be at least one");
}

// ---------------------------------------------------------------------------
// waves

namespace {

// Shared wave driver. `detail` supplies the warning text for a failed design
// row; null means the generic non-finite-output explanation.
WaveRecord& run_wave_impl(WaveState& state, const BatchSimulator& sim, const WaveOptions& opts,
                          const std::function<std::string(std::size_t)>& detail) {
  opts.validate();
  if (!sim) fail(ErrorKind::argument, "run_wave needs a simulator");
  if (state.space.dim() == 0) fail(ErrorKind::argument, "run_wave needs a parameter space");
  if (state.targets.empty()) fail(ErrorKind::argument, "run_wave needs at least one target");
  if (state.sim_outputs.empty())
    fail(ErrorKind::argument, "run_wave needs the simulator's output names");
  if (state.stopped())
    fail(ErrorKind::argument, std::string("history match already stopped (") +
                                  to_string(state.stop.reason) +
                                  "); clear the stop record to continue");
  if (!state.waves.empty() && state.waves.back().flagged && !opts.advance_flagged)
    fail(ErrorKind::argument,
         "previous wave failed validation; set advance_flagged to continue anyway");

  const int k = static_cast<int>(state.waves.size()) + 1;
  const std::size_t d = state.space.dim();
  const std::size_t m = state.sim_outputs.size();

  std::vector<std::string> q = opts.outputs;
  if (q.empty())
    for (const auto& [name, t] : state.targets) q.push_back(name);
  for (const auto& name : q) {
    if (!state.targets.count(name)) fail(ErrorKind::argument, "no target for output '" + name + "'");
    if (std::find(state.sim_outputs.begin(), state.sim_outputs.end(), name) ==
        state.sim_outputs.end())
      fail(ErrorKind::argument, "simulator does not produce output '" + name + "'");
  }

  WaveRecord rec;
  rec.wave = k;
  rec.outputs = q;

  // ---- propose the design
  AcceptanceMeasure measure;  // waves past the first: reused for retained runs
  if (k == 1) {
    rec.box = state.space;
    rec.design = latin_hypercube(opts.n_train, state.space, opts.seed);
    rec.design.append_rows(
        latin_hypercube(opts.n_valid, state.space, opts.seed ^ 0x9e3779b97f4a7c15ull));
  } else {
    rec.box = enclosing_hyperrectangle(state.waves.back().design);
    measure = cumulative_measure(state, opts.nth);
    ProposalOptions popts = opts.proposal;
    popts.cutoff = opts.cutoff;
    popts.nth = opts.nth;
    popts.seed = sub_seed(opts.seed, 7000 + static_cast<std::uint64_t>(k));
    rec.design = generate_new_design(rec.box, opts.n_train + opts.n_valid, measure, popts);
  }

  rec.runs.input_names = rec.design.input_names;
  rec.runs.inputs.resize(0, static_cast<Eigen::Index>(d));
  rec.runs.output_names = state.sim_outputs;
  rec.runs.outputs.resize(0, static_cast<Eigen::Index>(m));

  if (rec.design.rows() == 0) {
    state.stop = {StopReason::empty_space, k,
                  "wave " + std::to_string(k) + " proposal found no acceptable points"};
    state.waves.push_back(std::move(rec));
    return state.waves.back();
  }

  // ---- simulate every proposed point
  const Eigen::MatrixXd Y = sim(rec.design.inputs);
  if (static_cast<std::size_t>(Y.rows()) != rec.design.rows() ||
      static_cast<std::size_t>(Y.cols()) != m)
    fail(ErrorKind::schema, "simulator returned a " + std::to_string(Y.rows()) + " x " +
                                std::to_string(Y.cols()) + " result; expected " +
                                std::to_string(rec.design.rows()) + " x " + std::to_string(m));
  std::vector<std::size_t> ok_rows;
  ok_rows.reserve(rec.design.rows());
  for (std::size_t r = 0; r < rec.design.rows(); ++r) {
    if (Y.row(static_cast<Eigen::Index>(r)).allFinite()) {
      ok_rows.push_back(r);
    } else {
      rec.failed_rows.push_back(r);
      std::cerr << "warning: simulation failed at design row " << r << ": "
                << (detail ? detail(r) : std::string("no finite result")) << "\n";
    }
  }

  const std::size_t s = ok_rows.size();
  if (s < d + 3)
    fail(ErrorKind::insufficient_data,
         "only " + std::to_string(s) + " of " + std::to_string(rec.design.rows()) +
             " runs completed; too few to train and validate");

  rec.runs.inputs.resize(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(d));
  rec.runs.outputs.resize(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < s; ++i) {
    rec.runs.inputs.row(static_cast<Eigen::Index>(i)) =
        rec.design.inputs.row(static_cast<Eigen::Index>(ok_rows[i]));
    rec.runs.outputs.row(static_cast<Eigen::Index>(i)) =
        Y.row(static_cast<Eigen::Index>(ok_rows[i]));
  }

  // ---- train/validation split
  const std::size_t want_total = opts.n_train + opts.n_valid;
  std::size_t want_train = opts.n_train;
  if (s < want_total) {
    want_train = (s * opts.n_train + want_total / 2) / want_total;
    want_train = std::max(want_train, std::min(s - 1, d + 2));
    want_train = std::min(want_train, s);
  }
  if (k == 1) {
    // the first Latin hypercube is the training block, the second validation
    for (std::size_t i = 0; i < s; ++i)
      (ok_rows[i] < opts.n_train ? rec.train_rows : rec.valid_rows).push_back(i);
    if (rec.train_rows.size() < d + 2)
      fail(ErrorKind::insufficient_data,
           "only " + std::to_string(rec.train_rows.size()) +
               " training runs completed; too few to train");
  } else {
    std::vector<std::size_t> order(s);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(sub_seed(opts.seed, 7100 + static_cast<std::uint64_t>(k)));
    rng.shuffle(order);
    rec.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(want_train));
    rec.valid_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(want_train), order.end());
    std::sort(rec.train_rows.begin(), rec.train_rows.end());
    std::sort(rec.valid_rows.begin(), rec.valid_rows.end());
  }

  // ---- fold in earlier in-region runs
  if (opts.retain_previous && k > 1) {
    Eigen::MatrixXd train_scaled =
        rec.box.scale_rows(rec.runs.take_rows(rec.train_rows).inputs, true);
    std::vector<std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd>> candidates;  // input, outputs
    for (const auto& w : state.waves) {
      for (std::size_t i = 0; i < w.n_fresh(); ++i) {
        const Eigen::RowVectorXd x = w.runs.inputs.row(static_cast<Eigen::Index>(i));
        if (rec.box.contains(x))
          candidates.emplace_back(x, w.runs.outputs.row(static_cast<Eigen::Index>(i)));
      }
    }
    if (!candidates.empty()) {
      Eigen::MatrixXd cand(static_cast<Eigen::Index>(candidates.size()),
                           static_cast<Eigen::Index>(d));
      for (std::size_t i = 0; i < candidates.size(); ++i)
        cand.row(static_cast<Eigen::Index>(i)) = candidates[i].first;
      const Eigen::VectorXd scores = measure(cand);
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!(scores[static_cast<Eigen::Index>(i)] <= opts.cutoff)) continue;
        const Eigen::RowVectorXd u = rec.box.scale(candidates[i].first, true);
        bool duplicate = false;
        for (Eigen::Index t = 0; t < train_scaled.rows() && !duplicate; ++t)
          duplicate = (train_scaled.row(t) - u).norm() < 1e-9;
        if (duplicate) continue;
        rec.train_rows.push_back(rec.runs.rows());
        rec.runs.inputs.conservativeResize(rec.runs.inputs.rows() + 1, Eigen::NoChange);
        rec.runs.inputs.bottomRows(1) = candidates[i].first;
        rec.runs.outputs.conservativeResize(rec.runs.outputs.rows() + 1, Eigen::NoChange);
        rec.runs.outputs.bottomRows(1) = candidates[i].second;
        train_scaled.conservativeResize(train_scaled.rows() + 1, Eigen::NoChange);
        train_scaled.bottomRows(1) = u;
        ++rec.n_retained;
      }
    }
    if (rec.n_retained > 0)
      std::cerr << "Retained " << rec.n_retained << " earlier runs for training.\n";
  }

  // ---- train and validate
  TrainingOptions topts = opts.training;
  topts.seed = sub_seed(opts.seed, 7200 + static_cast<std::uint64_t>(k));
  rec.emulators =
      emulator_from_data(rec.runs.take_rows(rec.train_rows), q, rec.box, topts, opts.discrepancies);

  if (rec.valid_rows.empty()) {
    rec.validation = validation_diagnostics(rec.emulators, &state.targets, nullptr, opts.cutoff);
  } else {
    const RunTable valid_tab = rec.runs.take_rows(rec.valid_rows);
    rec.validation = validation_diagnostics(rec.emulators, &state.targets, &valid_tab, opts.cutoff);
  }

  std::set<Eigen::Index> misclassified;
  for (const auto& diag : rec.validation.per_emulator)
    misclassified.insert(diag.classification_failures.begin(),
                         diag.classification_failures.end());
  const Eigen::Index nv = rec.validation.inputs.rows();
  rec.type1_fraction =
      nv > 0 ? static_cast<double>(misclassified.size()) / static_cast<double>(nv) : 0.0;
  rec.flagged = rec.type1_fraction > opts.max_type1_fraction;
  if (rec.flagged)
    std::cerr << "warning: wave " << k << " misclassified " << format_double(rec.type1_fraction)
              << " of validation points (limit " << format_double(opts.max_type1_fraction)
              << "); inspect before advancing\n";

  state.waves.push_back(std::move(rec));
  return state.waves.back();
}

}  // namespace

WaveRecord& run_wave(WaveState& state, const Simulator& sim, const WaveOptions& opts) {
  if (!sim) fail(ErrorKind::argument, "run_wave needs a simulator");
  const std::size_t m = state.sim_outputs.size();
  // exceptions become failed rows; their messages feed the driver's warnings
  auto messages = std::make_shared<std::map<std::size_t, std::string>>();
  const BatchSimulator batch = [&sim, messages, m](const Eigen::MatrixXd& X) {
    Eigen::MatrixXd Y = Eigen::MatrixXd::Constant(X.rows(), static_cast<Eigen::Index>(m),
                                                  std::numeric_limits<double>::quiet_NaN());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      Eigen::VectorXd y;
      try {
        y = sim(X.row(r));
      } catch (const std::exception& e) {
        (*messages)[static_cast<std::size_t>(r)] = e.what();
        continue;
      }
      if (static_cast<std::size_t>(y.size()) != m)
        fail(ErrorKind::schema, "simulator returned " + std::to_string(y.size()) +
                                    " outputs; expected " + std::to_string(m));
      Y.row(r) = y.transpose();
    }
    return Y;
  };
  return run_wave_impl(state, batch, opts, [messages](std::size_t r) {
    const auto it = messages->find(r);
    return it == messages->end() ? std::string("no finite result") : it->second;
  });
}

WaveRecord& run_wave_batch(WaveState& state, const BatchSimulator& sim, const WaveOptions& opts) {
  if (!sim) fail(ErrorKind::argument, "run_wave needs a simulator");
  return run_wave_impl(state, sim, opts, nullptr);
}

StopRecord check_stopping(const WaveState& state, const StoppingRule& rule) {
  rule.validate();
  if (state.waves.empty()) return {};
  const WaveRecord& last = state.waves.back();
  const int k = last.wave;

  if (last.design.rows() == 0)
    return {StopReason::empty_space, k, "latest proposal found no acceptable points"};

  if (rule.target_matches > 0) {
    std::size_t total = 0;
    for (const auto& w : state.waves) {
      std::vector<std::size_t> fresh(w.n_fresh());
      std::iota(fresh.begin(), fresh.end(), 0);
      total += match_count(w.runs.take_rows(fresh), state.targets).count;
    }
    if (total >= static_cast<std::size_t>(rule.target_matches))
      return {StopReason::enough_matches, k,
              std::to_string(total) + " runs match every target"};
  }

  if (last.has_emulators()) {
    bool dominated = true;
    for (const auto& name : last.outputs) {
      const TrainedEmulator& em = last.emulators.at(name);
      const auto it = state.targets.find(name);
      if (it == state.targets.end()) {
        dominated = false;
        break;
      }
      const double obs_var = it->second.moments().second + em.prior().disc.var();
      const Eigen::VectorXd sd = em.get_var(last.runs.inputs).cwiseMax(0.0).cwiseSqrt();
      if (!(sd.maxCoeff() < rule.variance_ratio * std::sqrt(obs_var))) {
        dominated = false;
        break;
      }
    }
    if (dominated)
      return {StopReason::variance_dominated, k,
              "every emulator sd sits below " + format_double(rule.variance_ratio) +
                  " of the combined observation sd"};
  }

  if (k >= rule.max_waves)
    return {StopReason::wave_limit, k, "wave limit of " + std::to_string(rule.max_waves) + " reached"};
  return {};
}

MatchCount match_count(const RunTable& runs, const TargetMap& targets) {
  if (targets.empty()) fail(ErrorKind::argument, "match count needs at least one target");
  MatchCount out;
  out.mask.assign(runs.rows(), true);
  for (const auto& [name, target] : targets) {
    const int col = runs.output_index(name);
    if (col < 0)
      fail(ErrorKind::schema, "run table has no output '" + name + "' required by a target");
    for (std::size_t r = 0; r < runs.rows(); ++r)
      if (out.mask[r] && !target.matched(runs.outputs(static_cast<Eigen::Index>(r), col)))
        out.mask[r] = false;
  }
  out.count = static_cast<std::size_t>(std::count(out.mask.begin(), out.mask.end(), true));
  return out;
}

// ---------------------------------------------------------------------------
// space removal sweep

SpaceRemoved space_removed(const EmulatorSet& ems, const TargetMap& targets,
                           const SpaceRemovedOptions& opts) {
  opts.validate();
  if (ems.names.empty()) fail(ErrorKind::argument, "space_removed needs at least one emulator");
  const ParameterSpace& box = ems.space();
  const std::size_t d = box.dim();
  const std::size_t n_out = ems.names.size();
  const int nth = clamped_nth(opts.nth, n_out);

  const double lattice_n = std::pow(static_cast<double>(opts.ppd), static_cast<double>(d));
  const bool use_lattice = lattice_n <= opts.budget;
  Eigen::MatrixXd sampled;  // only the Latin-hypercube fallback is materialized
  std::size_t n_points;
  if (use_lattice) {
    n_points = static_cast<std::size_t>(lattice_n + 0.5);
  } else {
    n_points = static_cast<std::size_t>(opts.budget);
    sampled = latin_hypercube(n_points, box, opts.seed).inputs;
  }
  const auto points = [&](std::size_t start, std::size_t len) {
    return use_lattice ? lattice_chunk(box, opts.ppd, start, len)
                       : Eigen::MatrixXd(sampled.middleRows(static_cast<Eigen::Index>(start),
                                                            static_cast<Eigen::Index>(len)));
  };

  const std::size_t n_mult = opts.multipliers.size();
  const std::size_t n_cut = opts.cutoffs.size();
  SpaceRemoved out;
  out.multipliers = opts.multipliers;
  out.cutoffs = opts.cutoffs;
  out.n_points = n_points;
  out.lattice = use_lattice;
  Eigen::MatrixXd kept = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_mult),
                                               static_cast<Eigen::Index>(n_cut));

  // target moments and discrepancy variances, fixed per output
  std::vector<double> z(n_out), vt(n_out), dv(n_out);
  for (std::size_t j = 0; j < n_out; ++j) {
    const auto it = targets.find(ems.names[j]);
    if (it == targets.end())
      fail(ErrorKind::schema, "no target for output '" + ems.names[j] + "'");
    std::tie(z[j], vt[j]) = it->second.moments();
    dv[j] = ems.at(ems.names[j]).prior().disc.var();
  }

  const auto tally = [&](const Eigen::VectorXd& scores, std::size_t mi) {
    for (std::size_t ci = 0; ci < n_cut; ++ci)
      kept(static_cast<Eigen::Index>(mi), static_cast<Eigen::Index>(ci)) +=
          static_cast<double>((scores.array() <= opts.cutoffs[ci]).count());
  };

  if (opts.modified == ModifiedQuantity::corr_length) {
    for (std::size_t mi = 0; mi < n_mult; ++mi) {
      const double u = opts.multipliers[mi];
      const EmulatorSet mod = u == 1.0 ? EmulatorSet() : scale_correlation_lengths(ems, u);
      const EmulatorSet& active = u == 1.0 ? ems : mod;
      for (std::size_t start = 0; start < n_points; start += 4096) {
        const std::size_t len = std::min<std::size_t>(4096, n_points - start);
        tally(nth_implausibility(active, points(start, len), targets, nth), mi);
      }
    }
  } else {
    std::vector<double> row(n_out);
    for (std::size_t start = 0; start < n_points; start += 4096) {
      const std::size_t len = std::min<std::size_t>(4096, n_points - start);
      const Eigen::MatrixXd X = points(start, len);
      Eigen::MatrixXd E(X.rows(), static_cast<Eigen::Index>(n_out));
      Eigen::MatrixXd V(X.rows(), static_cast<Eigen::Index>(n_out));
      for (std::size_t j = 0; j < n_out; ++j) {
        const TrainedEmulator& em = ems.at(ems.names[j]);
        E.col(static_cast<Eigen::Index>(j)) = em.get_exp(X);
        V.col(static_cast<Eigen::Index>(j)) = em.get_var(X);
      }
      Eigen::VectorXd scores(X.rows());
      for (std::size_t mi = 0; mi < n_mult; ++mi) {
        const double u = opts.multipliers[mi];
        for (Eigen::Index r = 0; r < X.rows(); ++r) {
          for (std::size_t j = 0; j < n_out; ++j) {
            const Eigen::Index jj = static_cast<Eigen::Index>(j);
            double var_em = V(r, jj);
            double extra = vt[j] + dv[j];
            switch (opts.modified) {
              case ModifiedQuantity::obs_sd: extra = u * u * vt[j] + dv[j]; break;
              case ModifiedQuantity::emulator_var: var_em = u * V(r, jj); break;
              case ModifiedQuantity::discrepancy: extra = vt[j] + u * u * dv[j]; break;
              case ModifiedQuantity::corr_length: break;
            }
            row[j] = std::abs(E(r, jj) - z[j]) / std::sqrt(var_em + extra);
          }
          std::nth_element(row.begin(), row.begin() + (nth - 1), row.end(),
                           std::greater<double>());
          scores[r] = row[static_cast<std::size_t>(nth - 1)];
        }
        tally(scores, mi);
      }
    }
  }

  out.removed = (1.0 - (kept / static_cast<double>(n_points)).array()).matrix();
  return out;
}

// ---------------------------------------------------------------------------
// lattice summaries

LatticeSummary lattice_summary(const ParameterSpace& box, const AcceptanceMeasure& measure,
                               const LatticeOptions& opts) {
  opts.validate();
  if (!measure) fail(ErrorKind::argument, "lattice summary needs an acceptance measure");
  const std::size_t d = box.dim();
  if (d == 0) fail(ErrorKind::argument, "lattice summary needs a parameter space");
  const std::size_t n = checked_lattice_size(d, opts.ppd, 2e7, "summary");
  const std::size_t ppd = static_cast<std::size_t>(opts.ppd);

  LatticeSummary out;
  out.names = box.names();
  out.ppd = opts.ppd;
  out.cutoff = opts.cutoff;
  out.axes.resize(d);
  std::vector<double> lo(d), w(d);
  for (std::size_t j = 0; j < d; ++j) {
    lo[j] = box.range(j).first;
    w[j] = (box.range(j).second - lo[j]) / static_cast<double>(ppd);
    out.axes[j].resize(static_cast<Eigen::Index>(ppd));
    for (std::size_t c = 0; c < ppd; ++c)
      out.axes[j][static_cast<Eigen::Index>(c)] = lo[j] + (static_cast<double>(c) + 0.5) * w[j];
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      PairPanel p;
      p.i = i;
      p.j = j;
      p.min_score = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(ppd),
                                              static_cast<Eigen::Index>(ppd),
                                              std::numeric_limits<double>::infinity());
      p.optical_depth = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ppd),
                                              static_cast<Eigen::Index>(ppd));
      out.panels.push_back(std::move(p));
    }
  out.depth_1d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d),
                                       static_cast<Eigen::Index>(ppd));

  std::vector<std::size_t> idx(d);
  for (std::size_t start = 0; start < n; start += 4096) {
    const std::size_t len = std::min<std::size_t>(4096, n - start);
    const Eigen::VectorXd scores = measure(lattice_chunk(box, opts.ppd, start, len));
    for (std::size_t r = 0; r < len; ++r) {
      std::size_t t = start + r;
      for (std::size_t j = d; j-- > 0;) {
        idx[j] = t % ppd;
        t /= ppd;
      }
      const double score = scores[static_cast<Eigen::Index>(r)];
      const bool ok = score <= opts.cutoff;
      std::size_t panel = 0;
      for (std::size_t i = 0; i < d; ++i) {
        if (ok) out.depth_1d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(idx[i])) += 1.0;
        for (std::size_t j = i + 1; j < d; ++j, ++panel) {
          PairPanel& p = out.panels[panel];
          const Eigen::Index a = static_cast<Eigen::Index>(idx[i]);
          const Eigen::Index b = static_cast<Eigen::Index>(idx[j]);
          p.min_score(a, b) = std::min(p.min_score(a, b), score);
          if (ok) p.optical_depth(a, b) += 1.0;
        }
      }
    }
  }

  const double slab_pair = static_cast<double>(n) / static_cast<double>(ppd * ppd);
  const double slab_1d = static_cast<double>(n) / static_cast<double>(ppd);
  for (auto& p : out.panels) p.optical_depth /= slab_pair;
  out.depth_1d /= slab_1d;
  return out;
}

LatticeSummary lattice_summary(const EmulatorSet& ems, const TargetMap& targets,
                               const LatticeOptions& opts) {
  opts.validate();
  if (ems.names.empty()) fail(ErrorKind::argument, "lattice summary needs at least one emulator");
  return lattice_summary(ems.space(),
                         implausibility_measure(ems, targets, clamped_nth(opts.nth, ems.size())),
                         opts);
}

}  // namespace nroy
