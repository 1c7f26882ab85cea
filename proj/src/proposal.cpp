#include "nroy/proposal.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <set>

#include "nroy/common.hpp"
#include "nroy/rng.hpp"

namespace nroy {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t sub_seed(std::uint64_t base, std::uint64_t tag) {
  return splitmix64(base ^ splitmix64(tag ^ 0xa0761d6478bd642full));
}

Eigen::MatrixXd clamp_unit(Eigen::MatrixXd U) {
  return U.cwiseMax(-1.0).cwiseMin(1.0);
}

RunTable inputs_table(const ParameterSpace& box, Eigen::MatrixXd natural) {
  RunTable t;
  t.input_names = box.names();
  t.inputs = std::move(natural);
  return t;
}

// Stops along the ray through scaled points a -> b, extended to the box
// faces, as ray parameters relative to a (unit direction u).
std::pair<double, double> ray_span(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& u) {
  double t0 = -kInf, t1 = kInf;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    if (std::abs(u[k]) < 1e-14) continue;
    double lo = (-1.0 - a[k]) / u[k];
    double hi = (1.0 - a[k]) / u[k];
    if (lo > hi) std::swap(lo, hi);
    t0 = std::max(t0, lo);
    t1 = std::min(t1, hi);
  }
  return {t0, t1};
}

struct Pool {
  Eigen::MatrixXd pts;     // natural units
  Eigen::VectorXd scores;  // cached measure values (measures are deterministic)

  Eigen::Index size() const { return pts.rows(); }

  void append(const Eigen::MatrixXd& p, const Eigen::VectorXd& s) {
    if (p.rows() == 0) return;
    const Eigen::Index old = pts.rows();
    pts.conservativeResize(old + p.rows(), p.cols() == 0 ? pts.cols() : p.cols());
    pts.bottomRows(p.rows()) = p;
    scores.conservativeResize(old + p.rows());
    scores.tail(p.rows()) = s;
  }

  Pool filtered(double cutoff) const {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < scores.size(); ++i)
      if (scores[i] <= cutoff) keep.push_back(i);
    Pool out;
    out.pts.resize(static_cast<Eigen::Index>(keep.size()), pts.cols());
    out.scores.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
      out.pts.row(static_cast<Eigen::Index>(k)) = pts.row(keep[k]);
      out.scores[static_cast<Eigen::Index>(k)] = scores[keep[k]];
    }
    return out;
  }

  Pool take(const std::vector<std::size_t>& idx) const {
    Pool out;
    out.pts.resize(static_cast<Eigen::Index>(idx.size()), pts.cols());
    out.scores.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      out.pts.row(static_cast<Eigen::Index>(k)) = pts.row(static_cast<Eigen::Index>(idx[k]));
      out.scores[static_cast<Eigen::Index>(k)] = scores[static_cast<Eigen::Index>(idx[k])];
    }
    return out;
  }

  // drop exact duplicate rows, keeping first occurrences
  void dedup() {
    std::set<std::string> seen;
    std::vector<std::size_t> keep;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      const Eigen::RowVectorXd r = pts.row(i);  // contiguous copy for the byte key
      std::string key(reinterpret_cast<const char*>(r.data()),
                      static_cast<std::size_t>(r.size()) * sizeof(double));
      if (seen.insert(key).second) keep.push_back(static_cast<std::size_t>(i));
    }
    if (keep.size() != static_cast<std::size_t>(pts.rows())) *this = take(keep);
  }
};

}  // namespace

void ProposalOptions::validate() const {
  if (!(cutoff > 0.0)) fail(ErrorKind::argument, "proposal cutoff must be positive");
  if (nth < 1) fail(ErrorKind::argument, "nth-maximum order must be at least 1");
  if (lhd_multiplier < 1 || lhd_cap < 1 || n_lines < 1 || points_per_line < 2 ||
      burn_in_batch < 1)
    fail(ErrorKind::argument, "proposal sizes must be at least 1 (2 for points per line)");
  if (!(oversample >= 1.0)) fail(ErrorKind::argument, "oversample factor must be at least 1");
  if (resample < 0) fail(ErrorKind::argument, "resample count must be non-negative");
  for (double r : ladder)
    if (!(r > 0.0)) fail(ErrorKind::argument, "ladder cutoffs must be positive");
}

AcceptanceMeasure implausibility_measure(const EmulatorSet& ems, const TargetMap& targets,
                                         int nth) {
  return [&ems, targets, nth](const Eigen::MatrixXd& X) {
    return nth_implausibility(ems, X, targets, nth);
  };
}

RunTable lhd_reject(const ParameterSpace& box, std::size_t size, const AcceptanceMeasure& measure,
                    double cutoff, std::uint64_t seed) {
  const RunTable design = latin_hypercube(size, box, seed);
  const Eigen::VectorXd scores = measure(design.inputs);
  std::vector<std::size_t> keep;
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    if (scores[i] <= cutoff) keep.push_back(static_cast<std::size_t>(i));
  return design.take_rows(keep);
}

RunTable line_sample(const RunTable& accepted, const ParameterSpace& box,
                     const AcceptanceMeasure& measure, double cutoff, const ProposalOptions& opts,
                     std::uint64_t seed) {
  const Eigen::Index n = accepted.inputs.rows();
  if (n < 2) {
    std::cerr << "warning: line sampling needs at least two accepted points\n";
    return inputs_table(box, Eigen::MatrixXd(0, static_cast<Eigen::Index>(box.dim())));
  }
  const Eigen::MatrixXd U = box.scale_rows(accepted.aligned_to(box).inputs, true);
  Rng rng(seed);

  // candidate pairs, then distance-proportional selection among them
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  const std::size_t all = static_cast<std::size_t>(n) * (n - 1) / 2;
  if (all <= 2000) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  } else {
    std::set<std::pair<Eigen::Index, Eigen::Index>> chosen;
    while (chosen.size() < 2000) {
      Eigen::Index i = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)));
      Eigen::Index j = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)));
      if (i == j) continue;
      chosen.emplace(std::min(i, j), std::max(i, j));
    }
    pairs.assign(chosen.begin(), chosen.end());
  }
  std::vector<double> cum(pairs.size());
  double total = 0.0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    total += (U.row(pairs[p].first) - U.row(pairs[p].second)).norm();
    cum[p] = total;
  }
  if (!(total > 0.0)) {
    std::cerr << "warning: all accepted points coincide; no rays to sample\n";
    return inputs_table(box, Eigen::MatrixXd(0, U.cols()));
  }

  const std::size_t ppl = opts.points_per_line;
  Eigen::MatrixXd stops(static_cast<Eigen::Index>(opts.n_lines * ppl), U.cols());
  for (std::size_t l = 0; l < opts.n_lines; ++l) {
    const double pick = rng.uniform() * total;
    const std::size_t p = static_cast<std::size_t>(
        std::lower_bound(cum.begin(), cum.end(), pick) - cum.begin());
    const auto [ia, ib] = pairs[std::min(p, pairs.size() - 1)];
    const Eigen::RowVectorXd a = U.row(ia);
    Eigen::RowVectorXd u = U.row(ib) - a;
    u /= u.norm();
    const auto [t0, t1] = ray_span(a, u);
    for (std::size_t s = 0; s < ppl; ++s) {
      const double t = t0 + (t1 - t0) * static_cast<double>(s) / static_cast<double>(ppl - 1);
      stops.row(static_cast<Eigen::Index>(l * ppl + s)) = a + t * u;
    }
  }
  const Eigen::MatrixXd natural = box.unscale_rows(clamp_unit(stops));
  const Eigen::VectorXd scores = measure(natural);

  std::vector<std::size_t> keep;
  for (std::size_t l = 0; l < opts.n_lines; ++l) {
    for (std::size_t s = 0; s < ppl; ++s) {
      const std::size_t i = l * ppl + s;
      if (!(scores[static_cast<Eigen::Index>(i)] <= cutoff)) continue;
      const bool at_end = s == 0 || s == ppl - 1;
      const bool rejected_neighbour =
          (s > 0 && !(scores[static_cast<Eigen::Index>(i - 1)] <= cutoff)) ||
          (s + 1 < ppl && !(scores[static_cast<Eigen::Index>(i + 1)] <= cutoff));
      if (at_end || rejected_neighbour) keep.push_back(i);
    }
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(keep.size()), U.cols());
  for (std::size_t k = 0; k < keep.size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) = natural.row(static_cast<Eigen::Index>(keep[k]));
  return inputs_table(box, std::move(out));
}

namespace {

struct EllipsoidMixture {
  Eigen::MatrixXd centres;    // scaled coordinates, one per row
  Eigen::MatrixXd shape;      // maps the unit ball onto the common shape
  Eigen::MatrixXd whiten;     // inverse of shape, for membership tests
  Eigen::VectorXd base_scale; // per-centre: longest semi-axis touches a face
  double factor = 1.0;        // shared tuning factor from burn-in

  Eigen::RowVectorXd draw(Rng& rng) const {
    const Eigen::Index d = centres.cols();
    const Eigen::Index j =
        static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(centres.rows())));
    Eigen::VectorXd dir(d);
    for (Eigen::Index k = 0; k < d; ++k) dir[k] = rng.normal();
    dir /= dir.norm();
    const double r = std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
    return centres.row(j) +
           (base_scale[j] * factor * r) * (shape * dir).transpose();
  }

  // Importance weight: reciprocal of the mixture density at x, normalised so
  // a point inside exactly one largest-scale ellipsoid weighs 1 and a point
  // inside k identical ellipsoids weighs 1/k. Per-centre scales make the
  // volumes differ, so membership is volume-weighted rather than counted.
  double weight(const Eigen::RowVectorXd& x) const {
    const double d = static_cast<double>(centres.cols());
    const double b_max = base_scale.maxCoeff();
    double density = 0.0;
    for (Eigen::Index j = 0; j < centres.rows(); ++j) {
      const Eigen::VectorXd w = whiten * (x - centres.row(j)).transpose();
      if (w.norm() <= base_scale[j] * factor + 1e-12)
        density += std::pow(b_max / base_scale[j], d);
    }
    return density > 0.0 ? 1.0 / density : 1.0;
  }
};

EllipsoidMixture build_mixture(const Eigen::MatrixXd& S) {
  const Eigen::Index m = S.rows(), d = S.cols();
  EllipsoidMixture mix;
  mix.centres = S;

  // fewer seeds than d + 1 cannot define a full-rank covariance
  bool degenerate = m < d + 1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  if (!degenerate) {
    const Eigen::MatrixXd centred = S.rowwise() - S.colwise().mean();
    eig.compute(centred.transpose() * centred / static_cast<double>(m - 1));
    const Eigen::VectorXd& vals = eig.eigenvalues();
    degenerate = !(vals.minCoeff() > 1e-12 * std::max(vals.maxCoeff(), 1e-12));
  }
  double sigma_max;
  if (degenerate) {
    std::cerr << "warning: degenerate seed covariance; using axis-aligned ellipsoids\n";
    mix.shape = Eigen::MatrixXd::Identity(d, d);
    mix.whiten = mix.shape;
    sigma_max = 1.0;
  } else {
    const Eigen::VectorXd sig = eig.eigenvalues().cwiseSqrt();
    mix.shape = eig.eigenvectors() * sig.asDiagonal();
    mix.whiten = sig.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
    sigma_max = sig.maxCoeff();
  }

  mix.base_scale.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    double face = kInf;
    for (Eigen::Index k = 0; k < d; ++k)
      face = std::min(face, std::min(1.0 - S(j, k), S(j, k) + 1.0));
    mix.base_scale[j] = std::max(face, 1e-6) / sigma_max;
  }
  return mix;
}

}  // namespace

WeightedPoints ellipsoid_importance_sample(const Eigen::MatrixXd& seeds, const ParameterSpace& box,
                                           const AcceptanceMeasure& measure, double cutoff,
                                           std::size_t n_wanted, const ProposalOptions& opts,
                                           std::uint64_t seed) {
  const Eigen::Index d = static_cast<Eigen::Index>(box.dim());
  WeightedPoints out;
  out.points.resize(0, d);
  out.weights.resize(0);
  if (n_wanted == 0) return out;
  if (seeds.rows() < 1) fail(ErrorKind::argument, "ellipsoid sampling needs at least one seed point");

  EllipsoidMixture mix = build_mixture(box.scale_rows(seeds, true));
  Rng rng(seed);

  auto batch_accept = [&](std::size_t count, Eigen::MatrixXd* kept_scaled) {
    Eigen::MatrixXd cand(static_cast<Eigen::Index>(count), d);
    std::vector<bool> in_box(count, true);
    for (std::size_t i = 0; i < count; ++i) {
      const Eigen::RowVectorXd x = mix.draw(rng);
      cand.row(static_cast<Eigen::Index>(i)) = x;
      for (Eigen::Index k = 0; k < d; ++k)
        if (x[k] < -1.0 || x[k] > 1.0) in_box[i] = false;
    }
    const Eigen::VectorXd scores = measure(box.unscale_rows(clamp_unit(cand)));
    std::size_t accepted = 0;
    if (kept_scaled) kept_scaled->resize(static_cast<Eigen::Index>(count), d);
    for (std::size_t i = 0; i < count; ++i) {
      if (!in_box[i] || !(scores[static_cast<Eigen::Index>(i)] <= cutoff)) continue;
      if (kept_scaled)
        kept_scaled->row(static_cast<Eigen::Index>(accepted)) =
            cand.row(static_cast<Eigen::Index>(i));
      ++accepted;
    }
    if (kept_scaled) kept_scaled->conservativeResize(static_cast<Eigen::Index>(accepted), d);
    return accepted;
  };

  // burn-in: tune the shared radius factor until the acceptance fraction
  // lands between 10% and 80%
  for (int iter = 0; iter < 30; ++iter) {
    const double frac = static_cast<double>(batch_accept(opts.burn_in_batch, nullptr)) /
                        static_cast<double>(opts.burn_in_batch);
    if (frac >= 0.1 && frac <= 0.8) break;
    mix.factor = std::clamp(mix.factor * (frac < 0.1 ? 0.8 : 1.25), 1e-3, 10.0);
  }

  Eigen::MatrixXd pool(0, d);
  const std::size_t max_batches = 64;
  for (std::size_t b = 0; b < max_batches && pool.rows() < static_cast<Eigen::Index>(n_wanted);
       ++b) {
    Eigen::MatrixXd kept;
    batch_accept(std::max<std::size_t>(n_wanted, 256), &kept);
    const Eigen::Index old = pool.rows();
    pool.conservativeResize(old + kept.rows(), d);
    pool.bottomRows(kept.rows()) = kept;
  }
  if (pool.rows() > static_cast<Eigen::Index>(n_wanted))
    pool.conservativeResize(static_cast<Eigen::Index>(n_wanted), d);

  out.points = box.unscale_rows(clamp_unit(pool));
  out.weights.resize(pool.rows());
  for (Eigen::Index i = 0; i < pool.rows(); ++i) out.weights[i] = mix.weight(pool.row(i));
  return out;
}

namespace {

// One line-sampling plus importance-sampling enrichment of the pool at the
// given cutoff, with the paper-style progress lines.
void enrich(Pool* pool, const ParameterSpace& box, const AcceptanceMeasure& measure, double cutoff,
            std::size_t n_points, const ProposalOptions& opts, std::uint64_t stage_seed) {
  const Eigen::Index d = static_cast<Eigen::Index>(box.dim());

  std::cerr << "Performing line sampling...\n";
  Eigen::Index added = 0;
  if (pool->size() >= 2) {
    const RunTable lines = line_sample(inputs_table(box, pool->pts), box, measure, cutoff, opts,
                                       sub_seed(stage_seed, 1));
    if (lines.inputs.rows() > 0) {
      pool->append(lines.inputs, measure(lines.inputs));
      added = lines.inputs.rows();
    }
  }
  std::cerr << "Line sampling generated " << added << " more points.\n";

  std::cerr << "Performing importance sampling...\n";
  const std::size_t target =
      static_cast<std::size_t>(std::ceil(opts.oversample * static_cast<double>(n_points)));
  const std::size_t wanted =
      target > static_cast<std::size_t>(pool->size()) ? target - pool->size() : 0;
  Eigen::Index kept = 0;
  if (wanted > 0 && pool->size() >= 1) {
    // oversample, then weighted sampling without replacement back down to the
    // wanted count, so ellipsoid overlaps do not over-populate the pool
    const WeightedPoints w = ellipsoid_importance_sample(pool->pts, box, measure, cutoff,
                                                         2 * wanted, opts, sub_seed(stage_seed, 2));
    Rng rng(sub_seed(stage_seed, 3));
    std::vector<std::size_t> keep;
    if (w.points.rows() <= static_cast<Eigen::Index>(wanted)) {
      keep.resize(static_cast<std::size_t>(w.points.rows()));
      std::iota(keep.begin(), keep.end(), 0);
    } else {
      // keep the `wanted` largest keys u^(1/weight)
      std::vector<std::pair<double, std::size_t>> keyed(static_cast<std::size_t>(w.points.rows()));
      for (std::size_t i = 0; i < keyed.size(); ++i)
        keyed[i] = {std::log(rng.uniform()) / w.weights[static_cast<Eigen::Index>(i)], i};
      std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(wanted),
                        keyed.end(), std::greater<>());
      for (std::size_t i = 0; i < wanted; ++i) keep.push_back(keyed[i].second);
      std::sort(keep.begin(), keep.end());
    }
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(keep.size()), d);
    for (std::size_t k = 0; k < keep.size(); ++k)
      pts.row(static_cast<Eigen::Index>(k)) = w.points.row(static_cast<Eigen::Index>(keep[k]));
    if (pts.rows() > 0) pool->append(pts, measure(pts));
    kept = pts.rows();
  }
  std::cerr << "Importance sampling generated " << kept << " more points.\n";
}

// Maximin selection biases hard toward the boundary when the pool dwarfs the
// request (it approaches a ball packing), so dense pools are first thinned
// uniformly at random to twice the target.
Pool bounded_maximin(const Pool& pool, std::size_t k, const ParameterSpace& box,
                     std::uint64_t seed) {
  if (pool.size() <= static_cast<Eigen::Index>(k)) return pool;
  Pool work = pool;
  if (work.size() > static_cast<Eigen::Index>(2 * k)) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(work.size()));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(idx);
    idx.resize(2 * k);
    std::sort(idx.begin(), idx.end());
    work = work.take(idx);
  }
  return work.take(maximin_indices(box.scale_rows(work.pts, true), k));
}

}  // namespace

RunTable generate_new_design(const ParameterSpace& box, std::size_t n_points,
                             const AcceptanceMeasure& measure, const ProposalOptions& opts) {
  opts.validate();
  const Eigen::Index d = static_cast<Eigen::Index>(box.dim());
  if (n_points == 0) return inputs_table(box, Eigen::MatrixXd(0, d));

  // rungs tried for a foothold: the requested cutoff, then looser ones
  std::vector<double> rungs{opts.cutoff};
  if (opts.ladder.empty()) {
    for (double f : {1.25, 1.5, 2.0}) rungs.push_back(opts.cutoff * f);
  } else {
    rungs.insert(rungs.end(), opts.ladder.begin(), opts.ladder.end());
    std::sort(rungs.begin() + 1, rungs.end());
  }

  const std::size_t lhd_size = std::min(opts.lhd_multiplier * n_points, opts.lhd_cap);
  Pool pool;
  std::size_t foothold = rungs.size();
  for (std::size_t r = 0; r < rungs.size(); ++r) {
    std::cerr << "Proposing from LHS...\n";
    const RunTable kept =
        lhd_reject(box, lhd_size, measure, rungs[r], sub_seed(opts.seed, 100 + r));
    std::cerr << kept.inputs.rows() << " initial valid points generated for I="
              << format_double(rungs[r]) << "\n";
    if (kept.inputs.rows() > 0) {
      pool.append(kept.inputs, measure(kept.inputs));
      foothold = r;
      break;
    }
  }
  if (foothold == rungs.size()) {
    std::cerr << "warning: empty proposal; no acceptable points found at any cutoff up to "
              << format_double(rungs.back()) << "\n";
    return inputs_table(box, Eigen::MatrixXd(0, d));
  }

  // tighten from the foothold rung back to the requested cutoff, reusing
  // survivors as seeds at each step
  for (std::size_t r = foothold + 1; r-- > 0;) {
    const double rung = rungs[r];
    pool = pool.filtered(rung);
    if (pool.size() < d + 2) {
      // too few survivors to seed the samplers: top up from a fresh design
      const RunTable extra =
          lhd_reject(box, lhd_size, measure, rung, sub_seed(opts.seed, 200 + r));
      if (extra.inputs.rows() > 0) pool.append(extra.inputs, measure(extra.inputs));
    }
    if (pool.size() == 0 && r > 0) continue;
    if (pool.size() == 0) break;
    enrich(&pool, box, measure, rung, n_points, opts, sub_seed(opts.seed, 300 + r));
    pool = pool.filtered(rung);
  }

  // resample passes: thin to half the requested size, then enrich again
  for (int pass = 1; pass <= opts.resample && pool.size() > 0; ++pass) {
    std::cerr << "Resample " << pass << "\n";
    const std::size_t half = std::max<std::size_t>(n_points / 2, 1);
    pool = bounded_maximin(pool, half, box,
                           sub_seed(opts.seed, 500 + static_cast<std::uint64_t>(pass)));
    enrich(&pool, box, measure, opts.cutoff, n_points, opts,
           sub_seed(opts.seed, 400 + static_cast<std::uint64_t>(pass)));
    pool = pool.filtered(opts.cutoff);
  }

  std::cerr << "Selecting final points using maximin criterion...\n";
  pool.dedup();
  pool = bounded_maximin(pool, n_points, box, sub_seed(opts.seed, 600));
  if (pool.size() < static_cast<Eigen::Index>(n_points))
    std::cerr << "warning: only " << pool.size() << " acceptable points found; requested "
              << n_points << "\n";

  // post-hoc safety net: every returned point must satisfy the measure at
  // the requested cutoff
  if (pool.size() > 0) {
    const Eigen::VectorXd confirm = measure(pool.pts);
    for (Eigen::Index i = 0; i < confirm.size(); ++i)
      if (!(confirm[i] <= opts.cutoff))
        fail(ErrorKind::numeric, "proposal produced a point beyond the cutoff");
  }
  return inputs_table(box, pool.pts);
}

RunTable generate_new_design(const EmulatorSet& ems, std::size_t n_points, const TargetMap& targets,
                             const ProposalOptions& opts) {
  return generate_new_design(ems.space(), n_points, implausibility_measure(ems, targets, opts.nth),
                             opts);
}

}  // namespace nroy
