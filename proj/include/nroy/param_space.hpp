#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace nroy {

/// Named box of parameter ranges. All internal geometry (correlation
/// lengths, design distances) lives on the scaled image [-1, 1]^d; the
/// affine maps between natural and scaled units are defined here.
class ParameterSpace {
public:
  ParameterSpace() = default;
  ParameterSpace(std::vector<std::string> names, std::vector<std::pair<double, double>> ranges);

  std::size_t dim() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::pair<double, double>& range(std::size_t i) const { return ranges_[i]; }

  /// Index of a parameter name, or -1 when absent.
  int index_of(const std::string& name) const;

  /// Map one point from natural units onto [-1, 1]^d. Coordinates outside
  /// the ranges raise a domain error unless allow_outside is set.
  Eigen::RowVectorXd scale(const Eigen::RowVectorXd& x, bool allow_outside = false) const;
  Eigen::RowVectorXd unscale(const Eigen::RowVectorXd& u) const;

  /// Row-wise variants of scale/unscale.
  Eigen::MatrixXd scale_rows(const Eigen::MatrixXd& X, bool allow_outside = false) const;
  Eigen::MatrixXd unscale_rows(const Eigen::MatrixXd& U) const;

  bool contains(const Eigen::RowVectorXd& x) const;

  bool operator==(const ParameterSpace& other) const {
    return names_ == other.names_ && ranges_ == other.ranges_;
  }

private:
  std::vector<std::string> names_;
  std::vector<std::pair<double, double>> ranges_;
};

/// Design-plus-results table. Input columns follow one ParameterSpace's
/// canonical order; any further columns are outputs. The replicate vector,
/// when non-empty, groups rows that share an input point.
struct RunTable {
  std::vector<std::string> input_names;
  Eigen::MatrixXd inputs;  // n x d
  std::vector<std::string> output_names;
  Eigen::MatrixXd outputs;  // n x m, zero columns when absent
  std::vector<long> replicate;

  std::size_t rows() const { return static_cast<std::size_t>(inputs.rows()); }
  bool has_outputs() const { return outputs.cols() > 0; }

  Eigen::VectorXd output(const std::string& name) const;
  int output_index(const std::string& name) const;

  /// Reorder input columns into the space's canonical order. Missing
  /// parameters are a schema error.
  RunTable aligned_to(const ParameterSpace& space) const;

  RunTable take_rows(const std::vector<std::size_t>& idx) const;
  void append_rows(const RunTable& other);
};

/// Latin hypercube design: per dimension a random permutation of n strata
/// with a uniform jitter inside each stratum. Deterministic for a given seed.
RunTable latin_hypercube(std::size_t n, const ParameterSpace& space, std::uint64_t seed);

/// Maximin subset of k rows, distances Euclidean in scaled units. Small
/// instances are solved exactly by subset enumeration (first maximizer in
/// lexicographic index order); larger ones fall back to a greedy rule that
/// seeds with the most distant pair and repeatedly adds the point with the
/// largest minimum distance to the selection, ties to the lowest row index.
/// Returned rows keep their original order.
RunTable maximin_thin(const RunTable& pts, std::size_t k, const ParameterSpace& space);

/// Index-level maximin on already-scaled coordinates, ascending order.
std::vector<std::size_t> maximin_indices(const Eigen::MatrixXd& scaled, std::size_t k);

/// Smallest axis-aligned box containing the points. A zero-spread column is
/// a degenerate-range error naming the offending parameter.
ParameterSpace enclosing_hyperrectangle(const RunTable& pts);

/// CSV with one header line; columns matched to the space by name (inputs),
/// "replicate" reserved for the replicate key, anything else is an output.
RunTable read_run_table(const std::string& path, const ParameterSpace& space);
void write_run_table(const std::string& path, const RunTable& table);

/// Round-trip-exact decimal rendering used for all CSV output.
std::string format_double(double v);

}  // namespace nroy
