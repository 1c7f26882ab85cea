#include "nroy/param_space.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "nroy/common.hpp"
#include "nroy/rng.hpp"

namespace nroy {

ParameterSpace::ParameterSpace(std::vector<std::string> names,
                               std::vector<std::pair<double, double>> ranges)
    : names_(std::move(names)), ranges_(std::move(ranges)) {
  if (names_.empty()) fail(ErrorKind::argument, "parameter space needs at least one parameter");
  if (names_.size() != ranges_.size())
    fail(ErrorKind::argument, "parameter names and ranges differ in length");
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (!(ranges_[i].first < ranges_[i].second))
      fail(ErrorKind::degenerate, "parameter '" + names_[i] + "' has empty range");
    for (std::size_t j = i + 1; j < names_.size(); ++j)
      if (names_[i] == names_[j]) fail(ErrorKind::schema, "duplicate parameter name '" + names_[i] + "'");
  }
}

int ParameterSpace::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  return it == names_.end() ? -1 : static_cast<int>(it - names_.begin());
}

Eigen::RowVectorXd ParameterSpace::scale(const Eigen::RowVectorXd& x, bool allow_outside) const {
  if (static_cast<std::size_t>(x.size()) != dim())
    fail(ErrorKind::argument, "point dimension does not match parameter space");
  Eigen::RowVectorXd u(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const auto [lo, hi] = ranges_[static_cast<std::size_t>(i)];
    const double span = hi - lo;
    // small slack so values written out and re-read never trip the check
    if (!allow_outside && (x[i] < lo - 1e-9 * span || x[i] > hi + 1e-9 * span))
      fail(ErrorKind::domain, "coordinate for '" + names_[static_cast<std::size_t>(i)] +
                                  "' lies outside its range");
    u[i] = 2.0 * (x[i] - lo) / span - 1.0;
  }
  return u;
}

Eigen::RowVectorXd ParameterSpace::unscale(const Eigen::RowVectorXd& u) const {
  if (static_cast<std::size_t>(u.size()) != dim())
    fail(ErrorKind::argument, "point dimension does not match parameter space");
  Eigen::RowVectorXd x(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const auto [lo, hi] = ranges_[static_cast<std::size_t>(i)];
    x[i] = lo + 0.5 * (u[i] + 1.0) * (hi - lo);
  }
  return x;
}

Eigen::MatrixXd ParameterSpace::scale_rows(const Eigen::MatrixXd& X, bool allow_outside) const {
  Eigen::MatrixXd U(X.rows(), X.cols());
  for (Eigen::Index r = 0; r < X.rows(); ++r) U.row(r) = scale(X.row(r), allow_outside);
  return U;
}

Eigen::MatrixXd ParameterSpace::unscale_rows(const Eigen::MatrixXd& U) const {
  Eigen::MatrixXd X(U.rows(), U.cols());
  for (Eigen::Index r = 0; r < U.rows(); ++r) X.row(r) = unscale(U.row(r));
  return X;
}

bool ParameterSpace::contains(const Eigen::RowVectorXd& x) const {
  if (static_cast<std::size_t>(x.size()) != dim()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const auto [lo, hi] = ranges_[static_cast<std::size_t>(i)];
    if (x[i] < lo || x[i] > hi) return false;
  }
  return true;
}

Eigen::VectorXd RunTable::output(const std::string& name) const {
  const int j = output_index(name);
  if (j < 0) fail(ErrorKind::schema, "run table has no output column '" + name + "'");
  return outputs.col(j);
}

int RunTable::output_index(const std::string& name) const {
  auto it = std::find(output_names.begin(), output_names.end(), name);
  return it == output_names.end() ? -1 : static_cast<int>(it - output_names.begin());
}

RunTable RunTable::aligned_to(const ParameterSpace& space) const {
  RunTable out;
  out.input_names = space.names();
  out.inputs.resize(inputs.rows(), static_cast<Eigen::Index>(space.dim()));
  for (std::size_t j = 0; j < space.dim(); ++j) {
    auto it = std::find(input_names.begin(), input_names.end(), space.names()[j]);
    if (it == input_names.end())
      fail(ErrorKind::schema, "run table is missing parameter column '" + space.names()[j] + "'");
    out.inputs.col(static_cast<Eigen::Index>(j)) = inputs.col(it - input_names.begin());
  }
  out.output_names = output_names;
  out.outputs = outputs;
  out.replicate = replicate;
  return out;
}

RunTable RunTable::take_rows(const std::vector<std::size_t>& idx) const {
  RunTable out;
  out.input_names = input_names;
  out.output_names = output_names;
  out.inputs.resize(static_cast<Eigen::Index>(idx.size()), inputs.cols());
  out.outputs.resize(static_cast<Eigen::Index>(idx.size()), outputs.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.inputs.row(static_cast<Eigen::Index>(r)) = inputs.row(static_cast<Eigen::Index>(idx[r]));
    if (outputs.cols() > 0)
      out.outputs.row(static_cast<Eigen::Index>(r)) = outputs.row(static_cast<Eigen::Index>(idx[r]));
  }
  if (!replicate.empty())
    for (std::size_t r : idx) out.replicate.push_back(replicate[r]);
  return out;
}

void RunTable::append_rows(const RunTable& other) {
  if (input_names != other.input_names || output_names != other.output_names)
    fail(ErrorKind::schema, "cannot append run tables with different columns");
  const Eigen::Index n0 = inputs.rows(), n1 = other.inputs.rows();
  inputs.conservativeResize(n0 + n1, Eigen::NoChange);
  inputs.bottomRows(n1) = other.inputs;
  if (outputs.cols() > 0) {
    outputs.conservativeResize(n0 + n1, Eigen::NoChange);
    outputs.bottomRows(n1) = other.outputs;
  }
  if (!replicate.empty() || !other.replicate.empty()) {
    if (replicate.empty()) replicate.assign(static_cast<std::size_t>(n0), 0);
    auto r = other.replicate;
    if (r.empty()) r.assign(static_cast<std::size_t>(n1), 0);
    replicate.insert(replicate.end(), r.begin(), r.end());
  }
}

RunTable latin_hypercube(std::size_t n, const ParameterSpace& space, std::uint64_t seed) {
  if (n == 0) fail(ErrorKind::argument, "latin hypercube size must be positive");
  Rng rng(seed);
  const std::size_t d = space.dim();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<std::size_t> strata(n);
  for (std::size_t j = 0; j < d; ++j) {
    std::iota(strata.begin(), strata.end(), std::size_t{0});
    rng.shuffle(strata);
    const auto [lo, hi] = space.range(j);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = (static_cast<double>(strata[i]) + rng.uniform()) / static_cast<double>(n);
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = lo + (hi - lo) * v;
    }
  }
  RunTable t;
  t.input_names = space.names();
  t.inputs = std::move(X);
  t.outputs.resize(static_cast<Eigen::Index>(n), 0);
  return t;
}

namespace {

// number of k-subsets, saturating well above the exact-search budget
double subset_count(std::size_t n, std::size_t k) {
  double c = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    c *= static_cast<double>(n - i) / static_cast<double>(i + 1);
    if (c > 1e9) return 1e9;
  }
  return c;
}

std::vector<std::size_t> exact_maximin(const Eigen::MatrixXd& scaled, std::size_t k) {
  const std::size_t n = static_cast<std::size_t>(scaled.rows());
  std::vector<std::size_t> comb(k), best_set;
  for (std::size_t i = 0; i < k; ++i) comb[i] = i;
  double best = -1.0;
  while (true) {
    double v = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < k && v > best; ++a)
      for (std::size_t b = a + 1; b < k; ++b) {
        const double d = (scaled.row(static_cast<Eigen::Index>(comb[a])) -
                          scaled.row(static_cast<Eigen::Index>(comb[b])))
                             .norm();
        if (d < v) v = d;
      }
    if (v > best) {
      best = v;
      best_set = comb;
    }
    std::size_t i = k;
    bool advanced = false;
    while (i > 0) {
      --i;
      if (comb[i] != i + n - k) {
        ++comb[i];
        for (std::size_t j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
        advanced = true;
        break;
      }
    }
    if (!advanced) return best_set;
  }
}

}  // namespace

std::vector<std::size_t> maximin_indices(const Eigen::MatrixXd& scaled, std::size_t k) {
  const std::size_t n = static_cast<std::size_t>(scaled.rows());
  if (n == 0) fail(ErrorKind::argument, "maximin selection from an empty set");
  if (k < 1 || k > n) fail(ErrorKind::argument, "maximin subset size must satisfy 1 <= k <= n");
  if (n == 1 || k == 1) return {0};
  if (k == n) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  if (k <= 6 && subset_count(n, k) <= 4096.0) return exact_maximin(scaled, k);

  // greedy fallback: most distant pair first, scan order wins ties
  std::size_t a = 0, b = 1;
  double best = -1.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = (scaled.row(static_cast<Eigen::Index>(i)) - scaled.row(static_cast<Eigen::Index>(j))).norm();
      if (d > best) {
        best = d;
        a = i;
        b = j;
      }
    }

  std::vector<char> selected(n, 0);
  std::vector<std::size_t> chosen{a, b};
  selected[a] = selected[b] = 1;
  std::vector<double> dmin(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double da = (scaled.row(static_cast<Eigen::Index>(i)) - scaled.row(static_cast<Eigen::Index>(a))).norm();
    const double db = (scaled.row(static_cast<Eigen::Index>(i)) - scaled.row(static_cast<Eigen::Index>(b))).norm();
    dmin[i] = std::min(da, db);
  }
  while (chosen.size() < k) {
    std::size_t pick = n;
    double bestd = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (selected[i]) continue;
      if (dmin[i] > bestd) {
        bestd = dmin[i];
        pick = i;
      }
    }
    selected[pick] = 1;
    chosen.push_back(pick);
    for (std::size_t i = 0; i < n; ++i) {
      if (selected[i]) continue;
      const double d = (scaled.row(static_cast<Eigen::Index>(i)) - scaled.row(static_cast<Eigen::Index>(pick))).norm();
      if (d < dmin[i]) dmin[i] = d;
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

RunTable maximin_thin(const RunTable& pts, std::size_t k, const ParameterSpace& space) {
  const RunTable aligned = pts.aligned_to(space);
  const Eigen::MatrixXd scaled = space.scale_rows(aligned.inputs, true);
  return aligned.take_rows(maximin_indices(scaled, k));
}

ParameterSpace enclosing_hyperrectangle(const RunTable& pts) {
  if (pts.rows() == 0) fail(ErrorKind::argument, "cannot take the hull of an empty table");
  std::vector<std::pair<double, double>> ranges;
  for (Eigen::Index j = 0; j < pts.inputs.cols(); ++j) {
    const double lo = pts.inputs.col(j).minCoeff();
    const double hi = pts.inputs.col(j).maxCoeff();
    if (lo == hi)
      fail(ErrorKind::degenerate,
           "column '" + pts.input_names[static_cast<std::size_t>(j)] + "' has zero spread");
    ranges.emplace_back(lo, hi);
  }
  return ParameterSpace(pts.input_names, ranges);
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, std::size_t line_no, const std::string& path) {
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (*(e - 1) == ' ' || *(e - 1) == '\t')) --e;
  double v = 0.0;
  auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc{} || res.ptr != e)
    fail(ErrorKind::schema,
         path + ":" + std::to_string(line_no) + ": cannot parse '" + s + "' as a number");
  return v;
}

}  // namespace

RunTable read_run_table(const std::string& path, const ParameterSpace& space) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::schema, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::schema, path + ": empty file");
  const auto header = split_csv_line(line);

  std::vector<int> role(header.size());  // >=0 input slot, -1 replicate, -2 output
  std::vector<char> seen(space.dim(), 0);
  RunTable t;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const int idx = space.index_of(header[c]);
    if (idx >= 0) {
      if (seen[static_cast<std::size_t>(idx)])
        fail(ErrorKind::schema, path + ": duplicate column '" + header[c] + "'");
      seen[static_cast<std::size_t>(idx)] = 1;
      role[c] = idx;
    } else if (header[c] == "replicate") {
      role[c] = -1;
    } else {
      role[c] = -2;
      t.output_names.push_back(header[c]);
    }
  }
  for (std::size_t j = 0; j < space.dim(); ++j)
    if (!seen[j]) fail(ErrorKind::schema, path + ": missing parameter column '" + space.names()[j] + "'");

  std::vector<std::vector<double>> rows;
  std::vector<long> reps;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      fail(ErrorKind::schema, path + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " columns, got " +
                                  std::to_string(cells.size()));
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) row[c] = parse_double(cells[c], line_no, path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorKind::schema, path + ": no data rows");

  const std::size_t n = rows.size();
  t.input_names = space.names();
  t.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(space.dim()));
  t.outputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(t.output_names.size()));
  bool has_rep = false;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (role[c] == -1) has_rep = true;
  if (has_rep) reps.resize(n);

  for (std::size_t r = 0; r < n; ++r) {
    std::size_t out_col = 0;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (role[c] >= 0)
        t.inputs(static_cast<Eigen::Index>(r), role[c]) = rows[r][c];
      else if (role[c] == -1)
        reps[r] = static_cast<long>(rows[r][c]);
      else
        t.outputs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(out_col++)) = rows[r][c];
    }
  }
  t.replicate = std::move(reps);
  return t;
}

void write_run_table(const std::string& path, const RunTable& table) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::schema, "cannot write '" + path + "'");
  std::string header;
  for (const auto& n : table.input_names) {
    if (!header.empty()) header += ',';
    header += n;
  }
  if (!table.replicate.empty()) header += ",replicate";
  for (const auto& n : table.output_names) header += ',' + n;
  out << header << '\n';
  for (Eigen::Index r = 0; r < table.inputs.rows(); ++r) {
    std::string line;
    for (Eigen::Index c = 0; c < table.inputs.cols(); ++c) {
      if (c) line += ',';
      line += format_double(table.inputs(r, c));
    }
    if (!table.replicate.empty())
      line += ',' + std::to_string(table.replicate[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < table.outputs.cols(); ++c)
      line += ',' + format_double(table.outputs(r, c));
    out << line << '\n';
  }
  if (!out) fail(ErrorKind::schema, "failed writing '" + path + "'");
}

}  // namespace nroy
