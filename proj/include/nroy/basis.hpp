#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace nroy {

// Regression surface vocabulary: constant, linear, pure quadratic and
// pairwise interaction terms over scaled inputs.
struct BasisTerm {
  enum class Kind { constant, linear, quadratic, interaction };
  Kind kind = Kind::constant;
  int i = -1;
  int j = -1;  // interaction partner, i < j

  double eval(const Eigen::RowVectorXd& u) const {
    switch (kind) {
      case Kind::constant: return 1.0;
      case Kind::linear: return u[i];
      case Kind::quadratic: return u[i] * u[i];
      case Kind::interaction: return u[i] * u[j];
    }
    return 0.0;
  }

  std::string name(const std::vector<std::string>& params) const;
  bool operator==(const BasisTerm&) const = default;

  static BasisTerm constant() { return {}; }
  static BasisTerm linear(int i) { return {Kind::linear, i, -1}; }
  static BasisTerm quadratic(int i) { return {Kind::quadratic, i, -1}; }
  static BasisTerm interaction(int i, int j) { return {Kind::interaction, i, j}; }
};

Eigen::MatrixXd basis_matrix(const std::vector<BasisTerm>& basis, const Eigen::MatrixXd& U);

// Parameters referenced by any non-constant term.
std::vector<bool> derive_actives(const std::vector<BasisTerm>& basis, std::size_t dim);

std::string basis_names(const std::vector<BasisTerm>& basis, const std::vector<std::string>& params);

}  // namespace nroy
