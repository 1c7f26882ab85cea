#include "nroy/basis.hpp"

namespace nroy {

std::string BasisTerm::name(const std::vector<std::string>& params) const {
  switch (kind) {
    case Kind::constant: return "1";
    case Kind::linear: return params[static_cast<std::size_t>(i)];
    case Kind::quadratic: return params[static_cast<std::size_t>(i)] + "^2";
    case Kind::interaction:
      return params[static_cast<std::size_t>(i)] + "*" + params[static_cast<std::size_t>(j)];
  }
  return "?";
}

Eigen::MatrixXd basis_matrix(const std::vector<BasisTerm>& basis, const Eigen::MatrixXd& U) {
  Eigen::MatrixXd G(U.rows(), static_cast<Eigen::Index>(basis.size()));
  for (std::size_t t = 0; t < basis.size(); ++t) {
    const auto& b = basis[t];
    auto col = G.col(static_cast<Eigen::Index>(t));
    switch (b.kind) {
      case BasisTerm::Kind::constant:
        col.setOnes();
        break;
      case BasisTerm::Kind::linear:
        col = U.col(b.i);
        break;
      case BasisTerm::Kind::quadratic:
        col = U.col(b.i).cwiseProduct(U.col(b.i));
        break;
      case BasisTerm::Kind::interaction:
        col = U.col(b.i).cwiseProduct(U.col(b.j));
        break;
    }
  }
  return G;
}

std::vector<bool> derive_actives(const std::vector<BasisTerm>& basis, std::size_t dim) {
  std::vector<bool> act(dim, false);
  for (const auto& b : basis) {
    if (b.i >= 0) act[static_cast<std::size_t>(b.i)] = true;
    if (b.j >= 0) act[static_cast<std::size_t>(b.j)] = true;
  }
  return act;
}

std::string basis_names(const std::vector<BasisTerm>& basis, const std::vector<std::string>& params) {
  std::string s;
  for (const auto& b : basis) {
    if (!s.empty()) s += "; ";
    s += b.name(params);
  }
  return s;
}

}  // namespace nroy
