#include "copeval/features.hpp"

#include "copeval/errors.hpp"

namespace copeval {

Index column_rank(const Matrix& m, double tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& sv = svd.singularValues();
  const double cutoff = tol * sv(0);
  return (sv.array() > cutoff).count();
}

FeatureMatrix::FeatureMatrix(RowMatrix phi) : phi_(std::move(phi)) {
  if (phi_.rows() == 0 || phi_.cols() == 0) throw InvalidModel("empty feature matrix");
  if (!phi_.allFinite()) throw InvalidModel("feature matrix has non-finite entries");
  if (column_rank(phi_) != phi_.cols()) {
    throw DegenerateProjection("feature matrix does not have full column rank");
  }
}

FeatureMatrix FeatureMatrix::identity(Index n_states) {
  return FeatureMatrix(RowMatrix::Identity(n_states, n_states), Unchecked{});
}

FeatureMatrix FeatureMatrix::constant(Index n_states) {
  return FeatureMatrix(RowMatrix::Ones(n_states, 1), Unchecked{});
}

}  // namespace copeval
