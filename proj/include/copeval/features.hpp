#pragma once

#include "copeval/types.hpp"

namespace copeval {

/// Feature matrix Phi, one row phi(s) per state, k linearly independent columns.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  /// Throws DegenerateProjection when the columns are not linearly independent.
  explicit FeatureMatrix(RowMatrix phi);
  static FeatureMatrix identity(Index n_states);
  static FeatureMatrix constant(Index n_states);

  Index n_states() const { return phi_.rows(); }
  Index n_features() const { return phi_.cols(); }
  const RowMatrix& matrix() const { return phi_; }
  auto row(Index s) const { return phi_.row(s); }
  bool nonnegative() const { return (phi_.array() >= 0.0).all(); }

 private:
  struct Unchecked {};
  FeatureMatrix(RowMatrix phi, Unchecked) : phi_(std::move(phi)) {}
  RowMatrix phi_;
};

/// Numerical column rank with singular values below tol * sigma_max dropped.
Index column_rank(const Matrix& m, double tol = 1e-10);

}  // namespace copeval
