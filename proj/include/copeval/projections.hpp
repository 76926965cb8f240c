#pragma once

#include "copeval/types.hpp"

namespace copeval {

/// Weighted simplex {u >= 0 : w^T u = 1} with w > 0.
class WeightedSimplex {
 public:
  explicit WeightedSimplex(Vector weights);
  const Vector& weights() const { return weights_; }
  bool contains(const Vector& u, double tol = 1e-10) const;

 private:
  Vector weights_;
};

/// Euclidean projection onto {u >= 0 : w^T u = 1}.
///
/// The minimizer has the form u = max(v - tau w, 0); tau is located by
/// sorting the breakpoints v_i / w_i, so the cost is O(n log n). Components
/// sitting exactly at the threshold are set to zero.
Vector project_weighted_simplex(const Vector& v, const Vector& w);

/// Projection onto the affine slice {u : w^T u = 1}, ignoring nonnegativity.
Vector project_affine_slice(const Vector& v, const Vector& w);

/// In-place weighted-simplex projection restricted to the coordinates where
/// w > 0; coordinates with w == 0 are left untouched. Returns false when no
/// coordinate is active.
bool project_weighted_simplex_active(Vector& v, const Vector& w);

}  // namespace copeval
