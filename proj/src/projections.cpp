#include "copeval/projections.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "copeval/errors.hpp"

namespace copeval {
namespace {

// Threshold tau for the projection of v onto {u >= 0, w^T u = 1}.
template <typename V, typename W>
double simplex_threshold(const V& v, const W& w, std::vector<Index>& order) {
  const Index n = v.size();
  order.resize(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return v(a) * w(b) > v(b) * w(a); });
  double weighted_sum = 0.0;
  double weight_sq = 0.0;
  double tau = 0.0;
  for (std::size_t j = 0; j < order.size(); ++j) {
    const Index i = order[j];
    weighted_sum += w(i) * v(i);
    weight_sq += w(i) * w(i);
    const double candidate = (weighted_sum - 1.0) / weight_sq;
    if (j == 0 || v(i) - candidate * w(i) > 0.0) {
      tau = candidate;
    } else {
      break;
    }
  }
  return tau;
}

}  // namespace

WeightedSimplex::WeightedSimplex(Vector weights) : weights_(std::move(weights)) {
  if (weights_.size() == 0 || (weights_.array() <= 0.0).any()) {
    throw InvalidArgument("simplex weights must be strictly positive");
  }
}

bool WeightedSimplex::contains(const Vector& u, double tol) const {
  return u.size() == weights_.size() && (u.array() >= -tol).all() && std::abs(weights_.dot(u) - 1.0) <= tol;
}

Vector project_weighted_simplex(const Vector& v, const Vector& w) {
  if (v.size() != w.size()) throw InvalidArgument("projection: vector and weights differ in length");
  if (v.size() == 0 || (w.array() <= 0.0).any()) throw InvalidArgument("projection: weights must be positive");
  std::vector<Index> order;
  const double tau = simplex_threshold(v, w, order);
  return (v - tau * w).cwiseMax(0.0);
}

Vector project_affine_slice(const Vector& v, const Vector& w) {
  if (v.size() != w.size()) throw InvalidArgument("projection: vector and weights differ in length");
  const double norm_sq = w.squaredNorm();
  if (norm_sq <= 0.0) throw InvalidArgument("projection: zero weight vector");
  return v - ((w.dot(v) - 1.0) / norm_sq) * w;
}

bool project_weighted_simplex_active(Vector& v, const Vector& w) {
  if (v.size() != w.size()) throw InvalidArgument("projection: vector and weights differ in length");
  std::vector<Index> active;
  active.reserve(static_cast<std::size_t>(v.size()));
  for (Index i = 0; i < w.size(); ++i) {
    if (w(i) > 0.0) active.push_back(i);
  }
  if (active.empty()) return false;
  if (static_cast<Index>(active.size()) == v.size()) {
    std::vector<Index> order;
    const double tau = simplex_threshold(v, w, order);
    v = (v - tau * w).cwiseMax(0.0);
    return true;
  }
  const auto sub_v = v(active);
  const auto sub_w = w(active);
  Vector vs = sub_v;
  Vector ws = sub_w;
  std::vector<Index> order;
  const double tau = simplex_threshold(vs, ws, order);
  v(active) = (vs - tau * ws).cwiseMax(0.0);
  return true;
}

}  // namespace copeval
