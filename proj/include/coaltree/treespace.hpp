#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "coaltree/matrix.hpp"
#include "coaltree/rng.hpp"

namespace coaltree {

// Assembles a distance matrix from a decomposed pair:
// rho(i,j) = v(i) + r(i,j) + v(j) off the diagonal.
DistanceMatrix alpha(const MarkedMatrix& rv);

// Decomposes a distance matrix into external branch lengths and a
// tree-like remainder: v(i) = half the smallest distance from i within
// [n], r(i,j) = rho(i,j) - v(i) - v(j). The minimum runs over the finite
// index set only, an upper bound for the infinite-model branch length; the
// truncation level is the matrix size and is quoted in reports built on
// top of this value. alpha(beta_finite(rho)) reproduces rho up to
// floating-point roundoff. When require_ultrametric is set the input is
// checked first and a failing matrix raises validation_error.
MarkedMatrix beta_finite(const DistanceMatrix& rho, bool require_ultrametric = false);

// Finite marked metric measure space: support points carrying pairwise
// distances, probability weights, and one nonnegative mark each. Support
// points at distance zero with equal marks are merged at construction,
// weights summed. The merge tolerance is exact zero by default.
class FiniteMMSpace {
 public:
  FiniteMMSpace(DistanceMatrix dist, std::vector<double> weights, std::vector<double> marks,
                double merge_tol = 0.0, double weight_tol = 1e-12);
  // Unmarked variant: all marks zero.
  FiniteMMSpace(DistanceMatrix dist, std::vector<double> weights);

  std::size_t size() const { return dist_.size(); }
  const DistanceMatrix& dist() const { return dist_; }
  double weight(std::size_t i) const;
  double mark(std::size_t i) const;
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& marks() const { return marks_; }

  // Product metric between support points: max of the base distance and
  // the mark gap.
  double metric(std::size_t i, std::size_t j) const;

  void save(std::ostream& os) const;
  static FiniteMMSpace load(std::istream& is);

 private:
  DistanceMatrix dist_;
  std::vector<double> weights_;
  std::vector<double> marks_;
};

// Empirical reconstruction from a decomposed matrix: the n indices become
// support points with metric r, marks v, and weight 1/n each, merged under
// the construction quotient.
FiniteMMSpace reconstruct_space(const MarkedMatrix& rv);

struct SampledMatrices {
  MarkedMatrix rv;
  DistanceMatrix rho;
};

// Draws k support indices iid by weight and reads off the marked matrix
// and its assembled distance matrix.
SampledMatrices sample_distance_matrix(const FiniteMMSpace& space, std::size_t k, Rng& rng);

// Exact Prohorov distance between two probability vectors on the support
// of `space`, under the product metric. Decided by maximum-transport
// feasibility over the edge set {d <= eps}, scanning the candidate
// thresholds; matches the closed-set definition. Supports of more than
// 200 points are refused.
double prohorov_exact(const FiniteMMSpace& space, const std::vector<double>& w1,
                      const std::vector<double>& w2);

// Convergence diagnostic for the empirical reconstruction: embeds the
// n-point and 2n-point reconstructions of the same tree into the tree
// spanned by the first 2n leaves and returns the Prohorov distance between
// their empirical measures. Requires rho ultrametric with size >= 2n;
// 3n must stay within the transport support cap.
double reconstruction_convergence_gap(const DistanceMatrix& rho, std::size_t n);

}  // namespace coaltree
