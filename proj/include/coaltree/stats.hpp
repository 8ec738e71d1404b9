#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coaltree/matrix.hpp"
#include "coaltree/report.hpp"
#include "coaltree/rng.hpp"
#include "coaltree/treespace.hpp"
#include "coaltree/xi.hpp"

namespace coaltree {

// Product-exponential test function on the leading arity-many coordinates:
// exp(-sum_{i<j} lambda_ij x(i,j)) on plain matrices, with an extra
// exp(-sum_i mu_i v(i)) factor on marked ones. Values lie in (0, 1] and the
// directional derivatives along the deterministic growth flows are closed
// form.
class TestFunction {
 public:
  // lambda holds the upper triangle row by row: (1,2), (1,3), ..., (k-1,k).
  static TestFunction plain(std::size_t arity, std::vector<double> lambda);
  static TestFunction marked(std::size_t arity, std::vector<double> lambda,
                             std::vector<double> mu);

  std::size_t arity() const { return arity_; }
  bool is_marked() const { return marked_; }
  const std::string& label() const { return label_; }

  double operator()(const DistanceMatrix& rho) const;
  double operator()(const MarkedMatrix& rv) const;

  // d/ds phi(rho + 2s off-diagonal) and d/ds phi(r, v + s).
  double growth_derivative(const DistanceMatrix& rho) const;
  double growth_derivative(const MarkedMatrix& rv) const;

  // Small named family used by the harness checks; all members bounded by 1.
  static std::vector<TestFunction> registry(std::size_t arity, bool marked);

 private:
  TestFunction() = default;

  std::size_t arity_ = 0;
  bool marked_ = false;
  std::vector<double> lambda_;
  std::vector<double> mu_;
  std::string label_;
};

// Permutation p-value of the energy-distance statistic between two sets of
// equal-length vectors; ties count toward the tail so identical samples give
// p = 1.
double energy_two_sample(const std::vector<std::vector<double>>& a,
                         const std::vector<std::vector<double>>& b, std::size_t n_perm, Rng& rng);

// Runs body(0..count-1), splitting the range over the requested number of
// threads. Each replicate must only touch its own output slot.
void for_each_replicate(std::size_t count, std::size_t threads,
                        const std::function<void(std::size_t)>& body);

// Compares functionals of sampled states against the same functionals after
// a coordinate permutation, using independent batches for the two sides.
// Bonferroni-corrected within the check.
ExperimentReport exchangeability_check(const std::function<MarkedMatrix(Rng&)>& sampler,
                                       std::size_t arity,
                                       const std::vector<std::vector<std::size_t>>& permutations,
                                       const std::vector<TestFunction>& functionals,
                                       std::size_t reps, std::uint64_t seed);

// Monte-Carlo finite difference of the semigroup at h against the analytic
// generator value (growth derivative plus rate-weighted jump sum). Passes
// when |difference| <= taylor_c * h + 3 * SE.
ExperimentReport generator_check_rho(const XiSpec& xi, const TestFunction& phi,
                                     const DistanceMatrix& rho0, double h, std::size_t reps,
                                     std::uint64_t seed, double taylor_c = 10.0);
ExperimentReport generator_check_rv(const XiSpec& xi, const TestFunction& phi,
                                    const MarkedMatrix& rv0, double h, std::size_t reps,
                                    std::uint64_t seed, double taylor_c = 10.0);

// Distance-to-equilibrium experiment: |E phi(state_t) - E phi(stationary)|
// against twice the stationary tail probability P(max pair distance >= 2t),
// with the tail taken from analytic_tail when provided and estimated
// otherwise.
ExperimentReport equilibrium_gap(const XiSpec& xi, std::size_t n, double t,
                                 const std::vector<TestFunction>& phis,
                                 const DistanceMatrix& rho0, std::size_t reps, std::uint64_t seed,
                                 std::optional<double> analytic_tail = std::nullopt);

// Mean, spread, and median summaries of tree functionals over a batch of
// ultrametric matrices: depth, external branch lengths, and block counts
// along the depth grid.
ExperimentReport summarize_trees(const std::string& name,
                                 const std::vector<DistanceMatrix>& trees,
                                 const std::vector<double>& depth_grid);

// Moment of the sampled distance-matrix law: exact weighted enumeration over
// ordered support tuples, and its Monte-Carlo counterpart (mean, se).
double polynomial_exact(const FiniteMMSpace& space, const TestFunction& phi);
std::pair<double, double> polynomial_mc(const FiniteMMSpace& space, const TestFunction& phi,
                                        std::size_t reps, Rng& rng);

}  // namespace coaltree
