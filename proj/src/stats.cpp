#include "coaltree/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "coaltree/lookdown.hpp"
#include "coaltree/partitions.hpp"

namespace coaltree {

namespace {

struct MeanSe {
  double mean;
  double se;
};

MeanSe mean_se(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var = xs.size() > 1 ? var / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

double median_of(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size();
  return m % 2 == 1 ? xs[m / 2] : 0.5 * (xs[m / 2 - 1] + xs[m / 2]);
}

std::string join_params(const std::vector<double>& xs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) os << ",";
    os << xs[i];
  }
  return os.str();
}

}  // namespace

TestFunction TestFunction::plain(std::size_t arity, std::vector<double> lambda) {
  if (arity == 0) throw std::invalid_argument("TestFunction: arity must be positive");
  if (lambda.size() != arity * (arity - 1) / 2) {
    throw std::invalid_argument("TestFunction: need one coefficient per unordered pair");
  }
  for (double l : lambda) {
    if (!(l >= 0.0)) throw std::invalid_argument("TestFunction: coefficients must be nonnegative");
  }
  TestFunction f;
  f.arity_ = arity;
  f.marked_ = false;
  f.lambda_ = std::move(lambda);
  f.label_ = "exp[k=" + std::to_string(arity) + ";lam=" + join_params(f.lambda_) + "]";
  return f;
}

TestFunction TestFunction::marked(std::size_t arity, std::vector<double> lambda,
                                  std::vector<double> mu) {
  TestFunction f = plain(arity, std::move(lambda));
  if (mu.size() != arity) throw std::invalid_argument("TestFunction: need one mark coefficient per coordinate");
  for (double m : mu) {
    if (!(m >= 0.0)) throw std::invalid_argument("TestFunction: coefficients must be nonnegative");
  }
  f.marked_ = true;
  f.mu_ = std::move(mu);
  f.label_ = "exp[k=" + std::to_string(arity) + ";lam=" + join_params(f.lambda_) +
             ";mu=" + join_params(f.mu_) + "]";
  return f;
}

double TestFunction::operator()(const DistanceMatrix& rho) const {
  if (marked_) throw std::invalid_argument("TestFunction: marked function needs a marked state");
  if (rho.size() < arity_) throw std::invalid_argument("TestFunction: state smaller than arity");
  double s = 0.0;
  std::size_t idx = 0;
  for (std::size_t i = 1; i <= arity_; ++i)
    for (std::size_t j = i + 1; j <= arity_; ++j) s += lambda_[idx++] * rho(i, j);
  return std::exp(-s);
}

double TestFunction::operator()(const MarkedMatrix& rv) const {
  if (!marked_) throw std::invalid_argument("TestFunction: plain function needs a plain state");
  if (rv.size() < arity_) throw std::invalid_argument("TestFunction: state smaller than arity");
  double s = 0.0;
  std::size_t idx = 0;
  for (std::size_t i = 1; i <= arity_; ++i)
    for (std::size_t j = i + 1; j <= arity_; ++j) s += lambda_[idx++] * rv.r(i, j);
  for (std::size_t i = 1; i <= arity_; ++i) s += mu_[i - 1] * rv.v(i);
  return std::exp(-s);
}

double TestFunction::growth_derivative(const DistanceMatrix& rho) const {
  double total = 0.0;
  for (double l : lambda_) total += l;
  return -2.0 * total * (*this)(rho);
}

double TestFunction::growth_derivative(const MarkedMatrix& rv) const {
  double total = 0.0;
  for (double m : mu_) total += m;
  return -total * (*this)(rv);
}

std::vector<TestFunction> TestFunction::registry(std::size_t arity, bool marked) {
  const std::size_t pairs = arity * (arity - 1) / 2;
  auto flat = [&](double v) { return std::vector<double>(pairs, v); };
  auto graded_pairs = [&]() {
    std::vector<double> out(pairs);
    for (std::size_t m = 0; m < pairs; ++m)
      out[m] = static_cast<double>(m + 1) / static_cast<double>(pairs);
    return out;
  };
  std::vector<TestFunction> out;
  if (!marked) {
    out.push_back(plain(arity, flat(1.0)));
    out.push_back(plain(arity, flat(0.5)));
    if (pairs > 0) out.push_back(plain(arity, graded_pairs()));
    return out;
  }
  auto graded_marks = [&]() {
    std::vector<double> out_mu(arity);
    for (std::size_t i = 0; i < arity; ++i)
      out_mu[i] = static_cast<double>(i + 1) / static_cast<double>(arity);
    return out_mu;
  };
  out.push_back(TestFunction::marked(arity, flat(0.0), std::vector<double>(arity, 1.0)));
  out.push_back(TestFunction::marked(arity, flat(1.0), std::vector<double>(arity, 0.0)));
  out.push_back(TestFunction::marked(arity, flat(0.5), graded_marks()));
  if (pairs > 0) {
    out.push_back(TestFunction::marked(arity, graded_pairs(), std::vector<double>(arity, 0.5)));
  }
  return out;
}

double energy_two_sample(const std::vector<std::vector<double>>& a,
                         const std::vector<std::vector<double>>& b, std::size_t n_perm, Rng& rng) {
  if (a.size() < 20 || b.size() < 20) {
    throw std::invalid_argument("energy_two_sample: need at least 20 samples per side");
  }
  if (n_perm < 200) throw std::invalid_argument("energy_two_sample: need at least 200 permutations");
  const std::size_t n = a.size(), m = b.size(), total = n + m;
  const std::size_t dim = a.front().size();
  if (dim == 0) throw std::invalid_argument("energy_two_sample: empty vectors");
  for (const auto& row : a)
    if (row.size() != dim) throw std::invalid_argument("energy_two_sample: ragged sample");
  for (const auto& row : b)
    if (row.size() != dim) throw std::invalid_argument("energy_two_sample: ragged sample");

  auto point = [&](std::size_t i) -> const std::vector<double>& {
    return i < n ? a[i] : b[i - n];
  };
  std::vector<double> dist(total * total, 0.0);
  double sum_all = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    for (std::size_t j = i + 1; j < total; ++j) {
      const auto& x = point(i);
      const auto& y = point(j);
      double s = 0.0;
      for (std::size_t d = 0; d < dim; ++d) s += (x[d] - y[d]) * (x[d] - y[d]);
      const double v = std::sqrt(s);
      dist[i * total + j] = v;
      dist[j * total + i] = v;
      sum_all += v;
    }
  }
  std::vector<std::size_t> idx(total);
  for (std::size_t i = 0; i < total; ++i) idx[i] = i;
  auto statistic = [&]() {
    double saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) saa += dist[idx[i] * total + idx[j]];
    for (std::size_t i = n; i < total; ++i)
      for (std::size_t j = i + 1; j < total; ++j) sbb += dist[idx[i] * total + idx[j]];
    const double sab = sum_all - saa - sbb;
    const double nn = static_cast<double>(n), mm = static_cast<double>(m);
    return 2.0 * sab / (nn * mm) - 2.0 * saa / (nn * nn) - 2.0 * sbb / (mm * mm);
  };
  const double observed = statistic();
  // Ties within rounding count toward the tail, so identical samples yield 1.
  const double tie_slack = 1e-12 * (std::abs(observed) + 1.0);
  std::size_t at_least = 0;
  for (std::size_t p = 0; p < n_perm; ++p) {
    for (std::size_t i = total - 1; i > 0; --i) {
      std::swap(idx[i], idx[uniform_index(rng, i + 1)]);
    }
    if (statistic() >= observed - tie_slack) ++at_least;
  }
  return static_cast<double>(1 + at_least) / static_cast<double>(n_perm + 1);
}

void for_each_replicate(std::size_t count, std::size_t threads,
                        const std::function<void(std::size_t)>& body) {
  if (threads == 0) throw std::invalid_argument("for_each_replicate: need at least one thread");
  if (threads == 1 || count <= 1) {
    for (std::size_t r = 0; r < count; ++r) body(r);
    return;
  }
  threads = std::min(threads, count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      while (true) {
        const std::size_t r = next.fetch_add(1);
        if (r >= count) return;
        try {
          body(r);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

ExperimentReport exchangeability_check(const std::function<MarkedMatrix(Rng&)>& sampler,
                                       std::size_t arity,
                                       const std::vector<std::vector<std::size_t>>& permutations,
                                       const std::vector<TestFunction>& functionals,
                                       std::size_t reps, std::uint64_t seed) {
  if (reps < 20) throw std::invalid_argument("exchangeability_check: need at least 20 replicates");
  ExperimentReport report;
  report.name = "exchangeability";
  report.seed = seed;
  report.add_param("reps", reps);
  report.add_param("arity", arity);
  report.add_param("permutations", permutations.size());
  report.add_param("functionals", functionals.size());

  std::vector<MarkedMatrix> base, other;
  base.reserve(reps);
  other.reserve(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rng = replicate_rng(seed, r);
    base.push_back(sampler(rng));
  }
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rng = replicate_rng(seed, reps + r);
    other.push_back(sampler(rng));
  }

  const double level = 0.01;
  const std::size_t cells = std::max<std::size_t>(1, permutations.size() * functionals.size());
  const double corrected = level / static_cast<double>(cells);
  // Keeps the attainable minimum p-value below the corrected level.
  const std::size_t n_perm = std::max<std::size_t>(500, 200 * cells);
  report.add_param("level", level);
  report.add_param("bonferroni_level", corrected);

  Rng perm_rng = replicate_rng(seed, 2 * reps + 1);
  bool all_ok = true;
  for (std::size_t pi = 0; pi < permutations.size(); ++pi) {
    std::vector<MarkedMatrix> permuted;
    permuted.reserve(reps);
    for (const MarkedMatrix& rv : other) permuted.push_back(permute(rv, permutations[pi]));
    for (const TestFunction& f : functionals) {
      std::vector<std::vector<double>> lhs, rhs;
      lhs.reserve(reps);
      rhs.reserve(reps);
      for (std::size_t r = 0; r < reps; ++r) {
        lhs.push_back({f(base[r])});
        rhs.push_back({f(permuted[r])});
      }
      const double p = energy_two_sample(lhs, rhs, n_perm, perm_rng);
      const bool rejected = p < corrected;
      all_ok = all_ok && !rejected;
      report.tests.push_back({"perm" + std::to_string(pi + 1) + ":" + f.label(), p, rejected});
    }
  }
  report.passed = all_ok;
  if (permutations.empty() || functionals.empty()) {
    report.notes.push_back("no permutation/functional pairs to test; trivially exchangeable");
  }
  return report;
}

namespace {

ExperimentReport generator_report(const std::string& name, double analytic, double fd, double se,
                                  double h, std::size_t reps, std::uint64_t seed, double taylor_c) {
  ExperimentReport report;
  report.name = name;
  report.seed = seed;
  report.add_param("h", h);
  report.add_param("reps", reps);
  report.add_param("taylor_c", taylor_c);
  const double bound = taylor_c * h + 3.0 * se;
  report.estimates.push_back({"analytic", analytic, 0.0, 0});
  report.estimates.push_back({"finite_difference", fd, se, reps});
  report.estimates.push_back({"difference", std::abs(fd - analytic), se, reps});
  report.estimates.push_back({"bound", bound, 0.0, 0});
  report.passed = std::abs(fd - analytic) <= bound;
  report.notes.push_back("tolerance C*h + 3*SE is a harness choice, not a reference value");
  return report;
}

}  // namespace

ExperimentReport generator_check_rho(const XiSpec& xi, const TestFunction& phi,
                                     const DistanceMatrix& rho0, double h, std::size_t reps,
                                     std::uint64_t seed, double taylor_c) {
  if (phi.is_marked()) {
    throw std::invalid_argument("generator_check_rho: needs a plain test function");
  }
  if (rho0.size() < phi.arity()) {
    throw std::invalid_argument("generator_check_rho: state smaller than test function arity");
  }
  if (!(h > 0.0)) throw std::invalid_argument("generator_check_rho: step must be positive");
  if (reps < 2) throw std::invalid_argument("generator_check_rho: need at least two replicates");
  const std::size_t n = rho0.size();

  const double base = phi(rho0);
  double analytic = phi.growth_derivative(rho0);
  for (const Partition& pi : all_partitions(n)) {
    if (pi.is_singletons()) continue;
    analytic += rate_partition(xi, n, pi) * (phi(apply_partition(pi, rho0)) - base);
  }

  std::vector<double> values(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rng = replicate_rng(seed, r);
    auto events = sample_event_stream(xi, n, StreamMode::rho, h, rng);
    values[r] = phi(evolve_rho(LookdownPath::from_rho(rho0, std::move(events), h), h));
  }
  auto [mean, se] = mean_se(values);
  return generator_report("generator_rho", analytic, (mean - base) / h, se / h, h, reps, seed,
                          taylor_c);
}

ExperimentReport generator_check_rv(const XiSpec& xi, const TestFunction& phi,
                                    const MarkedMatrix& rv0, double h, std::size_t reps,
                                    std::uint64_t seed, double taylor_c) {
  if (!phi.is_marked()) {
    throw std::invalid_argument("generator_check_rv: needs a marked test function");
  }
  if (rv0.size() < phi.arity()) {
    throw std::invalid_argument("generator_check_rv: state smaller than test function arity");
  }
  if (is_dust_free(xi)) {
    throw std::invalid_argument("generator_check_rv: lone-singleton rates are infinite for a dust-free measure");
  }
  if (!(h > 0.0)) throw std::invalid_argument("generator_check_rv: step must be positive");
  if (reps < 2) throw std::invalid_argument("generator_check_rv: need at least two replicates");
  const std::size_t n = rv0.size();

  const double base = phi(rv0);
  double analytic = phi.growth_derivative(rv0);
  for (const SemiPartition& sigma : all_semipartitions(n)) {
    if (sigma.is_empty()) continue;
    const ExtRate rate = rate_semipartition(xi, n, sigma);
    analytic += rate.value() * (phi(apply_semipartition(sigma, rv0)) - base);
  }

  std::vector<double> values(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rng = replicate_rng(seed, r);
    auto events = sample_event_stream(xi, n, StreamMode::rv, h, rng);
    values[r] = phi(evolve_rv(LookdownPath::from_rv(rv0, std::move(events), h), h));
  }
  auto [mean, se] = mean_se(values);
  return generator_report("generator_rv", analytic, (mean - base) / h, se / h, h, reps, seed,
                          taylor_c);
}

ExperimentReport equilibrium_gap(const XiSpec& xi, std::size_t n, double t,
                                 const std::vector<TestFunction>& phis,
                                 const DistanceMatrix& rho0, std::size_t reps, std::uint64_t seed,
                                 std::optional<double> analytic_tail) {
  if (n < 2) throw std::invalid_argument("equilibrium_gap: need at least two levels");
  if (rho0.size() != n) throw std::invalid_argument("equilibrium_gap: initial state size mismatch");
  if (!(t >= 0.0)) throw std::invalid_argument("equilibrium_gap: negative time");
  if (reps < 2) throw std::invalid_argument("equilibrium_gap: need at least two replicates");
  for (const TestFunction& f : phis) {
    if (!f.is_marked() || f.arity() > n) {
      throw std::invalid_argument("equilibrium_gap: functionals must be marked with arity <= n");
    }
  }

  ExperimentReport report;
  report.name = "equilibrium";
  report.seed = seed;
  report.add_param("n", n);
  report.add_param("t", t);
  report.add_param("reps", reps);
  report.add_param("tail", analytic_tail ? format_full(*analytic_tail) : std::string("empirical"));

  std::vector<std::vector<double>> forward(phis.size(), std::vector<double>(reps));
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rng = replicate_rng(seed, r);
    auto events = sample_event_stream(xi, n, StreamMode::rho, t, rng);
    const MarkedMatrix rv = beta_finite(evolve_rho(LookdownPath::from_rho(rho0, std::move(events), t), t));
    for (std::size_t k = 0; k < phis.size(); ++k) forward[k][r] = phis[k](rv);
  }
  std::vector<std::vector<double>> stationary(phis.size(), std::vector<double>(reps));
  std::vector<double> exceed(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rng = replicate_rng(seed, reps + r);
    const DistanceMatrix bar = sample_stationary_ultrametric(xi, n, rng);
    exceed[r] = bar.max_off_diagonal() >= 2.0 * t ? 1.0 : 0.0;
    const MarkedMatrix rv = beta_finite(bar);
    for (std::size_t k = 0; k < phis.size(); ++k) stationary[k][r] = phis[k](rv);
  }

  double tail, tail_se;
  if (analytic_tail) {
    tail = *analytic_tail;
    tail_se = 0.0;
  } else {
    auto [m, s] = mean_se(exceed);
    tail = m;
    tail_se = s;
  }
  const double rhs = 2.0 * tail;
  report.estimates.push_back({"tail_probability", tail, tail_se, analytic_tail ? 0 : reps});

  bool all_ok = true;
  for (std::size_t k = 0; k < phis.size(); ++k) {
    auto [fm, fs] = mean_se(forward[k]);
    auto [sm, ss] = mean_se(stationary[k]);
    const double lhs = std::abs(fm - sm);
    const double combined = std::sqrt(fs * fs + ss * ss + 4.0 * tail_se * tail_se);
    const bool ok = lhs <= rhs + 3.0 * combined;
    all_ok = all_ok && ok;
    report.estimates.push_back({phis[k].label() + ":gap", lhs, combined, reps});
    report.estimates.push_back({phis[k].label() + ":bound", rhs + 3.0 * combined, 0.0, 0});
    report.tests.push_back({phis[k].label(), ok ? 1.0 : 0.0, !ok});
  }
  report.passed = all_ok;
  return report;
}

ExperimentReport summarize_trees(const std::string& name,
                                 const std::vector<DistanceMatrix>& trees,
                                 const std::vector<double>& depth_grid) {
  if (trees.empty()) throw std::invalid_argument("summarize_trees: empty batch");
  const std::size_t n = trees.front().size();
  if (n < 2) throw std::invalid_argument("summarize_trees: trees need at least two leaves");
  for (const DistanceMatrix& t : trees) {
    if (t.size() != n) throw std::invalid_argument("summarize_trees: mixed tree sizes");
  }

  std::vector<double> tmrca, min_external;
  std::vector<double> external;
  tmrca.reserve(trees.size());
  min_external.reserve(trees.size());
  external.reserve(trees.size() * n);
  std::vector<std::vector<double>> blocks(depth_grid.size());
  for (const DistanceMatrix& tree : trees) {
    tmrca.push_back(0.5 * tree.max_off_diagonal());
    double least = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i <= n; ++i) {
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t j = 1; j <= n; ++j) {
        if (j != i) nearest = std::min(nearest, tree(i, j));
      }
      external.push_back(0.5 * nearest);
      least = std::min(least, 0.5 * nearest);
    }
    min_external.push_back(least);
    if (!depth_grid.empty()) {
      const auto path = extract_coalescent(tree, depth_grid);
      for (std::size_t k = 0; k < depth_grid.size(); ++k) {
        blocks[k].push_back(static_cast<double>(path[k].count()));
      }
    }
  }

  ExperimentReport report;
  report.name = name;
  report.add_param("trees", trees.size());
  report.add_param("n", n);
  auto add = [&](const std::string& label, const std::vector<double>& xs) {
    auto [m, s] = mean_se(xs);
    report.estimates.push_back({label, m, s, xs.size()});
  };
  add("tmrca", tmrca);
  add("external_branch", external);
  add("min_external_branch", min_external);
  report.estimates.push_back(
      {"min_external_branch_median", median_of(min_external), 0.0, min_external.size()});
  for (std::size_t k = 0; k < depth_grid.size(); ++k) {
    add("blocks@" + format_full(depth_grid[k]), blocks[k]);
  }
  report.passed = true;
  return report;
}

double polynomial_exact(const FiniteMMSpace& space, const TestFunction& phi) {
  const std::size_t k = phi.arity();
  const std::size_t m = space.size();
  double tuples = 1.0;
  for (std::size_t i = 0; i < k; ++i) tuples *= static_cast<double>(m);
  if (tuples > 2e7) throw std::length_error("polynomial_exact: tuple enumeration too large");

  std::vector<std::size_t> idx(k, 1);
  double total = 0.0;
  while (true) {
    double weight = 1.0;
    for (std::size_t a = 0; a < k; ++a) weight *= space.weight(idx[a]);
    if (weight > 0.0) {
      MarkedMatrix rv(k);
      for (std::size_t a = 1; a <= k; ++a) {
        rv.set_v(a, space.mark(idx[a - 1]));
        for (std::size_t b = a + 1; b <= k; ++b) {
          rv.set_r(a, b, space.dist()(idx[a - 1], idx[b - 1]));
        }
      }
      total += weight * (phi.is_marked() ? phi(rv) : phi(alpha(rv)));
    }
    std::size_t pos = 0;
    while (pos < k && idx[pos] == m) {
      idx[pos] = 1;
      ++pos;
    }
    if (pos == k) break;
    ++idx[pos];
  }
  return total;
}

std::pair<double, double> polynomial_mc(const FiniteMMSpace& space, const TestFunction& phi,
                                        std::size_t reps, Rng& rng) {
  if (reps < 2) throw std::invalid_argument("polynomial_mc: need at least two replicates");
  std::vector<double> values(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    const SampledMatrices draw = sample_distance_matrix(space, phi.arity(), rng);
    values[r] = phi.is_marked() ? phi(draw.rv) : phi(draw.rho);
  }
  auto [m, s] = mean_se(values);
  return {m, s};
}

}  // namespace coaltree
