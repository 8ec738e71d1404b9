#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "coaltree/lookdown.hpp"
#include "coaltree/stats.hpp"
#include "coaltree/treespace.hpp"
#include "coaltree/xi.hpp"
#include "doctest.h"

using namespace coaltree;

namespace {

XiSpec kingman_spec(double mass = 1.0) { return XiSpec(mass, {}); }

XiSpec half_spec() { return XiSpec(0.0, {XiAtom{1.0, SimplexPoint({0.5})}}); }

DistanceMatrix pair_matrix(double d) {
  DistanceMatrix rho(2);
  rho.set(1, 2, d);
  return rho;
}

const ReportEntry& find_estimate(const ExperimentReport& report, const std::string& label) {
  for (const ReportEntry& e : report.estimates) {
    if (e.label == label) return e;
  }
  FAIL("missing estimate ", label);
  return report.estimates.front();
}

double ks_against_uniform(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - xs[i]));
    d = std::max(d, std::abs(xs[i] - static_cast<double>(i) / n));
  }
  return d;
}

}  // namespace

TEST_CASE("test functions evaluate the product exponential and its growth slope") {
  const TestFunction pair = TestFunction::plain(2, {1.0});
  CHECK(pair.arity() == 2);
  CHECK_FALSE(pair.is_marked());
  CHECK(pair(pair_matrix(1.5)) == doctest::Approx(std::exp(-1.5)).epsilon(1e-14));
  CHECK(pair.growth_derivative(pair_matrix(1.5)) ==
        doctest::Approx(-2.0 * std::exp(-1.5)).epsilon(1e-14));

  DistanceMatrix rho(4);
  rho.set(1, 2, 0.4);
  rho.set(1, 3, 1.2);
  rho.set(2, 3, 1.2);
  rho.set(1, 4, 2.0);
  rho.set(2, 4, 2.0);
  rho.set(3, 4, 2.0);
  const TestFunction triple = TestFunction::plain(3, {0.5, 1.0, 2.0});
  const double expected = std::exp(-(0.5 * 0.4 + 1.0 * 1.2 + 2.0 * 1.2));
  CHECK(triple(rho) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(triple.growth_derivative(rho) == doctest::Approx(-7.0 * expected).epsilon(1e-14));

  MarkedMatrix rv(2);
  rv.set_r(1, 2, 0.8);
  rv.set_v(1, 0.3);
  rv.set_v(2, 0.5);
  const TestFunction marked = TestFunction::marked(2, {0.5}, {1.0, 2.0});
  CHECK(marked(rv) == doctest::Approx(std::exp(-1.7)).epsilon(1e-14));
  CHECK(marked.growth_derivative(rv) == doctest::Approx(-3.0 * std::exp(-1.7)).epsilon(1e-14));

  const double eps = 1e-6;
  DistanceMatrix up = rho, down = rho;
  up.add_off_diagonal(2.0 * eps);
  down.add_off_diagonal(-2.0 * eps);
  const double fd_plain = (triple(up) - triple(down)) / (2.0 * eps);
  CHECK(std::abs(fd_plain - triple.growth_derivative(rho)) <= 1e-6);

  MarkedMatrix rv_up = rv, rv_down = rv;
  for (std::size_t i = 1; i <= 2; ++i) {
    rv_up.set_v(i, rv.v(i) + eps);
    rv_down.set_v(i, rv.v(i) - eps);
  }
  const double fd_marked = (marked(rv_up) - marked(rv_down)) / (2.0 * eps);
  CHECK(std::abs(fd_marked - marked.growth_derivative(rv)) <= 1e-6);
}

TEST_CASE("test function construction and evaluation reject misuse") {
  CHECK_THROWS_AS(TestFunction::plain(0, {}), std::invalid_argument);
  CHECK_THROWS_AS(TestFunction::plain(3, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(TestFunction::plain(2, {-0.5}), std::invalid_argument);
  CHECK_THROWS_AS(TestFunction::marked(2, {1.0}, {0.5}), std::invalid_argument);
  CHECK_THROWS_AS(TestFunction::marked(2, {1.0}, {0.5, -1.0}), std::invalid_argument);

  const TestFunction plain = TestFunction::plain(2, {1.0});
  const TestFunction marked = TestFunction::marked(2, {1.0}, {1.0, 1.0});
  CHECK_THROWS_AS(plain(MarkedMatrix(2)), std::invalid_argument);
  CHECK_THROWS_AS(marked(DistanceMatrix(2)), std::invalid_argument);
  CHECK_THROWS_AS(plain(DistanceMatrix(1)), std::invalid_argument);
  CHECK_THROWS_AS(marked(MarkedMatrix(1)), std::invalid_argument);
}

TEST_CASE("registry members are valid, bounded, and distinct") {
  const auto plain = TestFunction::registry(3, false);
  CHECK(plain.size() == 3);
  DistanceMatrix rho(3);
  rho.set(1, 2, 0.5);
  rho.set(1, 3, 1.5);
  rho.set(2, 3, 1.5);
  for (const TestFunction& f : plain) {
    CHECK_FALSE(f.is_marked());
    CHECK(f.arity() == 3);
    const double value = f(rho);
    CHECK(value > 0.0);
    CHECK(value <= 1.0);
  }
  for (std::size_t i = 0; i < plain.size(); ++i)
    for (std::size_t j = i + 1; j < plain.size(); ++j) CHECK(plain[i].label() != plain[j].label());

  const auto marked = TestFunction::registry(2, true);
  CHECK(marked.size() == 4);
  for (const TestFunction& f : marked) CHECK(f.is_marked());

  const auto unary = TestFunction::registry(1, true);
  CHECK(unary.size() == 3);
  MarkedMatrix point(1);
  point.set_v(1, 0.7);
  CHECK(unary.front()(point) == doctest::Approx(std::exp(-0.7)).epsilon(1e-14));
}

TEST_CASE("energy p-value is one for identical degenerate samples") {
  const std::vector<std::vector<double>> a(40, {0.5, 1.0});
  Rng rng = replicate_rng(11, 0);
  CHECK(energy_two_sample(a, a, 500, rng) == doctest::Approx(1.0));
}

TEST_CASE("energy separates disjoint point clouds") {
  std::vector<std::vector<double>> a, b;
  for (std::size_t i = 0; i < 50; ++i) {
    a.push_back({0.001 * static_cast<double>(i)});
    b.push_back({1.0 + 0.001 * static_cast<double>(i)});
  }
  Rng rng = replicate_rng(12, 0);
  CHECK(energy_two_sample(a, b, 500, rng) < 0.01);
}

TEST_CASE("energy p-values are near uniform under the null") {
  std::vector<double> pvals;
  Rng rng = replicate_rng(13, 0);
  for (std::size_t run = 0; run < 200; ++run) {
    std::vector<std::vector<double>> a, b;
    for (std::size_t i = 0; i < 25; ++i) {
      a.push_back({uniform01(rng)});
      b.push_back({uniform01(rng)});
    }
    pvals.push_back(energy_two_sample(a, b, 200, rng));
  }
  CHECK(ks_against_uniform(pvals) < 0.12);
  const double low = static_cast<double>(
      std::count_if(pvals.begin(), pvals.end(), [](double p) { return p <= 0.05; }));
  CHECK(low / 200.0 <= 0.10);
}

TEST_CASE("energy input validation") {
  const std::vector<std::vector<double>> small(10, {0.0});
  const std::vector<std::vector<double>> ok(25, {0.0});
  Rng rng = replicate_rng(14, 0);
  CHECK_THROWS_AS(energy_two_sample(small, ok, 500, rng), std::invalid_argument);
  CHECK_THROWS_AS(energy_two_sample(ok, small, 500, rng), std::invalid_argument);
  CHECK_THROWS_AS(energy_two_sample(ok, ok, 100, rng), std::invalid_argument);
  std::vector<std::vector<double>> ragged = ok;
  ragged[3] = {0.0, 1.0};
  CHECK_THROWS_AS(energy_two_sample(ragged, ok, 500, rng), std::invalid_argument);
  const std::vector<std::vector<double>> empty_dim(25, std::vector<double>{});
  CHECK_THROWS_AS(energy_two_sample(empty_dim, empty_dim, 500, rng), std::invalid_argument);
}

TEST_CASE("replicate runner covers every index exactly once") {
  for (std::size_t threads : {std::size_t{1}, std::size_t{4}, std::size_t{7}}) {
    std::vector<int> hits(100, 0);
    for_each_replicate(100, threads, [&](std::size_t r) { hits[r] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  }

  std::vector<std::size_t> order;
  for_each_replicate(5, 1, [&](std::size_t r) { order.push_back(r); });
  CHECK(order == std::vector<std::size_t>{0, 1, 2, 3, 4});

  std::vector<int> tiny(2, 0);
  for_each_replicate(2, 8, [&](std::size_t r) { tiny[r] += 1; });
  CHECK(tiny == std::vector<int>{1, 1});

  bool called = false;
  for_each_replicate(0, 4, [&](std::size_t) { called = true; });
  CHECK_FALSE(called);

  CHECK_THROWS_AS(for_each_replicate(3, 0, [](std::size_t) {}), std::invalid_argument);
  CHECK_THROWS_AS(for_each_replicate(20, 4,
                                     [](std::size_t r) {
                                       if (r == 7) throw std::runtime_error("boom");
                                     }),
                  std::runtime_error);
  CHECK_THROWS_AS(for_each_replicate(20, 1,
                                     [](std::size_t r) {
                                       if (r == 7) throw std::runtime_error("boom");
                                     }),
                  std::runtime_error);
}

namespace {

MarkedMatrix lookdown_state(Rng& rng) {
  auto events = sample_event_stream(kingman_spec(), 3, StreamMode::rho, 0.7, rng);
  const LookdownPath path = LookdownPath::from_rho(DistanceMatrix(3), std::move(events), 0.7);
  return beta_finite(evolve_rho(path, 0.7));
}

}  // namespace

TEST_CASE("exchangeability holds for lookdown states") {
  const std::vector<std::vector<std::size_t>> perms = {{2, 1, 3}, {3, 1, 2}};
  const auto report =
      exchangeability_check(lookdown_state, 3, perms, TestFunction::registry(3, true), 60, 21);
  CHECK(report.passed);
  CHECK(report.tests.size() == 8);
  for (const ReportTest& t : report.tests) CHECK_FALSE(t.rejected);
}

TEST_CASE("exchangeability rejects a sampler with sorted marks") {
  auto sorted_marks = [](Rng& rng) {
    MarkedMatrix rv = lookdown_state(rng);
    std::vector<double> v = rv.marks();
    std::sort(v.begin(), v.end());
    for (std::size_t i = 1; i <= 3; ++i) rv.set_v(i, v[i - 1]);
    return rv;
  };
  const std::vector<std::vector<std::size_t>> reverse = {{3, 2, 1}};
  const std::vector<TestFunction> probes = {TestFunction::marked(3, {0, 0, 0}, {0, 0, 1})};
  const auto report = exchangeability_check(sorted_marks, 3, reverse, probes, 100, 22);
  CHECK_FALSE(report.passed);
  CHECK(report.tests.size() == 1);
  CHECK(report.tests.front().rejected);
}

TEST_CASE("exchangeability with nothing to test passes trivially") {
  const auto report = exchangeability_check(lookdown_state, 3, {}, {}, 25, 23);
  CHECK(report.passed);
  CHECK(report.tests.empty());
  CHECK_FALSE(report.notes.empty());
  CHECK_THROWS_AS(exchangeability_check(lookdown_state, 3, {}, {}, 5, 23), std::invalid_argument);
}

TEST_CASE("distance generator matches the pair-merger expansion") {
  const TestFunction phi = TestFunction::plain(2, {1.0});

  const auto at_zero = generator_check_rho(kingman_spec(), phi, DistanceMatrix(2), 0.01, 20000, 91);
  CHECK(find_estimate(at_zero, "analytic").value == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(at_zero.passed);

  const double x = 1.5;
  const auto away = generator_check_rho(kingman_spec(), phi, pair_matrix(x), 0.01, 20000, 92);
  const double expected = -2.0 * std::exp(-x) + (1.0 - std::exp(-x));
  CHECK(find_estimate(away, "analytic").value == doctest::Approx(expected).epsilon(1e-12));
  CHECK(away.passed);

  const TestFunction constant = TestFunction::plain(2, {0.0});
  const auto flat = generator_check_rho(kingman_spec(), constant, pair_matrix(x), 0.01, 50, 93);
  CHECK(find_estimate(flat, "analytic").value == doctest::Approx(0.0));
  CHECK(find_estimate(flat, "finite_difference").value == doctest::Approx(0.0));
  CHECK(flat.passed);

  DistanceMatrix rho3(3);
  rho3.set(1, 2, 0.6);
  rho3.set(1, 3, 1.4);
  rho3.set(2, 3, 1.4);
  const auto multi =
      generator_check_rho(half_spec(), TestFunction::plain(3, {1.0, 0.5, 0.25}), rho3, 0.01, 20000, 94);
  CHECK(multi.passed);

  CHECK_THROWS_AS(generator_check_rho(kingman_spec(), TestFunction::marked(2, {1.0}, {1.0, 1.0}),
                                      DistanceMatrix(2), 0.01, 100, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(generator_check_rho(kingman_spec(), phi, DistanceMatrix(2), 0.0, 100, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(generator_check_rho(kingman_spec(), phi, DistanceMatrix(2), 0.01, 1, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(generator_check_rho(kingman_spec(), TestFunction::plain(3, {1, 1, 1}),
                                      DistanceMatrix(2), 0.01, 100, 1),
                  std::invalid_argument);
}

TEST_CASE("marked generator matches a hand-built rate expansion with dust") {
  // Single frequency one half on two levels: each lone-level covering has
  // rate 1, the pair covering has rate 1, and nothing else is visible.
  MarkedMatrix rv0(2);
  rv0.set_r(1, 2, 0.8);
  rv0.set_v(1, 0.3);
  rv0.set_v(2, 0.5);
  const TestFunction phi = TestFunction::marked(2, {0.5}, {1.0, 2.0});

  const double phi0 = std::exp(-(0.5 * 0.8 + 0.3 + 2.0 * 0.5));
  const double cover1 = std::exp(-(0.5 * (0.8 + 0.3) + 2.0 * 0.5));
  const double cover2 = std::exp(-(0.5 * (0.8 + 0.5) + 0.3));
  const double oracle = -3.0 * phi0 + (cover1 - phi0) + (cover2 - phi0) + (1.0 - phi0);

  const auto report = generator_check_rv(half_spec(), phi, rv0, 0.01, 30000, 95);
  CHECK(find_estimate(report, "analytic").value == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(report.passed);

  CHECK_THROWS_AS(generator_check_rv(kingman_spec(), phi, rv0, 0.01, 100, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(generator_check_rv(half_spec(), TestFunction::plain(2, {1.0}), rv0, 0.01, 100, 1),
                  std::invalid_argument);
}

TEST_CASE("equilibrium gap stays below twice the stationary tail") {
  const auto phis = TestFunction::registry(2, true);

  const auto analytic = equilibrium_gap(kingman_spec(), 2, 1.0, phis, DistanceMatrix(2), 4000, 31,
                                        std::exp(-1.0));
  CHECK(analytic.passed);
  const ReportEntry& tail = find_estimate(analytic, "tail_probability");
  CHECK(tail.value == doctest::Approx(std::exp(-1.0)));
  CHECK(tail.se == 0.0);

  const auto empirical = equilibrium_gap(kingman_spec(), 2, 2.0, phis, DistanceMatrix(2), 4000, 32);
  CHECK(empirical.passed);
  CHECK(find_estimate(empirical, "tail_probability").value ==
        doctest::Approx(std::exp(-2.0)).epsilon(0.25));

  CHECK_THROWS_AS(equilibrium_gap(kingman_spec(), 2, 1.0, phis, DistanceMatrix(3), 100, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      equilibrium_gap(kingman_spec(), 2, 1.0, {TestFunction::plain(2, {1.0})}, DistanceMatrix(2), 100, 1),
      std::invalid_argument);
  CHECK_THROWS_AS(equilibrium_gap(kingman_spec(), 2, 1.0, TestFunction::registry(3, true),
                                  DistanceMatrix(2), 100, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(equilibrium_gap(kingman_spec(), 2, -1.0, phis, DistanceMatrix(2), 100, 1),
                  std::invalid_argument);
}

TEST_CASE("tree batch summaries recover coalescent expectations") {
  Rng rng = replicate_rng(41, 0);
  std::vector<DistanceMatrix> trees;
  for (std::size_t r = 0; r < 1500; ++r) {
    trees.push_back(sample_stationary_ultrametric(kingman_spec(), 10, rng));
  }
  const auto report = summarize_trees("kingman10", trees, {0.5});
  const ReportEntry& tmrca = find_estimate(report, "tmrca");
  CHECK(std::abs(tmrca.value - 1.8) <= 3.0 * tmrca.se);
  CHECK(std::abs(find_estimate(report, "external_branch").value - 0.2) <= 0.03);
  CHECK(find_estimate(report, "min_external_branch").value > 0.0);
  CHECK(find_estimate(report, "min_external_branch_median").value > 0.0);
  const ReportEntry& blocks = find_estimate(report, "blocks@0.5");
  CHECK(blocks.value > 2.0);
  CHECK(blocks.value < 10.0);

  std::vector<DistanceMatrix> pairs;
  for (std::size_t r = 0; r < 50; ++r) {
    pairs.push_back(sample_stationary_ultrametric(kingman_spec(), 2, rng));
  }
  const auto origin = summarize_trees("kingman2", pairs, {0.0});
  const ReportEntry& at_zero = find_estimate(origin, "blocks@0");
  CHECK(at_zero.value == doctest::Approx(2.0));
  CHECK(at_zero.se == 0.0);

  CHECK_THROWS_AS(summarize_trees("empty", {}, {}), std::invalid_argument);
  CHECK_THROWS_AS(summarize_trees("tiny", {DistanceMatrix(1)}, {}), std::invalid_argument);
  CHECK_THROWS_AS(summarize_trees("mixed", {DistanceMatrix(2), DistanceMatrix(3)}, {}),
                  std::invalid_argument);
}

TEST_CASE("moment enumeration agrees with sampling and a hand computation") {
  DistanceMatrix d2(2);
  d2.set(1, 2, 1.0);
  const FiniteMMSpace two(d2, {0.6, 0.4}, {0.2, 0.7});

  const double plain_hand = 0.36 * std::exp(-0.4) + 0.16 * std::exp(-1.4) +
                            2.0 * 0.24 * std::exp(-1.9);
  CHECK(polynomial_exact(two, TestFunction::plain(2, {1.0})) ==
        doctest::Approx(plain_hand).epsilon(1e-13));

  const TestFunction asym = TestFunction::marked(2, {1.0}, {0.5, 1.5});
  const double marked_hand = 0.36 * std::exp(-0.4) + 0.16 * std::exp(-1.4) +
                             0.24 * std::exp(-2.15) + 0.24 * std::exp(-1.65);
  CHECK(polynomial_exact(two, asym) == doctest::Approx(marked_hand).epsilon(1e-13));

  Rng rng = replicate_rng(51, 0);
  const DistanceMatrix base = sample_stationary_ultrametric(kingman_spec(), 4, rng);
  const FiniteMMSpace four(base, {0.4, 0.3, 0.2, 0.1}, {0.1, 0.2, 0.3, 0.4});
  for (const TestFunction& phi :
       {TestFunction::marked(2, {1.0}, {1.0, 1.0}), TestFunction::plain(3, {0.5, 0.5, 0.5})}) {
    const double exact = polynomial_exact(four, phi);
    const auto [mean, se] = polynomial_mc(four, phi, 20000, rng);
    CHECK(std::abs(exact - mean) <= 4.0 * se + 1e-9);
  }

  Rng big_rng = replicate_rng(52, 0);
  const DistanceMatrix wide = sample_stationary_ultrametric(kingman_spec(), 12, big_rng);
  const FiniteMMSpace big(wide, std::vector<double>(12, 1.0 / 12.0));
  CHECK_THROWS_AS(polynomial_exact(big, TestFunction::plain(8, std::vector<double>(28, 1.0))),
                  std::length_error);
  CHECK_THROWS_AS(polynomial_mc(two, asym, 1, rng), std::invalid_argument);
}

TEST_CASE("reports serialize deterministically with full precision") {
  CHECK(format_full(0.5) == "0.5");
  CHECK(format_full(1.0 / 3.0) == "0.33333333333333331");

  ExperimentReport report;
  report.name = "demo";
  report.seed = 42;
  report.passed = true;
  report.add_param("beta", 0.5);
  report.add_param("alpha", std::size_t{7});
  report.add_param("gamma", "x");
  report.estimates.push_back({"m", 0.5, 0.25, 100});
  report.tests.push_back({"t", 0.5, false});
  report.notes.push_back("note line");

  const std::string expected =
      "report: demo\n"
      "seed: 42\n"
      "passed: true\n"
      "parameters:\n"
      "  alpha: 7\n"
      "  beta: 0.5\n"
      "  gamma: x\n"
      "estimates:\n"
      "  m: value=0.5 se=0.25 n=100\n"
      "tests:\n"
      "  t: p=0.5 rejected=false\n"
      "notes:\n"
      "  - note line\n";
  CHECK(report.to_text() == expected);
  std::ostringstream os;
  report.save(os);
  CHECK(os.str() == expected);

  const TestFunction phi = TestFunction::plain(2, {1.0});
  const auto a = generator_check_rho(kingman_spec(), phi, DistanceMatrix(2), 0.05, 50, 7);
  const auto b = generator_check_rho(kingman_spec(), phi, DistanceMatrix(2), 0.05, 50, 7);
  CHECK(a.to_text() == b.to_text());
  CHECK_FALSE(a.to_text().empty());
}
