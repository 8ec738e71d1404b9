#include "doctest.h"

#include <algorithm>
#include <map>
#include <set>

#include "coaltree/partitions.hpp"
#include "coaltree/treespace.hpp"
#include "oracles.hpp"

using namespace coaltree;

namespace {

DistanceMatrix random_symmetric(std::size_t n, Rng& rng, double scale = 2.0) {
  DistanceMatrix m(n);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = i + 1; j <= n; ++j) m.set(i, j, scale * uniform01(rng));
  return m;
}

MarkedMatrix random_marked(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = uniform01(rng);
  return MarkedMatrix(random_symmetric(n, rng), std::move(v));
}

}  // namespace

TEST_CASE("partition construction and canonical order") {
  auto p = Partition::from_blocks(4, {{2, 4}, {1, 3}});
  CHECK(p.count() == 2);
  CHECK(p.block_of(1) == 1);
  CHECK(p.block_of(3) == 1);
  CHECK(p.block_of(2) == 2);
  CHECK(p.block_of(4) == 2);
  CHECK(p.to_string() == "{1,3}{2,4}");

  CHECK(Partition::singletons(3).is_singletons());
  CHECK(Partition::pair_merger(4, 3, 1) == Partition::from_blocks(4, {{1, 3}, {2}, {4}}));

  CHECK_THROWS_AS(Partition::from_blocks(3, {{1, 2}}), std::invalid_argument);
  CHECK_THROWS_AS(Partition::from_blocks(3, {{1, 2}, {2, 3}}), std::invalid_argument);
  CHECK_THROWS_AS(Partition::from_blocks(3, {{1, 2, 4}}), std::invalid_argument);
  CHECK_THROWS_AS(Partition::from_labels(3, {1, 3, 2}), std::invalid_argument);
}

TEST_CASE("restrict examples") {
  auto p = Partition::from_blocks(3, {{1, 3}, {2}});
  CHECK(restrict_to(p, 2) == Partition::singletons(2));
  CHECK(restrict_to(Partition::from_blocks(3, {{1, 2, 3}}), 2) ==
        Partition::from_blocks(2, {{1, 2}}));
  CHECK(restrict_to(Partition::singletons(5), 3) == Partition::singletons(3));
  CHECK_THROWS_AS(restrict_to(p, 4), std::invalid_argument);
}

TEST_CASE("restrict is idempotent across intermediate sizes") {
  Rng rng = replicate_rng(11, 0);
  for (int rep = 0; rep < 50; ++rep) {
    auto parts = all_partitions(6);
    const auto& p = parts[uniform_index(rng, parts.size())];
    CHECK(restrict_to(restrict_to(p, 4), 2) == restrict_to(p, 2));
    CHECK(restrict_to(restrict_to(p, 5), 3) == restrict_to(p, 3));
  }
}

TEST_CASE("strip_restrict examples") {
  auto p1 = Partition::from_blocks(3, {{1, 2}, {3}});
  CHECK(strip_restrict(p1, 3) == SemiPartition::from_blocks(3, {{1, 2}}));

  // Block {3,7} continues beyond [3], so its trace {3} survives stripping.
  auto p2 = Partition::from_blocks(7, {{3, 7}, {1}, {2}, {4}, {5}, {6}});
  CHECK(strip_restrict(p2, 3) == SemiPartition::from_blocks(3, {{3}}));

  CHECK(strip_restrict(Partition::singletons(5), 4) == SemiPartition::empty(4));

  CHECK_THROWS_AS(strip_restrict(p1, std::vector<bool>{true}, 2), std::invalid_argument);
}

TEST_CASE("apply_partition examples") {
  Rng rng = replicate_rng(12, 0);
  auto rho = random_symmetric(3, rng);

  auto merged = apply_partition(Partition::from_blocks(3, {{1, 2}, {3}}), rho);
  CHECK(merged(1, 2) == 0.0);
  CHECK(merged(1, 3) == rho(1, 2));
  CHECK(merged(2, 3) == rho(1, 2));

  CHECK(apply_partition(Partition::singletons(3), rho) == rho);

  auto all = apply_partition(Partition::from_blocks(3, {{1, 2, 3}}), rho);
  CHECK(all.max_off_diagonal() == 0.0);
}

TEST_CASE("apply_semipartition examples") {
  DistanceMatrix r(2);
  r.set(1, 2, 0.7);
  MarkedMatrix rv(r, {0.2, 0.4});

  auto one = apply_semipartition(SemiPartition::from_blocks(2, {{1}}), rv);
  CHECK(one.v(1) == 0.0);
  CHECK(one.v(2) == 0.4);
  CHECK(one.r()(1, 2) == doctest::Approx(0.9).epsilon(1e-14));

  auto both = apply_semipartition(SemiPartition::from_blocks(2, {{1, 2}}), rv);
  CHECK(both.v(1) == 0.0);
  CHECK(both.v(2) == 0.0);
  CHECK(both.r()(1, 2) == 0.0);

  CHECK(apply_semipartition(SemiPartition::empty(2), rv) == rv);
}

TEST_CASE("semipartition transform commutes with the distance transform") {
  // alpha(sigma(r, v)) must equal pi_sigma(alpha(r, v)) with pi_sigma the
  // completion of sigma by singletons.
  Rng rng = replicate_rng(13, 0);
  for (std::size_t n = 2; n <= 4; ++n) {
    for (const auto& sigma : all_semipartitions(n)) {
      auto rv = random_marked(n, rng);
      std::vector<std::size_t> labels(n);
      for (std::size_t i = 1; i <= n; ++i) labels[i - 1] = sigma.completed_block_of(i);
      auto pi = Partition::from_labels(n, labels);
      auto lhs = alpha(apply_semipartition(sigma, rv));
      auto rhs = apply_partition(pi, alpha(rv));
      for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = i + 1; j <= n; ++j)
          CHECK(lhs(i, j) == doctest::Approx(rhs(i, j)).epsilon(1e-12));
    }
  }
}

TEST_CASE("paintbox_sample degenerate and two-interval cases") {
  Rng rng = replicate_rng(14, 0);

  for (int rep = 0; rep < 20; ++rep) {
    auto draw = paintbox_sample(SimplexPoint({1.0}), 5, rng);
    CHECK(draw.partition == Partition::from_blocks(5, {{1, 2, 3, 4, 5}}));
    CHECK(draw.nonsingleton == std::vector<bool>{true});
    CHECK(std::none_of(draw.dust.begin(), draw.dust.end(), [](bool b) { return b; }));
  }

  // P(1 ~ 2) equals the squared two-norm for x = (0.5, 0.5).
  int same = 0;
  const int reps = 20000;
  for (int rep = 0; rep < reps; ++rep) {
    auto draw = paintbox_sample(SimplexPoint({0.5, 0.5}), 2, rng);
    same += draw.partition.count() == 1;
  }
  const double phat = static_cast<double>(same) / reps;
  CHECK(std::abs(phat - 0.5) < 3.0 * std::sqrt(0.25 / reps));

  // P(both dust) = 0.49 for x = (0.3).
  int dust2 = 0;
  for (int rep = 0; rep < reps; ++rep) {
    auto draw = paintbox_sample(SimplexPoint({0.3}), 2, rng);
    dust2 += draw.dust[0] && draw.dust[1];
  }
  const double dhat = static_cast<double>(dust2) / reps;
  CHECK(std::abs(dhat - 0.49) < 3.0 * std::sqrt(0.49 * 0.51 / reps));
}

TEST_CASE("paintbox restricted law is exchangeable") {
  // Block-size profiles must have the same frequencies before and after a
  // fixed relabeling.
  Rng rng = replicate_rng(15, 0);
  const std::vector<std::size_t> perm{3, 1, 4, 2};
  const SimplexPoint x({0.4, 0.2});
  std::map<std::string, int> base, relabeled;
  const int reps = 20000;
  auto profile = [](const Partition& p) {
    std::vector<std::size_t> sizes;
    for (const auto& b : p.blocks()) sizes.push_back(b.size());
    std::sort(sizes.begin(), sizes.end());
    std::string s;
    for (auto v : sizes) s += std::to_string(v) + ",";
    return s;
  };
  for (int rep = 0; rep < reps; ++rep) {
    auto draw = paintbox_sample(x, 4, rng);
    ++base[profile(draw.partition)];
    ++relabeled[profile(permute(draw.partition, perm))];
  }
  // The profile is permutation-invariant pointwise, so the two tables must
  // be identical; this pins the relabeling convention.
  CHECK(base == relabeled);
}

TEST_CASE("enumerate matches Bell-number oracles") {
  CHECK(all_partitions(1).size() == 1);
  CHECK(all_partitions(3).size() == 5);
  for (std::size_t n = 1; n <= 7; ++n) CHECK(all_partitions(n).size() == oracles::bell(n));
  for (std::size_t n = 1; n <= 5; ++n)
    CHECK(all_semipartitions(n).size() == oracles::bell(n + 1));

  // The five semi-partitions of [2], listed exhaustively.
  auto semis = all_semipartitions(2);
  std::set<std::string> names;
  for (const auto& s : semis) names.insert(s.to_string());
  CHECK(names == std::set<std::string>{"{}", "{1}", "{2}", "{1}{2}", "{1,2}"});

  // No duplicates.
  std::set<std::string> seen;
  for (const auto& p : all_partitions(6)) CHECK(seen.insert(p.to_string()).second);

  CHECK_THROWS_AS(all_partitions(13), std::length_error);
  CHECK_THROWS_AS(all_semipartitions(13), std::length_error);
}

TEST_CASE("permute conventions") {
  Rng rng = replicate_rng(16, 0);
  auto rho2 = random_symmetric(2, rng);
  CHECK(permute(rho2, {2, 1}) == rho2);

  MarkedMatrix rv(DistanceMatrix(3), {1.0, 2.0, 3.0});
  auto moved = permute(rv, {2, 3, 1});
  CHECK(moved.v(1) == 2.0);
  CHECK(moved.v(2) == 3.0);
  CHECK(moved.v(3) == 1.0);

  auto rho = random_symmetric(4, rng);
  std::vector<std::size_t> id{1, 2, 3, 4};
  CHECK(permute(rho, id) == rho);

  // Action convention: applying p then q equals applying the composite
  // (p then q) in one step, with (p then q)(i) = p(q(i)).
  std::vector<std::size_t> p{2, 3, 4, 1}, q{3, 1, 2, 4}, pq(4);
  for (std::size_t i = 0; i < 4; ++i) pq[i] = p[q[i] - 1];
  CHECK(permute(permute(rho, p), q) == permute(rho, pq));

  CHECK_THROWS_AS(permute(rho, std::vector<std::size_t>{1, 1, 2, 3}), std::invalid_argument);
}
