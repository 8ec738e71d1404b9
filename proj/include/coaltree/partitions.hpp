#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "coaltree/matrix.hpp"
#include "coaltree/rng.hpp"

namespace coaltree {

// Partition of {1, ..., n} into disjoint nonempty blocks covering all of
// [n]. Blocks are indexed 1..count() in increasing order of their minimal
// elements, so block 1 always contains 1.
class Partition {
 public:
  Partition() = default;
  static Partition singletons(std::size_t n);
  static Partition from_blocks(std::size_t n, const std::vector<std::vector<std::size_t>>& blocks);
  // The partition of [n] whose only non-singleton block is {i, j}.
  static Partition pair_merger(std::size_t n, std::size_t i, std::size_t j);
  // Builds from block indices: labels[i-1] is the block of element i.
  // Labels must already follow the order-of-minima convention.
  static Partition from_labels(std::size_t n, std::vector<std::size_t> labels);

  std::size_t n() const { return n_; }
  std::size_t count() const { return count_; }
  std::size_t block_of(std::size_t i) const;
  std::vector<std::vector<std::size_t>> blocks() const;
  bool is_singletons() const { return count_ == n_; }
  std::size_t block_size(std::size_t b) const;

  // Canonical form like "{1,3}{2}"; doubles as an ordering key.
  std::string to_string() const;

  bool operator==(const Partition& other) const = default;
  bool operator<(const Partition& other) const;

 private:
  std::size_t n_ = 0;
  std::size_t count_ = 0;
  std::vector<std::size_t> block_of_;
};

// Collection of disjoint nonempty subsets of {1, ..., n} that need not
// cover [n]. Blocks are ordered by minimal elements. Elements belonging to
// some block are "covered".
class SemiPartition {
 public:
  SemiPartition() = default;
  static SemiPartition empty(std::size_t n);
  static SemiPartition from_blocks(std::size_t n, const std::vector<std::vector<std::size_t>>& blocks);

  std::size_t n() const { return n_; }
  std::size_t count() const { return blocks_.size(); }
  const std::vector<std::vector<std::size_t>>& blocks() const { return blocks_; }
  bool covers(std::size_t i) const;
  // Block index of a covered element, nullopt for uncovered ones.
  std::optional<std::size_t> block_of(std::size_t i) const;
  bool is_empty() const { return blocks_.empty(); }

  // Index of element i's block in the completion of this collection by
  // singleton blocks, ordered by minima. This is the level relabeling the
  // collection induces.
  std::size_t completed_block_of(std::size_t i) const;

  std::string to_string() const;

  bool operator==(const SemiPartition& other) const = default;
  bool operator<(const SemiPartition& other) const {
    if (n_ != other.n_) return n_ < other.n_;
    return blocks_ < other.blocks_;
  }

 private:
  std::size_t n_ = 0;
  std::vector<std::vector<std::size_t>> blocks_;
  std::vector<std::size_t> block_of_;  // 0 = uncovered
};

// Point of the ranked simplex with finitely many positive coordinates:
// x1 >= x2 >= ... > 0 and sum <= 1. The remainder 1 - sum is the mass of
// the dust interval. The zero point is the empty coordinate list.
class SimplexPoint {
 public:
  SimplexPoint() = default;
  explicit SimplexPoint(std::vector<double> coords);

  const std::vector<double>& coords() const { return x_; }
  double l1() const { return l1_; }
  double l2sq() const { return l2sq_; }
  double dust() const { return 1.0 - l1_; }

  bool operator==(const SimplexPoint& other) const = default;

 private:
  std::vector<double> x_;
  double l1_ = 0.0;
  double l2sq_ = 0.0;
};

// Restriction to {1, ..., m}: traces of the blocks on the smaller ground
// set, empty traces dropped.
Partition restrict_to(const Partition& pi, std::size_t m);

// Traces on {1, ..., m} of the blocks that are non-singletons of the
// unrestricted partition. The caller supplies one flag per block of `pi`
// because a finite encoding cannot see whether a block continues beyond
// its ground set; samplers provide the flags.
SemiPartition strip_restrict(const Partition& pi, const std::vector<bool>& nonsingleton, std::size_t m);

// Convenience overload for a fully known finite partition: a block is a
// non-singleton exactly when it has two or more elements.
SemiPartition strip_restrict(const Partition& pi, std::size_t m);

// Distance relabeling along a partition: result(i, j) = rho(pi(i), pi(j)).
// Indices in the same block come out at distance zero.
DistanceMatrix apply_partition(const Partition& pi, const DistanceMatrix& rho);

// Marked relabeling along a semi-partition. Covered indices restart their
// mark at zero and absorb the source mark into the distance row; uncovered
// indices inherit the source mark. Pairs covered by one block come out at
// distance zero.
MarkedMatrix apply_semipartition(const SemiPartition& sigma, const MarkedMatrix& rv);

struct PaintboxDraw {
  Partition partition;                // on [n]
  std::vector<bool> nonsingleton;     // one flag per block of `partition`
  std::vector<bool> dust;             // one flag per element: landed in dust
};

// Paintbox draw restricted to [n]: each element samples a uniform position;
// positions in the same positive coordinate interval share a block, dust
// positions stay singletons. Interval blocks are flagged non-singleton
// because the unrestricted draw continues them almost surely; dust blocks
// are flagged singleton.
PaintboxDraw paintbox_sample(const SimplexPoint& x, std::size_t n, Rng& rng);

// Exhaustive enumerations in a deterministic order. Guarded at n <= 12;
// the second list has Bell(n + 1) entries and grows accordingly.
std::vector<Partition> all_partitions(std::size_t n);
std::vector<SemiPartition> all_semipartitions(std::size_t n);

// Relabelings by a permutation p of [n], where p[i-1] is the image of i.
// All four act by pullback: the value at i comes from p(i).
Partition permute(const Partition& pi, const std::vector<std::size_t>& p);
SemiPartition permute(const SemiPartition& sigma, const std::vector<std::size_t>& p);
DistanceMatrix permute(const DistanceMatrix& rho, const std::vector<std::size_t>& p);
MarkedMatrix permute(const MarkedMatrix& rv, const std::vector<std::size_t>& p);

}  // namespace coaltree
