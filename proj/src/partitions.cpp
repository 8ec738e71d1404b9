#include "coaltree/partitions.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace coaltree {

namespace {

// Validates a block list over [n]: elements in range, no repeats, nonempty
// blocks. Returns the blocks sorted internally and by minima.
std::vector<std::vector<std::size_t>> canonical_blocks(std::size_t n,
                                                       std::vector<std::vector<std::size_t>> blocks) {
  std::vector<bool> seen(n + 1, false);
  for (auto& b : blocks) {
    if (b.empty()) throw std::invalid_argument("blocks: empty block");
    std::sort(b.begin(), b.end());
    for (std::size_t e : b) {
      if (e < 1 || e > n) throw std::invalid_argument("blocks: element out of range");
      if (seen[e]) throw std::invalid_argument("blocks: element repeated across blocks");
      seen[e] = true;
    }
  }
  std::sort(blocks.begin(), blocks.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return blocks;
}

}  // namespace

Partition Partition::singletons(std::size_t n) {
  Partition p;
  p.n_ = n;
  p.count_ = n;
  p.block_of_.resize(n);
  for (std::size_t i = 0; i < n; ++i) p.block_of_[i] = i + 1;
  return p;
}

Partition Partition::from_blocks(std::size_t n, const std::vector<std::vector<std::size_t>>& blocks) {
  auto sorted = canonical_blocks(n, blocks);
  std::size_t covered = 0;
  for (const auto& b : sorted) covered += b.size();
  if (covered != n) throw std::invalid_argument("Partition: blocks must cover every element");
  Partition p;
  p.n_ = n;
  p.count_ = sorted.size();
  p.block_of_.assign(n, 0);
  for (std::size_t b = 0; b < sorted.size(); ++b)
    for (std::size_t e : sorted[b]) p.block_of_[e - 1] = b + 1;
  return p;
}

Partition Partition::pair_merger(std::size_t n, std::size_t i, std::size_t j) {
  if (i < 1 || j < 1 || i > n || j > n || i == j)
    throw std::invalid_argument("pair_merger: need two distinct elements of [n]");
  if (i > j) std::swap(i, j);
  Partition p;
  p.n_ = n;
  p.count_ = n - 1;
  p.block_of_.resize(n);
  for (std::size_t e = 1; e <= n; ++e) {
    if (e == j)
      p.block_of_[e - 1] = i;
    else if (e < j)
      p.block_of_[e - 1] = e;
    else
      p.block_of_[e - 1] = e - 1;
  }
  return p;
}

Partition Partition::from_labels(std::size_t n, std::vector<std::size_t> labels) {
  if (labels.size() != n) throw std::invalid_argument("from_labels: need one label per element");
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == next + 1)
      ++next;
    else if (labels[i] < 1 || labels[i] > next)
      throw std::invalid_argument("from_labels: labels must follow the order-of-minima convention");
  }
  Partition p;
  p.n_ = n;
  p.count_ = next;
  p.block_of_ = std::move(labels);
  return p;
}

std::size_t Partition::block_of(std::size_t i) const {
  if (i < 1 || i > n_) throw std::invalid_argument("Partition: element out of range");
  return block_of_[i - 1];
}

std::vector<std::vector<std::size_t>> Partition::blocks() const {
  std::vector<std::vector<std::size_t>> out(count_);
  for (std::size_t i = 1; i <= n_; ++i) out[block_of_[i - 1] - 1].push_back(i);
  return out;
}

std::size_t Partition::block_size(std::size_t b) const {
  if (b < 1 || b > count_) throw std::invalid_argument("Partition: block index out of range");
  std::size_t s = 0;
  for (std::size_t i = 0; i < n_; ++i)
    if (block_of_[i] == b) ++s;
  return s;
}

std::string Partition::to_string() const {
  std::ostringstream os;
  for (const auto& b : blocks()) {
    os << '{';
    for (std::size_t k = 0; k < b.size(); ++k) {
      if (k) os << ',';
      os << b[k];
    }
    os << '}';
  }
  return os.str();
}

bool Partition::operator<(const Partition& other) const {
  if (n_ != other.n_) return n_ < other.n_;
  return block_of_ < other.block_of_;
}

SemiPartition SemiPartition::empty(std::size_t n) {
  SemiPartition s;
  s.n_ = n;
  s.block_of_.assign(n, 0);
  return s;
}

SemiPartition SemiPartition::from_blocks(std::size_t n, const std::vector<std::vector<std::size_t>>& blocks) {
  SemiPartition s;
  s.n_ = n;
  s.blocks_ = canonical_blocks(n, blocks);
  s.block_of_.assign(n, 0);
  for (std::size_t b = 0; b < s.blocks_.size(); ++b)
    for (std::size_t e : s.blocks_[b]) s.block_of_[e - 1] = b + 1;
  return s;
}

bool SemiPartition::covers(std::size_t i) const {
  if (i < 1 || i > n_) throw std::invalid_argument("SemiPartition: element out of range");
  return block_of_[i - 1] != 0;
}

std::optional<std::size_t> SemiPartition::block_of(std::size_t i) const {
  if (i < 1 || i > n_) throw std::invalid_argument("SemiPartition: element out of range");
  if (block_of_[i - 1] == 0) return std::nullopt;
  return block_of_[i - 1];
}

std::size_t SemiPartition::completed_block_of(std::size_t i) const {
  if (i < 1 || i > n_) throw std::invalid_argument("SemiPartition: element out of range");
  // Completed blocks are the stored blocks plus singletons for uncovered
  // elements, all ordered by minima. The index of i's block is one plus the
  // number of completed blocks whose minimum precedes i's block minimum.
  const std::size_t own_min = covers(i) ? blocks_[block_of_[i - 1] - 1].front() : i;
  std::size_t idx = 1;
  for (const auto& b : blocks_)
    if (b.front() < own_min) ++idx;
  for (std::size_t e = 1; e < own_min; ++e)
    if (block_of_[e - 1] == 0) ++idx;
  return idx;
}

std::string SemiPartition::to_string() const {
  if (blocks_.empty()) return "{}";
  std::ostringstream os;
  for (const auto& b : blocks_) {
    os << '{';
    for (std::size_t k = 0; k < b.size(); ++k) {
      if (k) os << ',';
      os << b[k];
    }
    os << '}';
  }
  return os.str();
}

SimplexPoint::SimplexPoint(std::vector<double> coords) : x_(std::move(coords)) {
  double prev = std::numeric_limits<double>::infinity();
  for (double c : x_) {
    if (!(c > 0.0)) throw std::invalid_argument("SimplexPoint: coordinates must be positive");
    if (c > prev) throw std::invalid_argument("SimplexPoint: coordinates must be nonincreasing");
    prev = c;
    l1_ += c;
    l2sq_ += c * c;
  }
  if (l1_ > 1.0 + 1e-12) throw std::invalid_argument("SimplexPoint: coordinates must sum to at most 1");
  if (l1_ > 1.0) l1_ = 1.0;
}

Partition restrict_to(const Partition& pi, std::size_t m) {
  if (m > pi.n()) throw std::invalid_argument("restrict_to: target exceeds ground set");
  std::vector<std::vector<std::size_t>> traces;
  std::vector<std::size_t> index_of(pi.count() + 1, 0);
  for (std::size_t i = 1; i <= m; ++i) {
    const std::size_t b = pi.block_of(i);
    if (index_of[b] == 0) {
      traces.emplace_back();
      index_of[b] = traces.size();
    }
    traces[index_of[b] - 1].push_back(i);
  }
  return Partition::from_blocks(m, traces);
}

SemiPartition strip_restrict(const Partition& pi, const std::vector<bool>& nonsingleton, std::size_t m) {
  if (m > pi.n()) throw std::invalid_argument("strip_restrict: target exceeds ground set");
  if (nonsingleton.size() != pi.count())
    throw std::invalid_argument("strip_restrict: need one flag per block");
  std::vector<std::vector<std::size_t>> traces;
  std::vector<std::size_t> index_of(pi.count() + 1, 0);
  for (std::size_t i = 1; i <= m; ++i) {
    const std::size_t b = pi.block_of(i);
    if (!nonsingleton[b - 1]) continue;
    if (index_of[b] == 0) {
      traces.emplace_back();
      index_of[b] = traces.size();
    }
    traces[index_of[b] - 1].push_back(i);
  }
  return SemiPartition::from_blocks(m, traces);
}

SemiPartition strip_restrict(const Partition& pi, std::size_t m) {
  std::vector<bool> flags(pi.count());
  for (std::size_t b = 1; b <= pi.count(); ++b) flags[b - 1] = pi.block_size(b) >= 2;
  return strip_restrict(pi, flags, m);
}

DistanceMatrix apply_partition(const Partition& pi, const DistanceMatrix& rho) {
  if (pi.n() != rho.size()) throw std::invalid_argument("apply_partition: size mismatch");
  const std::size_t n = rho.size();
  DistanceMatrix out(n);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = i + 1; j <= n; ++j) {
      const std::size_t a = pi.block_of(i), b = pi.block_of(j);
      out.set(i, j, a == b ? 0.0 : rho(a, b));
    }
  return out;
}

MarkedMatrix apply_semipartition(const SemiPartition& sigma, const MarkedMatrix& rv) {
  if (sigma.n() != rv.size()) throw std::invalid_argument("apply_semipartition: size mismatch");
  const std::size_t n = rv.size();
  std::vector<std::size_t> src(n + 1);
  for (std::size_t i = 1; i <= n; ++i) src[i] = sigma.completed_block_of(i);
  DistanceMatrix r(n);
  std::vector<double> v(n, 0.0);
  for (std::size_t i = 1; i <= n; ++i)
    if (!sigma.covers(i)) v[i - 1] = rv.v(src[i]);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = i + 1; j <= n; ++j) {
      if (src[i] == src[j]) continue;  // one covering block: distance stays zero
      double d = rv.r()(src[i], src[j]);
      if (sigma.covers(i)) d += rv.v(src[i]);
      if (sigma.covers(j)) d += rv.v(src[j]);
      r.set(i, j, d);
    }
  return MarkedMatrix(std::move(r), std::move(v));
}

PaintboxDraw paintbox_sample(const SimplexPoint& x, std::size_t n, Rng& rng) {
  const auto& c = x.coords();
  std::vector<double> cum(c.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    acc += c[k];
    cum[k] = acc;
  }
  // interval[i] is the coordinate index for element i+1, or c.size() for dust
  std::vector<std::size_t> interval(n, c.size());
  std::vector<bool> dust(n, true);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    if (it != cum.end()) {
      interval[i] = static_cast<std::size_t>(it - cum.begin());
      dust[i] = false;
    }
  }
  std::vector<std::vector<std::size_t>> blocks;
  std::vector<bool> nonsingleton_by_block;
  std::vector<std::size_t> slot(c.size(), 0);
  for (std::size_t i = 1; i <= n; ++i) {
    const std::size_t k = interval[i - 1];
    if (k == c.size()) {
      blocks.push_back({i});
      nonsingleton_by_block.push_back(false);
      continue;
    }
    if (slot[k] == 0) {
      blocks.push_back({i});
      nonsingleton_by_block.push_back(true);
      slot[k] = blocks.size();
    } else {
      blocks[slot[k] - 1].push_back(i);
    }
  }
  // Blocks were created in order of their minimal elements already.
  PaintboxDraw draw;
  draw.partition = Partition::from_blocks(n, blocks);
  draw.nonsingleton = std::move(nonsingleton_by_block);
  draw.dust = std::move(dust);
  return draw;
}

std::vector<Partition> all_partitions(std::size_t n) {
  if (n < 1 || n > 12) throw std::length_error("all_partitions: supported for 1 <= n <= 12");
  std::vector<Partition> out;
  // Restricted growth strings: labels[0] = 1 and each later label is at
  // most one plus the running maximum. These are exactly the canonical
  // order-of-minima labelings.
  std::vector<std::size_t> labels(n, 1);
  std::vector<std::size_t> maxes(n, 1);
  while (true) {
    out.push_back(Partition::from_labels(n, labels));
    if (n == 1) break;
    // Rightmost position whose label can grow without breaking the growth
    // constraint labels[pos] <= maxes[pos-1] + 1.
    std::size_t pos = n - 1;
    while (pos >= 1 && labels[pos] > maxes[pos - 1]) --pos;
    if (pos == 0) break;
    ++labels[pos];
    for (std::size_t j = pos + 1; j < n; ++j) labels[j] = 1;
    for (std::size_t j = pos; j < n; ++j) maxes[j] = std::max(maxes[j - 1], labels[j]);
  }
  return out;
}

std::vector<SemiPartition> all_semipartitions(std::size_t n) {
  if (n < 1 || n > 12) throw std::length_error("all_semipartitions: supported for 1 <= n <= 12");
  std::vector<SemiPartition> out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    std::vector<std::size_t> covered;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (std::size_t{1} << i)) covered.push_back(i + 1);
    if (covered.empty()) {
      out.push_back(SemiPartition::empty(n));
      continue;
    }
    for (const Partition& p : all_partitions(covered.size())) {
      std::vector<std::vector<std::size_t>> blocks(p.count());
      for (std::size_t k = 1; k <= covered.size(); ++k)
        blocks[p.block_of(k) - 1].push_back(covered[k - 1]);
      out.push_back(SemiPartition::from_blocks(n, blocks));
    }
  }
  return out;
}

namespace {

void check_permutation(std::size_t n, const std::vector<std::size_t>& p) {
  if (p.size() != n) throw std::invalid_argument("permute: permutation size mismatch");
  std::vector<bool> seen(n + 1, false);
  for (std::size_t v : p) {
    if (v < 1 || v > n || seen[v]) throw std::invalid_argument("permute: not a permutation of [n]");
    seen[v] = true;
  }
}

}  // namespace

Partition permute(const Partition& pi, const std::vector<std::size_t>& p) {
  check_permutation(pi.n(), p);
  std::vector<std::vector<std::size_t>> blocks(pi.count());
  for (std::size_t i = 1; i <= pi.n(); ++i) blocks[pi.block_of(p[i - 1]) - 1].push_back(i);
  blocks.erase(std::remove_if(blocks.begin(), blocks.end(), [](const auto& b) { return b.empty(); }),
               blocks.end());
  return Partition::from_blocks(pi.n(), blocks);
}

SemiPartition permute(const SemiPartition& sigma, const std::vector<std::size_t>& p) {
  check_permutation(sigma.n(), p);
  std::vector<std::size_t> inv(sigma.n() + 1, 0);
  for (std::size_t i = 1; i <= sigma.n(); ++i) inv[p[i - 1]] = i;
  std::vector<std::vector<std::size_t>> blocks;
  for (const auto& b : sigma.blocks()) {
    std::vector<std::size_t> nb;
    for (std::size_t e : b) nb.push_back(inv[e]);
    blocks.push_back(std::move(nb));
  }
  return SemiPartition::from_blocks(sigma.n(), blocks);
}

DistanceMatrix permute(const DistanceMatrix& rho, const std::vector<std::size_t>& p) {
  check_permutation(rho.size(), p);
  DistanceMatrix out(rho.size());
  for (std::size_t i = 1; i <= rho.size(); ++i)
    for (std::size_t j = i + 1; j <= rho.size(); ++j) out.set(i, j, rho(p[i - 1], p[j - 1]));
  return out;
}

MarkedMatrix permute(const MarkedMatrix& rv, const std::vector<std::size_t>& p) {
  DistanceMatrix r = permute(rv.r(), p);
  std::vector<double> v(rv.size());
  for (std::size_t i = 1; i <= rv.size(); ++i) v[i - 1] = rv.v(p[i - 1]);
  return MarkedMatrix(std::move(r), std::move(v));
}

}  // namespace coaltree
