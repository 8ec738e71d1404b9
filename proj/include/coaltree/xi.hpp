#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <vector>

#include "coaltree/partitions.hpp"
#include "coaltree/rng.hpp"

namespace coaltree {

// One weighted point of the simplex part of the measure.
struct XiAtom {
  double weight = 0.0;
  SimplexPoint point;

  bool operator==(const XiAtom& other) const = default;
};

// Finite measure on the ranked simplex driving reproduction events: a
// point mass at zero, whose weight feeds pairwise mergers, plus finitely
// many atoms away from zero. Atom weights are strictly positive and atom
// points are nonzero; the zero point lives only in kingman_mass.
class XiSpec {
 public:
  XiSpec() = default;
  XiSpec(double kingman_mass, std::vector<XiAtom> atoms);

  double kingman_mass() const { return kingman_mass_; }
  const std::vector<XiAtom>& atoms() const { return atoms_; }
  double total_mass() const { return total_mass_; }

  bool operator==(const XiSpec& other) const = default;

  // Structured text format: `kingman_mass: <float>` on the first line,
  // then `atoms: [{weight: <float>, x: [<floats>]}, ...]`. The loader
  // names the offending field in its error message.
  void save(std::ostream& os) const;
  static XiSpec load(std::istream& is);

 private:
  double kingman_mass_ = 0.0;
  std::vector<XiAtom> atoms_;
  double total_mass_ = 0.0;
};

// True when singletons vanish instantly: positive mass at zero, or a
// divergent singleton-coverage integral. Finitely many atoms always give
// a finite integral, so only the mass at zero can decide.
bool is_dust_free(const XiSpec& xi);

// Nonnegative rate that may be infinite. The infinite value is a
// distinguished state, not a float; reading value() on it is an error.
class ExtRate {
 public:
  static ExtRate finite(double value);
  static ExtRate infinity();

  bool is_infinite() const { return infinite_; }
  double value() const;

  bool operator==(const ExtRate& other) const = default;

 private:
  double value_ = 0.0;
  bool infinite_ = false;
};

// Rate of reproduction events whose visible trace on [n] has exactly the
// covered blocks of sigma, uncovered elements landing in dust. Infinite
// exactly for a lone covered singleton under positive mass at zero.
ExtRate rate_semipartition(const XiSpec& xi, std::size_t n, const SemiPartition& sigma);

// Rate of reproduction events whose restriction to [n] equals pi,
// regardless of dust coverage of pi's singletons. Always finite.
double rate_partition(const XiSpec& xi, std::size_t n, const Partition& pi);

// Rates of every nontrivial pattern at one level horizon. Construction
// cross-checks the two-point rate against the total mass.
struct RateTable {
  std::size_t n = 0;
  std::map<Partition, double> partition_rates;
  std::map<SemiPartition, ExtRate> semipartition_rates;
};

RateTable build_rate_table(const XiSpec& xi, std::size_t n);

// Which events count as visible: `rho` keeps events that merge at least
// one pair of levels; `rv` also keeps events covering a single level.
enum class StreamMode { rho, rv };

// One visible reproduction event: its time, the merger pattern on [n],
// and the covered blocks (traces of the unrestricted non-singleton
// blocks, so a covered block may hold a single level).
struct EventRecord {
  double time = 0.0;
  Partition partition;
  SemiPartition semipartition;

  bool operator==(const EventRecord& other) const = default;
};

// Poisson stream of visible events on (0, horizon]. Candidates arrive per
// atom at rate weight/|x|^2_2 with a paintbox draw restricted to [n], and
// per level pair at rate kingman_mass; candidates invisible in the chosen
// mode are discarded. rv mode requires a measure with dust, since covered
// singletons are indistinguishable otherwise.
std::vector<EventRecord> sample_event_stream(const XiSpec& xi, std::size_t n, StreamMode mode,
                                             double horizon, Rng& rng);

// Streaming variant: hands each visible event to sink in time order without
// materializing the stream. The vector overload wraps this one, so for a
// given generator state both produce identical events.
void sample_event_stream(const XiSpec& xi, std::size_t n, StreamMode mode, double horizon,
                         Rng& rng, const std::function<void(EventRecord&&)>& sink);

// Midpoint-rule discretization of a one-dimensional density on [eps, 1]
// into a finite-atom spec. An approximation: mass below eps is dropped
// and each cell collapses to its midpoint.
XiSpec discretize_lambda(const std::function<double(double)>& density, double eps,
                         std::size_t nodes, double kingman_mass = 0.0);

}  // namespace coaltree
