#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "coaltree/matrix.hpp"
#include "coaltree/xi.hpp"

namespace coaltree {

// Event-driven population path at a fixed level horizon: an initial state,
// a strictly time-sorted visible event list, and the time horizon. The
// initial state is either a plain distance matrix or a decomposed pair,
// fixing which evolution the path supports directly.
class LookdownPath {
 public:
  static LookdownPath from_rho(DistanceMatrix initial, std::vector<EventRecord> events,
                               double horizon);
  static LookdownPath from_rv(MarkedMatrix initial, std::vector<EventRecord> events,
                              double horizon);

  std::size_t n() const { return n_; }
  double horizon() const { return horizon_; }
  const std::vector<EventRecord>& events() const { return events_; }
  bool has_rho_initial() const { return !rv_initial_; }
  const DistanceMatrix& initial_rho() const;
  const MarkedMatrix& initial_rv() const;

 private:
  LookdownPath() = default;

  std::size_t n_ = 0;
  double horizon_ = 0.0;
  bool rv_initial_ = false;
  DistanceMatrix rho0_;
  MarkedMatrix rv0_;
  std::vector<EventRecord> events_;
};

// Incremental genealogy state: distances are recovered in closed form as
// rho_t(i, j) = 2 (t - c(i, j)) where c holds the common-ancestor time of
// the current occupants of each level pair. Applying an event touches only
// the rows of levels that receive offspring.
class GenealogyEngine {
 public:
  explicit GenealogyEngine(const DistanceMatrix& rho0);

  std::size_t n() const { return n_; }
  double clock() const { return clock_; }

  // Event times must be strictly increasing across calls.
  void apply(const EventRecord& event);

  // Valid for t at or after the last applied event and before the next.
  double rho(double t, std::size_t i, std::size_t j) const;
  DistanceMatrix rho(double t) const;

 private:
  std::size_t n_ = 0;
  double clock_ = 0.0;
  std::vector<double> c_;
};

// State at time t of the distance evolution: slope-2 growth off the
// diagonal between events, merger patterns applied at events. Exact for
// any t; no time stepping.
DistanceMatrix evolve_rho(const LookdownPath& path, double t);

// State at time t of the decomposed evolution: marks grow with slope 1,
// the remainder is constant between events, covered blocks applied at
// events. The event stream must have been sampled in rv mode for the
// result to carry the decomposition law.
MarkedMatrix evolve_rv(const LookdownPath& path, double t);

// Single-shot distance evolution that feeds freshly sampled events straight
// into the engine. Same law and, for a given generator state, the same
// value as evolve_rho over a materialized stream; memory stays O(n^2)
// however many events the horizon holds.
DistanceMatrix evolve_rho_direct(const XiSpec& xi, const DistanceMatrix& rho0, double t, Rng& rng);

// Level at time s of the ancestor of the particle sitting on level i at
// time t. Right-continuous in s; equal to i when no event intervenes.
// Visible events never push an ancestor past the horizon, so an empty
// return is unreachable for streams produced by this library; it exists
// for callers feeding their own event lists.
std::optional<std::size_t> ancestor_level(const LookdownPath& path, double s, double t,
                                          std::size_t i);

// Threshold partitions of an ultrametric matrix: i and j share a block at
// depth s exactly when rho(i, j) <= 2s. Coarsens as s grows.
std::vector<Partition> extract_coalescent(const DistanceMatrix& rho,
                                          const std::vector<double>& grid);

// Genealogical distance matrix of the stationary population at one
// instant: the coalescent tree of [n] run from singletons to the root,
// with rho(i, j) twice the pair coalescence time.
DistanceMatrix sample_stationary_ultrametric(const XiSpec& xi, std::size_t n, Rng& rng);

// Decomposed matrices of k points drawn uniformly at random (with
// replacement) from the n leaves of one fresh stationary tree. Equal in
// law to building the n-point reconstruction and sampling it by weight,
// but never materializes the n-by-n matrix. Repeated draws of one leaf
// give remainder zero and equal marks.
struct StationaryResample {
  MarkedMatrix rv;
  DistanceMatrix rho;
};

StationaryResample stationary_marked_resample(const XiSpec& xi, std::size_t n_leaves,
                                              std::size_t k, Rng& rng);

// One CSV row per event: time, merger pattern, covered blocks.
void dump_path_csv(const LookdownPath& path, std::ostream& os);

}  // namespace coaltree
