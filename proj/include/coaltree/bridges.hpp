#pragma once

#include <cstddef>
#include <iosfwd>
#include <utility>
#include <vector>

#include "coaltree/partitions.hpp"
#include "coaltree/rng.hpp"
#include "coaltree/xi.hpp"

namespace coaltree {

// One breakpoint of a piecewise-linear function on [0,1]. yl is the left
// limit at x, yr the value; the graph is linear between consecutive nodes.
struct BridgeNode {
  double x;
  double yl;
  double yr;

  bool operator==(const BridgeNode& other) const {
    return x == other.x && yl == other.yl && yr == other.yr;
  }
};

// Nondecreasing right-continuous piecewise-linear map of [0,1] onto [0,1]
// with F(1) = 1. Every publicly constructible bridge carries its
// factorisation into single-event bridges; compose concatenates the factor
// lists and refolds them in one canonical order, so composition is
// associative to the bit and flow windows satisfy the cocycle identity
// exactly.
class Bridge {
 public:
  Bridge();

  double operator()(double u) const;
  double left_limit(double u) const;

  // inf{s : F(s) > t or s = 1}.
  double inverse_at(double t) const;

  const std::vector<BridgeNode>& nodes() const { return nodes_; }

  // (u, F(u)) pairs on a uniform grid, for plotting.
  std::vector<std::pair<double, double>> graph(std::size_t points) const;

  bool operator==(const Bridge& other) const { return nodes_ == other.nodes_; }
  bool operator!=(const Bridge& other) const { return !(*this == other); }

  friend Bridge simple_bridge(double p, double U);
  friend Bridge compose(const Bridge& f, const Bridge& g);
  friend class BridgeFlow;

 private:
  static Bridge fold_events(const std::vector<std::pair<double, double>>& events);
  static Bridge raw_compose(const Bridge& f, const Bridge& g);

  std::vector<BridgeNode> nodes_;
  // (p, U) factors in application order, innermost first.
  std::vector<std::pair<double, double>> factors_;
};

// F(u) = (1-p) u + p 1{u >= U}.
Bridge simple_bridge(double p, double U);

// f after g.
Bridge compose(const Bridge& f, const Bridge& g);

inline double inverse_at(const Bridge& f, double t) { return f.inverse_at(t); }

struct FlowEvent {
  double time;
  double p;
  double U;

  bool operator==(const FlowEvent& other) const {
    return time == other.time && p == other.p && U == other.U;
  }
};

// Event representation of a finite-activity flow of bridges on [0, horizon].
class BridgeFlow {
 public:
  BridgeFlow(std::vector<FlowEvent> events, double horizon);

  const std::vector<FlowEvent>& events() const { return events_; }
  double horizon() const { return horizon_; }

  // Composition of the event bridges with times in (s, t], later events on
  // the outside.
  Bridge window(double s, double t) const;

 private:
  std::vector<FlowEvent> events_;
  double horizon_;
};

// Poisson flow for a measure with single-coordinate atoms and no Kingman
// part: events at rate sum w/p^2, each reusing one atom's coordinate.
BridgeFlow sample_flow(const XiSpec& lambda_spec, double horizon, Rng& rng);

// Partition of [|V|] at each backward depth s in grid: i ~ j iff the window
// F_{t-s,t} maps the lineages of V_i and V_j to the same generalized
// inverse.
std::vector<Partition> coalescent_from_flow(const BridgeFlow& flow, const std::vector<double>& V,
                                            double t, const std::vector<double>& grid);

void dump_flow_csv(const BridgeFlow& flow, std::ostream& os);

}  // namespace coaltree
