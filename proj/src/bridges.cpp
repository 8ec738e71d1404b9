#include "coaltree/bridges.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>

#include "coaltree/matrix.hpp"

namespace coaltree {

Bridge::Bridge() : nodes_{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}} {}

double Bridge::operator()(double u) const {
  if (!(u >= 0.0) || u > 1.0) throw std::invalid_argument("Bridge: argument outside [0, 1]");
  std::size_t i = nodes_.size() - 1;
  while (nodes_[i].x > u) --i;
  if (nodes_[i].x == u) return nodes_[i].yr;
  const BridgeNode& a = nodes_[i];
  const BridgeNode& b = nodes_[i + 1];
  return a.yr + (u - a.x) * (b.yl - a.yr) / (b.x - a.x);
}

double Bridge::left_limit(double u) const {
  if (!(u > 0.0) || u > 1.0) throw std::invalid_argument("Bridge: left limit needs u in (0, 1]");
  std::size_t i = nodes_.size() - 1;
  while (nodes_[i].x > u) --i;
  if (nodes_[i].x == u) return nodes_[i].yl;
  const BridgeNode& a = nodes_[i];
  const BridgeNode& b = nodes_[i + 1];
  return a.yr + (u - a.x) * (b.yl - a.yr) / (b.x - a.x);
}

double Bridge::inverse_at(double t) const {
  if (!(t >= 0.0) || t > 1.0) throw std::invalid_argument("Bridge: inverse argument outside [0, 1]");
  if (nodes_.front().yr > t) return nodes_.front().x;
  for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
    const BridgeNode& a = nodes_[i];
    const BridgeNode& b = nodes_[i + 1];
    if (b.yl > t) {
      // The segment rises through level t; at the returned point the value
      // is exactly t, the infimum of the strict super-level set.
      return a.x + (t - a.yr) * (b.x - a.x) / (b.yl - a.yr);
    }
    if (b.yr > t) return b.x;
  }
  return 1.0;
}

std::vector<std::pair<double, double>> Bridge::graph(std::size_t points) const {
  if (points < 2) throw std::invalid_argument("Bridge: need at least two graph points");
  std::vector<std::pair<double, double>> out;
  out.reserve(points);
  for (std::size_t k = 0; k < points; ++k) {
    const double u = static_cast<double>(k) / static_cast<double>(points - 1);
    out.emplace_back(u, (*this)(u));
  }
  return out;
}

Bridge simple_bridge(double p, double U) {
  if (!(p > 0.0) || p > 1.0) throw std::invalid_argument("simple_bridge: p must lie in (0, 1]");
  if (!(U >= 0.0) || U > 1.0) throw std::invalid_argument("simple_bridge: U must lie in [0, 1]");
  Bridge out;
  out.factors_.emplace_back(p, U);
  const double slope = 1.0 - p;
  if (U == 0.0) {
    out.nodes_ = {{0.0, p, p}, {1.0, 1.0, 1.0}};
  } else if (U == 1.0) {
    out.nodes_ = {{0.0, 0.0, 0.0}, {1.0, slope, 1.0}};
  } else {
    const double yl = slope * U;
    out.nodes_ = {{0.0, 0.0, 0.0}, {U, yl, yl + p}, {1.0, 1.0, 1.0}};
  }
  return out;
}

Bridge Bridge::raw_compose(const Bridge& f, const Bridge& g) {
  // Nodes of f(g(u)): every g node, plus the interior points where g rises
  // through an f node's location. Values at crossings reuse the stored f
  // node so a jump of f is never re-evaluated from a rounded argument.
  std::vector<BridgeNode> nodes;
  nodes.reserve(g.nodes_.size() + f.nodes_.size());
  for (std::size_t i = 0; i < g.nodes_.size(); ++i) {
    const BridgeNode& gn = g.nodes_[i];
    const double yr = f(gn.yr);
    double yl = yr;
    if (i > 0) {
      // A flat approach pins the left limit to the value itself.
      const bool flat_before = gn.yl == g.nodes_[i - 1].yr;
      yl = flat_before ? f(gn.yl) : f.left_limit(gn.yl);
    }
    nodes.push_back({gn.x, yl, yr});
    if (i + 1 == g.nodes_.size()) break;
    const BridgeNode& gnext = g.nodes_[i + 1];
    if (!(gnext.yl > gn.yr)) continue;
    const double inv_slope = (gnext.x - gn.x) / (gnext.yl - gn.yr);
    for (const BridgeNode& fn : f.nodes_) {
      if (fn.x <= gn.yr || fn.x >= gnext.yl) continue;
      double x = gn.x + (fn.x - gn.yr) * inv_slope;
      if (!(x > gn.x) || !(x < gnext.x)) continue;
      nodes.push_back({x, fn.yl, fn.yr});
    }
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const BridgeNode& a, const BridgeNode& b) { return a.x < b.x; });
  Bridge out;
  out.nodes_.clear();
  for (const BridgeNode& n : nodes) {
    if (!out.nodes_.empty() && out.nodes_.back().x == n.x) continue;
    out.nodes_.push_back(n);
  }
  return out;
}

Bridge Bridge::fold_events(const std::vector<std::pair<double, double>>& events) {
  Bridge acc;
  for (const auto& [p, U] : events) {
    acc = raw_compose(simple_bridge(p, U), acc);
  }
  acc.factors_ = events;
  return acc;
}

Bridge compose(const Bridge& f, const Bridge& g) {
  std::vector<std::pair<double, double>> events = g.factors_;
  events.insert(events.end(), f.factors_.begin(), f.factors_.end());
  return Bridge::fold_events(events);
}

BridgeFlow::BridgeFlow(std::vector<FlowEvent> events, double horizon)
    : events_(std::move(events)), horizon_(horizon) {
  if (!(horizon_ >= 0.0)) throw std::invalid_argument("BridgeFlow: negative horizon");
  double prev = 0.0;
  for (const FlowEvent& ev : events_) {
    if (!(ev.time > prev)) {
      throw validation_error("BridgeFlow: event times must be strictly increasing and positive");
    }
    if (ev.time > horizon_) throw validation_error("BridgeFlow: event beyond the horizon");
    if (!(ev.p > 0.0) || ev.p > 1.0) throw validation_error("BridgeFlow: p outside (0, 1]");
    if (!(ev.U >= 0.0) || ev.U > 1.0) throw validation_error("BridgeFlow: U outside [0, 1]");
    prev = ev.time;
  }
}

Bridge BridgeFlow::window(double s, double t) const {
  if (!(s >= 0.0) || !(s <= t) || t > horizon_) {
    throw std::invalid_argument("BridgeFlow: window needs 0 <= s <= t <= horizon");
  }
  std::vector<std::pair<double, double>> events;
  for (const FlowEvent& ev : events_) {
    if (ev.time > t) break;
    if (ev.time > s) events.emplace_back(ev.p, ev.U);
  }
  return Bridge::fold_events(events);
}

BridgeFlow sample_flow(const XiSpec& lambda_spec, double horizon, Rng& rng) {
  if (!(horizon >= 0.0)) throw std::invalid_argument("sample_flow: negative horizon");
  if (lambda_spec.kingman_mass() != 0.0) {
    throw std::invalid_argument("sample_flow: Kingman part has no event-wise bridge");
  }
  std::vector<double> rates;
  double total = 0.0;
  for (const XiAtom& atom : lambda_spec.atoms()) {
    if (atom.point.coords().size() != 1) {
      throw std::invalid_argument("sample_flow: only single-coordinate atoms are supported");
    }
    const double rate = atom.weight / atom.point.l2sq();
    rates.push_back(rate);
    total += rate;
  }
  std::vector<FlowEvent> events;
  if (total > 0.0) {
    double t = 0.0;
    while (true) {
      t += exponential(rng, total);
      if (t > horizon) break;
      double pick = uniform01(rng) * total;
      std::size_t k = 0;
      while (k + 1 < rates.size() && pick >= rates[k]) {
        pick -= rates[k];
        ++k;
      }
      events.push_back({t, lambda_spec.atoms()[k].point.coords()[0], uniform01(rng)});
    }
  }
  return BridgeFlow(std::move(events), horizon);
}

std::vector<Partition> coalescent_from_flow(const BridgeFlow& flow, const std::vector<double>& V,
                                            double t, const std::vector<double>& grid) {
  if (V.empty()) throw std::invalid_argument("coalescent_from_flow: empty lineage set");
  for (double v : V) {
    if (!(v >= 0.0) || v > 1.0) {
      throw std::invalid_argument("coalescent_from_flow: lineage uniforms must lie in [0, 1]");
    }
  }
  if (!(t >= 0.0) || t > flow.horizon()) {
    throw std::invalid_argument("coalescent_from_flow: t outside [0, horizon]");
  }
  const std::size_t n = V.size();
  std::vector<Partition> out;
  out.reserve(grid.size());
  for (double s : grid) {
    if (!(s >= 0.0) || s > t) {
      throw std::invalid_argument("coalescent_from_flow: depth outside [0, t]");
    }
    const Bridge w = flow.window(t - s, t);
    std::map<double, std::size_t> seen;
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double key = w.inverse_at(V[i]);
      labels[i] = seen.emplace(key, seen.size() + 1).first->second;
    }
    out.push_back(Partition::from_labels(n, std::move(labels)));
  }
  return out;
}

void dump_flow_csv(const BridgeFlow& flow, std::ostream& os) {
  os.precision(std::numeric_limits<double>::max_digits10);
  os << "time,p,U\n";
  for (const FlowEvent& ev : flow.events()) {
    os << ev.time << "," << ev.p << "," << ev.U << "\n";
  }
}

}  // namespace coaltree
