#include "coaltree/lookdown.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>

#include "coaltree/treespace.hpp"

namespace coaltree {

namespace {

void check_events(std::size_t n, const std::vector<EventRecord>& events, double horizon) {
  if (!(horizon >= 0.0)) throw std::invalid_argument("LookdownPath: negative horizon");
  double prev = 0.0;
  for (const EventRecord& ev : events) {
    if (!(ev.time > prev)) {
      throw validation_error("LookdownPath: event times must be strictly increasing and positive");
    }
    if (ev.time > horizon) {
      throw validation_error("LookdownPath: event beyond the horizon");
    }
    if (ev.partition.n() != n || ev.semipartition.n() != n) {
      throw validation_error("LookdownPath: event level horizon mismatch");
    }
    prev = ev.time;
  }
}

}  // namespace

LookdownPath LookdownPath::from_rho(DistanceMatrix initial, std::vector<EventRecord> events,
                                    double horizon) {
  check_events(initial.size(), events, horizon);
  LookdownPath p;
  p.n_ = initial.size();
  p.horizon_ = horizon;
  p.rv_initial_ = false;
  p.rho0_ = std::move(initial);
  p.events_ = std::move(events);
  return p;
}

LookdownPath LookdownPath::from_rv(MarkedMatrix initial, std::vector<EventRecord> events,
                                   double horizon) {
  check_events(initial.size(), events, horizon);
  LookdownPath p;
  p.n_ = initial.size();
  p.horizon_ = horizon;
  p.rv_initial_ = true;
  p.rv0_ = std::move(initial);
  p.events_ = std::move(events);
  return p;
}

const DistanceMatrix& LookdownPath::initial_rho() const {
  if (rv_initial_) throw std::invalid_argument("LookdownPath: initial state is a decomposed pair");
  return rho0_;
}

const MarkedMatrix& LookdownPath::initial_rv() const {
  if (!rv_initial_) throw std::invalid_argument("LookdownPath: initial state is a plain matrix");
  return rv0_;
}

GenealogyEngine::GenealogyEngine(const DistanceMatrix& rho0) : n_(rho0.size()), c_(n_ * n_, 0.0) {
  for (std::size_t i = 1; i <= n_; ++i) {
    for (std::size_t j = i + 1; j <= n_; ++j) {
      const double c = -0.5 * rho0(i, j);
      c_[(i - 1) * n_ + (j - 1)] = c;
      c_[(j - 1) * n_ + (i - 1)] = c;
    }
  }
}

void GenealogyEngine::apply(const EventRecord& event) {
  if (event.partition.n() != n_) {
    throw std::invalid_argument("GenealogyEngine: event level horizon mismatch");
  }
  if (!(event.time > clock_)) {
    throw std::logic_error("GenealogyEngine: events must arrive in strictly increasing time");
  }
  const Partition& pi = event.partition;
  // The occupant of level e descends from the pre-event level block_of(e),
  // so src(e) <= e with equality on every level below the first offspring.
  // Sweeping pairs by decreasing major index keeps each read, whose major
  // source index is no larger, ahead of the write frontier.
  std::size_t first = n_ + 1;
  for (std::size_t e = 1; e <= n_; ++e) {
    if (pi.block_of(e) != e) {
      first = e;
      break;
    }
  }
  for (std::size_t f = n_; f + 1 > first && f >= 2; --f) {
    const std::size_t b = pi.block_of(f);
    for (std::size_t e = f - 1; e >= 1; --e) {
      const std::size_t a = pi.block_of(e);
      const double v = (a == b) ? event.time : c_[(a - 1) * n_ + (b - 1)];
      c_[(e - 1) * n_ + (f - 1)] = v;
      c_[(f - 1) * n_ + (e - 1)] = v;
    }
  }
  clock_ = event.time;
}

double GenealogyEngine::rho(double t, std::size_t i, std::size_t j) const {
  if (!(t >= clock_)) throw std::invalid_argument("GenealogyEngine: query before the last event");
  if (i < 1 || i > n_ || j < 1 || j > n_) {
    throw std::invalid_argument("GenealogyEngine: level out of range");
  }
  if (i == j) return 0.0;
  return 2.0 * (t - c_[(i - 1) * n_ + (j - 1)]);
}

DistanceMatrix GenealogyEngine::rho(double t) const {
  if (!(t >= clock_)) throw std::invalid_argument("GenealogyEngine: query before the last event");
  DistanceMatrix out(n_);
  for (std::size_t i = 1; i <= n_; ++i) {
    for (std::size_t j = i + 1; j <= n_; ++j) {
      out.set(i, j, 2.0 * (t - c_[(i - 1) * n_ + (j - 1)]));
    }
  }
  return out;
}

DistanceMatrix evolve_rho(const LookdownPath& path, double t) {
  if (!(t >= 0.0) || t > path.horizon()) {
    throw std::invalid_argument("evolve_rho: time outside [0, horizon]");
  }
  GenealogyEngine engine(path.initial_rho());
  for (const EventRecord& ev : path.events()) {
    if (ev.time > t) break;
    engine.apply(ev);
  }
  return engine.rho(t);
}

DistanceMatrix evolve_rho_direct(const XiSpec& xi, const DistanceMatrix& rho0, double t,
                                 Rng& rng) {
  if (!(t >= 0.0)) throw std::invalid_argument("evolve_rho_direct: negative time");
  GenealogyEngine engine(rho0);
  sample_event_stream(xi, rho0.size(), StreamMode::rho, t, rng,
                      [&engine](EventRecord&& event) { engine.apply(event); });
  return engine.rho(t);
}

MarkedMatrix evolve_rv(const LookdownPath& path, double t) {
  if (!(t >= 0.0) || t > path.horizon()) {
    throw std::invalid_argument("evolve_rv: time outside [0, horizon]");
  }
  MarkedMatrix rv = path.initial_rv();
  const std::size_t n = rv.size();
  double clock = 0.0;
  auto grow = [&](double until) {
    const double d = until - clock;
    if (d > 0.0) {
      for (std::size_t i = 1; i <= n; ++i) rv.set_v(i, rv.v(i) + d);
    }
    clock = until;
  };
  for (const EventRecord& ev : path.events()) {
    if (ev.time > t) break;
    grow(ev.time);
    rv = apply_semipartition(ev.semipartition, rv);
  }
  grow(t);
  return rv;
}

std::optional<std::size_t> ancestor_level(const LookdownPath& path, double s, double t,
                                          std::size_t i) {
  if (!(s >= 0.0) || s > t || t > path.horizon()) {
    throw std::invalid_argument("ancestor_level: need 0 <= s <= t <= horizon");
  }
  if (i < 1 || i > path.n()) throw std::invalid_argument("ancestor_level: level out of range");

  std::size_t level = i;
  const auto& events = path.events();
  for (auto it = events.rbegin(); it != events.rend(); ++it) {
    if (it->time > t) continue;
    if (it->time <= s) break;
    // The occupant of `level` descends from the pre-event level given by
    // its block index.
    level = it->partition.block_of(level);
    if (level > path.n()) return std::nullopt;
  }
  return level;
}

std::vector<Partition> extract_coalescent(const DistanceMatrix& rho,
                                          const std::vector<double>& grid) {
  ValidationReport rep = validate(rho, MatrixKind::ultrametric);
  if (!rep.ok) throw validation_error("extract_coalescent: " + rep.message);

  const std::size_t n = rho.size();
  std::vector<Partition> out;
  out.reserve(grid.size());
  for (double s : grid) {
    std::vector<std::size_t> labels(n);
    std::size_t next = 0;
    for (std::size_t i = 1; i <= n; ++i) {
      std::size_t found = 0;
      for (std::size_t j = 1; j < i; ++j) {
        if (rho(i, j) <= 2.0 * s) {
          found = labels[j - 1];
          break;
        }
      }
      labels[i - 1] = found != 0 ? found : ++next;
    }
    out.push_back(Partition::from_labels(n, std::move(labels)));
  }
  return out;
}

namespace {

// Jump-chain coalescent of [n] blocks under the event measure: candidate
// reproduction events arrive per atom at rate weight/|x|^2_2 and act by a
// paintbox over current blocks; every block pair merges at the zero-mass
// rate. Candidates that merge nothing advance the clock only, which
// leaves the law of the merger process unchanged.
class StationaryCoalescent {
 public:
  StationaryCoalescent(const XiSpec& xi, std::size_t n, bool track_members)
      : xi_(xi), parent_(n + 1), size_(n + 1, 1), roots_(n), pos_(n + 1) {
    for (std::size_t i = 1; i <= n; ++i) {
      parent_[i] = i;
      roots_[i - 1] = i;
      pos_[i] = i - 1;
    }
    if (track_members) {
      members_.resize(n + 1);
      for (std::size_t i = 1; i <= n; ++i) members_[i] = {i};
    }
    for (const XiAtom& atom : xi.atoms()) {
      atom_rates_.push_back(atom.weight / atom.point.l2sq());
      atom_total_ += atom_rates_.back();
    }
  }

  std::size_t root_of(std::size_t element) {
    std::size_t r = element;
    while (parent_[r] != r) {
      parent_[r] = parent_[parent_[r]];
      r = parent_[r];
    }
    return r;
  }

  const std::vector<std::size_t>& members(std::size_t root) const { return members_[root]; }

  // Runs mergers forward in time until one block remains or the callback
  // returns true. The callback sees the merge time and the groups of
  // root ids about to merge, before any state changes.
  template <class Callback>
  void run(Rng& rng, Callback&& cb) {
    double t = 0.0;
    std::vector<std::vector<std::size_t>> groups;
    while (roots_.size() > 1) {
      const double b = static_cast<double>(roots_.size());
      const double kingman = xi_.kingman_mass() * 0.5 * b * (b - 1.0);
      const double total = atom_total_ + kingman;
      t += exponential(rng, total);

      groups.clear();
      double pick = uniform01(rng) * total;
      std::size_t cat = atom_rates_.size();
      for (std::size_t a = 0; a < atom_rates_.size(); ++a) {
        if (pick < atom_rates_[a]) {
          cat = a;
          break;
        }
        pick -= atom_rates_[a];
      }
      // Rounding in pick can overshoot the last positive category.
      if (cat == atom_rates_.size() && kingman <= 0.0) cat = atom_rates_.size() - 1;
      if (cat < atom_rates_.size()) {
        paint_groups(cat, rng, groups);
      } else {
        auto [p, q] = uniform_pair(rng, roots_.size());
        groups.push_back({roots_[p - 1], roots_[q - 1]});
      }
      if (groups.empty()) continue;
      if (cb(t, groups)) return;
      for (const auto& group : groups) merge_group(group);
    }
  }

 private:
  void paint_groups(std::size_t a, Rng& rng, std::vector<std::vector<std::size_t>>& groups) {
    const auto& coords = xi_.atoms()[a].point.coords();
    std::vector<std::vector<std::size_t>> byslot(coords.size());
    for (std::size_t r : roots_) {
      double u = uniform01(rng);
      for (std::size_t c = 0; c < coords.size(); ++c) {
        if (u < coords[c]) {
          byslot[c].push_back(r);
          break;
        }
        u -= coords[c];
      }
    }
    for (auto& g : byslot) {
      if (g.size() >= 2) groups.push_back(std::move(g));
    }
  }

  void merge_group(const std::vector<std::size_t>& group) {
    std::size_t survivor = group.front();
    for (std::size_t r : group) {
      if (size_[r] > size_[survivor]) survivor = r;
    }
    for (std::size_t r : group) {
      if (r == survivor) continue;
      parent_[r] = survivor;
      size_[survivor] += size_[r];
      if (!members_.empty()) {
        auto& dst = members_[survivor];
        auto& src = members_[r];
        dst.insert(dst.end(), src.begin(), src.end());
        src.clear();
        src.shrink_to_fit();
      }
      const std::size_t at = pos_[r];
      roots_[at] = roots_.back();
      pos_[roots_[at]] = at;
      roots_.pop_back();
    }
  }

  const XiSpec& xi_;
  std::vector<double> atom_rates_;
  double atom_total_ = 0.0;
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
  std::vector<std::size_t> roots_;
  std::vector<std::size_t> pos_;
  std::vector<std::vector<std::size_t>> members_;
};

}  // namespace

DistanceMatrix sample_stationary_ultrametric(const XiSpec& xi, std::size_t n, Rng& rng) {
  if (!(xi.total_mass() > 0.0)) {
    throw std::invalid_argument("sample_stationary_ultrametric: total mass must be positive");
  }
  if (n == 0) throw std::invalid_argument("sample_stationary_ultrametric: need at least one leaf");

  DistanceMatrix rho(n);
  StationaryCoalescent coal(xi, n, /*track_members=*/true);
  coal.run(rng, [&](double t, const std::vector<std::vector<std::size_t>>& groups) {
    for (const auto& group : groups) {
      for (std::size_t a = 0; a < group.size(); ++a) {
        for (std::size_t b = a + 1; b < group.size(); ++b) {
          for (std::size_t x : coal.members(group[a])) {
            for (std::size_t y : coal.members(group[b])) {
              rho.set(x, y, 2.0 * t);
            }
          }
        }
      }
    }
    return false;
  });
  return rho;
}

StationaryResample stationary_marked_resample(const XiSpec& xi, std::size_t n_leaves,
                                              std::size_t k, Rng& rng) {
  if (!(xi.total_mass() > 0.0)) {
    throw std::invalid_argument("stationary_marked_resample: total mass must be positive");
  }
  if (n_leaves < 2) {
    throw std::invalid_argument("stationary_marked_resample: need at least two leaves");
  }
  if (k == 0) throw std::invalid_argument("stationary_marked_resample: k must be positive");

  std::vector<std::size_t> idx(k);
  for (std::size_t a = 0; a < k; ++a) idx[a] = uniform_index(rng, n_leaves) + 1;

  std::vector<std::size_t> tracked = idx;
  std::sort(tracked.begin(), tracked.end());
  tracked.erase(std::unique(tracked.begin(), tracked.end()), tracked.end());
  const std::size_t m = tracked.size();

  // First merge time of each tracked leaf's block, and the pair
  // coalescence times; the stream stops once every entry is known.
  std::vector<double> first_merge(m, -1.0);
  std::vector<std::vector<double>> pair_time(m, std::vector<double>(m, -1.0));
  std::size_t open_v = m;
  std::size_t open_pairs = m * (m - 1) / 2;

  StationaryCoalescent coal(xi, n_leaves, /*track_members=*/false);
  std::vector<long> group_of(m);
  coal.run(rng, [&](double t, const std::vector<std::vector<std::size_t>>& groups) {
    for (std::size_t e = 0; e < m; ++e) {
      group_of[e] = -1;
      const std::size_t r = coal.root_of(tracked[e]);
      for (std::size_t g = 0; g < groups.size(); ++g) {
        if (std::find(groups[g].begin(), groups[g].end(), r) != groups[g].end()) {
          group_of[e] = static_cast<long>(g);
          break;
        }
      }
      if (group_of[e] >= 0 && first_merge[e] < 0.0) {
        first_merge[e] = t;
        --open_v;
      }
    }
    for (std::size_t e = 0; e < m; ++e) {
      if (group_of[e] < 0) continue;
      for (std::size_t f = e + 1; f < m; ++f) {
        if (group_of[f] != group_of[e] || pair_time[e][f] >= 0.0) continue;
        pair_time[e][f] = t;
        --open_pairs;
      }
    }
    return open_v == 0 && open_pairs == 0;
  });
  if (open_v != 0 || open_pairs != 0) {
    throw std::logic_error("stationary_marked_resample: coalescent ended unresolved");
  }

  std::vector<std::size_t> which(k);
  for (std::size_t a = 0; a < k; ++a) {
    which[a] = static_cast<std::size_t>(
        std::lower_bound(tracked.begin(), tracked.end(), idx[a]) - tracked.begin());
  }

  MarkedMatrix rv(k);
  for (std::size_t a = 0; a < k; ++a) rv.set_v(a + 1, first_merge[which[a]]);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      if (which[a] == which[b]) continue;
      const std::size_t e = std::min(which[a], which[b]);
      const std::size_t f = std::max(which[a], which[b]);
      rv.set_r(a + 1, b + 1,
               2.0 * pair_time[e][f] - first_merge[which[a]] - first_merge[which[b]]);
    }
  }
  return StationaryResample{rv, alpha(rv)};
}

void dump_path_csv(const LookdownPath& path, std::ostream& os) {
  os << "time,partition,semipartition\n";
  os.precision(std::numeric_limits<double>::max_digits10);
  for (const EventRecord& ev : path.events()) {
    os << ev.time << ",\"" << ev.partition.to_string() << "\",\""
       << ev.semipartition.to_string() << "\"\n";
  }
}

}  // namespace coaltree
