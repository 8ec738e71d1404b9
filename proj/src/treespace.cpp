#include "coaltree/treespace.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>
#include <utility>

namespace coaltree {

namespace {

constexpr double kFlowEps = 1e-15;

// Maximum-flow network on doubles, small bipartite transport instances.
class Dinic {
 public:
  explicit Dinic(std::size_t nodes) : head_(nodes, -1), level_(nodes), iter_(nodes) {}

  void add_edge(std::size_t from, std::size_t to, double cap) {
    edges_.push_back({to, head_[from], cap});
    head_[from] = static_cast<int>(edges_.size()) - 1;
    edges_.push_back({from, head_[to], 0.0});
    head_[to] = static_cast<int>(edges_.size()) - 1;
  }

  double max_flow(std::size_t source, std::size_t sink) {
    double total = 0.0;
    while (bfs(source, sink)) {
      iter_ = head_;
      double pushed;
      while ((pushed = dfs(source, sink, std::numeric_limits<double>::infinity())) > kFlowEps) {
        total += pushed;
      }
    }
    return total;
  }

 private:
  struct Edge {
    std::size_t to;
    int next;
    double cap;
  };

  bool bfs(std::size_t source, std::size_t sink) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<std::size_t> q;
    level_[source] = 0;
    q.push(source);
    while (!q.empty()) {
      std::size_t u = q.front();
      q.pop();
      for (int e = head_[u]; e != -1; e = edges_[e].next) {
        if (edges_[e].cap > kFlowEps && level_[edges_[e].to] < 0) {
          level_[edges_[e].to] = level_[u] + 1;
          q.push(edges_[e].to);
        }
      }
    }
    return level_[sink] >= 0;
  }

  double dfs(std::size_t u, std::size_t sink, double limit) {
    if (u == sink) return limit;
    for (int& e = iter_[u]; e != -1; e = edges_[e].next) {
      Edge& ed = edges_[e];
      if (ed.cap > kFlowEps && level_[ed.to] == level_[u] + 1) {
        double pushed = dfs(ed.to, sink, std::min(limit, ed.cap));
        if (pushed > kFlowEps) {
          ed.cap -= pushed;
          edges_[e ^ 1].cap += pushed;
          return pushed;
        }
      }
    }
    return 0.0;
  }

  std::vector<Edge> edges_;
  std::vector<int> head_;
  std::vector<int> level_;
  std::vector<int> iter_;
};

// Largest mass a coupling supported on pairs with metric <= eps can carry.
double max_transport(const std::vector<std::vector<double>>& metric, const std::vector<double>& w1,
                     const std::vector<double>& w2, double eps) {
  const std::size_t m = w1.size();
  const std::size_t source = 2 * m;
  const std::size_t sink = 2 * m + 1;
  Dinic net(2 * m + 2);
  for (std::size_t i = 0; i < m; ++i) {
    if (w1[i] > 0.0) net.add_edge(source, i, w1[i]);
    if (w2[i] > 0.0) net.add_edge(m + i, sink, w2[i]);
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (w1[i] <= 0.0) continue;
    for (std::size_t j = 0; j < m; ++j) {
      if (w2[j] > 0.0 && metric[i][j] <= eps) {
        net.add_edge(i, m + j, 2.0);
      }
    }
  }
  return net.max_flow(source, sink);
}

double prohorov_on_metric(const std::vector<std::vector<double>>& metric,
                          const std::vector<double>& w1, const std::vector<double>& w2) {
  const std::size_t m = w1.size();
  std::vector<double> thresholds{0.0};
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (w1[i] > 0.0 && w2[j] > 0.0) thresholds.push_back(metric[i][j]);
    }
  }
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  // The feasibility deficit 1 - g(eps) is nonincreasing in eps while the
  // threshold grows, so candidates past the current best cannot improve it.
  double best = std::numeric_limits<double>::infinity();
  for (double eps : thresholds) {
    if (eps >= best) break;
    double gap = 1.0 - max_transport(metric, w1, w2, eps);
    if (gap < 0.0) gap = 0.0;
    best = std::min(best, std::max(eps, gap));
  }
  return best;
}

void check_measure(const std::vector<double>& w, std::size_t m, const char* label) {
  if (w.size() != m) {
    throw validation_error(std::string(label) + ": measure has wrong length");
  }
  double total = 0.0;
  for (double x : w) {
    if (!(x >= 0.0)) throw validation_error(std::string(label) + ": negative weight");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw validation_error(std::string(label) + ": weights do not sum to one");
  }
}

}  // namespace

DistanceMatrix alpha(const MarkedMatrix& rv) {
  const std::size_t n = rv.size();
  DistanceMatrix rho(n);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = i + 1; j <= n; ++j) {
      rho.set(i, j, rv.v(i) + rv.r(i, j) + rv.v(j));
    }
  }
  return rho;
}

MarkedMatrix beta_finite(const DistanceMatrix& rho, bool require_ultrametric) {
  const std::size_t n = rho.size();
  if (n < 2) {
    throw validation_error("beta_finite: need at least two points to split off external branches");
  }
  if (require_ultrametric) {
    ValidationReport rep = validate(rho, MatrixKind::ultrametric);
    if (!rep.ok) throw validation_error("beta_finite: " + rep.message);
  }
  MarkedMatrix rv(n);
  for (std::size_t i = 1; i <= n; ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j <= n; ++j) {
      if (j != i) nearest = std::min(nearest, rho(i, j));
    }
    rv.set_v(i, 0.5 * nearest);
  }
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = i + 1; j <= n; ++j) {
      rv.set_r(i, j, rho(i, j) - rv.v(i) - rv.v(j));
    }
  }
  return rv;
}

FiniteMMSpace::FiniteMMSpace(DistanceMatrix dist, std::vector<double> weights) {
  std::vector<double> zero_marks(dist.size(), 0.0);
  *this = FiniteMMSpace(std::move(dist), std::move(weights), std::move(zero_marks));
}

FiniteMMSpace::FiniteMMSpace(DistanceMatrix dist, std::vector<double> weights,
                             std::vector<double> marks, double merge_tol, double weight_tol) {
  const std::size_t n = dist.size();
  if (weights.size() != n || marks.size() != n) {
    throw validation_error("FiniteMMSpace: weights and marks must match the support size");
  }
  if (n == 0) throw validation_error("FiniteMMSpace: empty support");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw validation_error("FiniteMMSpace: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > weight_tol) {
    throw validation_error("FiniteMMSpace: weights do not sum to one");
  }
  for (double v : marks) {
    if (!(v >= 0.0)) throw validation_error("FiniteMMSpace: negative mark");
  }

  // Construction quotient: coincident support points (distance within
  // merge_tol, marks within merge_tol) pool their weight on the first
  // representative in index order.
  std::vector<std::size_t> keep;
  std::vector<std::size_t> cls(n);
  for (std::size_t i = 1; i <= n; ++i) {
    bool merged = false;
    for (std::size_t c = 0; c < keep.size(); ++c) {
      std::size_t j = keep[c];
      if (dist(i, j) <= merge_tol && std::abs(marks[i - 1] - marks[j - 1]) <= merge_tol) {
        cls[i - 1] = c;
        merged = true;
        break;
      }
    }
    if (!merged) {
      cls[i - 1] = keep.size();
      keep.push_back(i);
    }
  }

  const std::size_t m = keep.size();
  dist_ = DistanceMatrix(m);
  weights_.assign(m, 0.0);
  marks_.resize(m);
  for (std::size_t a = 0; a < m; ++a) {
    marks_[a] = marks[keep[a] - 1];
    for (std::size_t b = a + 1; b < m; ++b) {
      dist_.set(a + 1, b + 1, dist(keep[a], keep[b]));
    }
  }
  for (std::size_t i = 0; i < n; ++i) weights_[cls[i]] += weights[i];
}

double FiniteMMSpace::weight(std::size_t i) const {
  if (i < 1 || i > weights_.size()) throw validation_error("FiniteMMSpace: index out of range");
  return weights_[i - 1];
}

double FiniteMMSpace::mark(std::size_t i) const {
  if (i < 1 || i > marks_.size()) throw validation_error("FiniteMMSpace: index out of range");
  return marks_[i - 1];
}

double FiniteMMSpace::metric(std::size_t i, std::size_t j) const {
  return std::max(dist_(i, j), std::abs(mark(i) - mark(j)));
}

void FiniteMMSpace::save(std::ostream& os) const {
  os << "mmspace\n";
  save_matrix(os, dist_);
  os << "weights";
  for (double w : weights_) os << ' ' << w;
  os << "\nmarks";
  for (double v : marks_) os << ' ' << v;
  os << "\n";
}

FiniteMMSpace FiniteMMSpace::load(std::istream& is) {
  std::string tag;
  if (!(is >> tag) || tag != "mmspace") {
    throw validation_error("FiniteMMSpace: expected 'mmspace' header");
  }
  DistanceMatrix dist = load_matrix(is);
  const std::size_t n = dist.size();
  auto read_row = [&](const char* label) {
    std::string got;
    if (!(is >> got) || got != label) {
      throw validation_error(std::string("FiniteMMSpace: expected '") + label + "' row");
    }
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!(is >> row[i])) {
        throw validation_error(std::string("FiniteMMSpace: truncated '") + label + "' row");
      }
    }
    return row;
  };
  std::vector<double> weights = read_row("weights");
  std::vector<double> marks = read_row("marks");
  return FiniteMMSpace(std::move(dist), std::move(weights), std::move(marks));
}

FiniteMMSpace reconstruct_space(const MarkedMatrix& rv) {
  const std::size_t n = rv.size();
  DistanceMatrix r(n);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = i + 1; j <= n; ++j) r.set(i, j, rv.r(i, j));
  }
  return FiniteMMSpace(std::move(r), std::vector<double>(n, 1.0 / static_cast<double>(n)),
                       rv.marks());
}

SampledMatrices sample_distance_matrix(const FiniteMMSpace& space, std::size_t k, Rng& rng) {
  if (k == 0) throw validation_error("sample_distance_matrix: k must be positive");
  const std::size_t m = space.size();
  std::vector<double> cum(m);
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    acc += space.weight(i + 1);
    cum[i] = acc;
  }
  cum[m - 1] = 1.0;

  std::vector<std::size_t> idx(k);
  for (std::size_t a = 0; a < k; ++a) {
    double u = uniform01(rng);
    idx[a] = 1 + static_cast<std::size_t>(std::lower_bound(cum.begin(), cum.end(), u) -
                                          cum.begin());
  }

  MarkedMatrix rv(k);
  for (std::size_t a = 1; a <= k; ++a) {
    rv.set_v(a, space.mark(idx[a - 1]));
    for (std::size_t b = a + 1; b <= k; ++b) {
      rv.set_r(a, b, space.dist()(idx[a - 1], idx[b - 1]));
    }
  }
  return SampledMatrices{rv, alpha(rv)};
}

double prohorov_exact(const FiniteMMSpace& space, const std::vector<double>& w1,
                      const std::vector<double>& w2) {
  const std::size_t m = space.size();
  if (m > 200) {
    throw std::length_error("prohorov_exact: support larger than 200 points");
  }
  check_measure(w1, m, "prohorov_exact: w1");
  check_measure(w2, m, "prohorov_exact: w2");
  std::vector<std::vector<double>> metric(m, std::vector<double>(m));
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= m; ++j) metric[i - 1][j - 1] = space.metric(i, j);
  }
  return prohorov_on_metric(metric, w1, w2);
}

double reconstruction_convergence_gap(const DistanceMatrix& rho, std::size_t n) {
  if (n < 1 || rho.size() < 2 * n) {
    throw validation_error("reconstruction_convergence_gap: need a matrix on at least 2n points");
  }

  auto branch_lengths = [&](std::size_t upto) {
    std::vector<double> v(upto);
    for (std::size_t i = 1; i <= upto; ++i) {
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t j = 1; j <= upto; ++j) {
        if (j != i) nearest = std::min(nearest, rho(i, j));
      }
      v[i - 1] = 0.5 * nearest;
    }
    return v;
  };
  std::vector<double> vn = branch_lengths(n);
  std::vector<double> v2n = branch_lengths(2 * n);

  // Union support inside the tree over the first 2n leaves: a point sits
  // at height u above leaf i, and two points at heights u, u' join at
  // depth rho(i,j)/2, giving path length rho(i,j) - u - u' across leaves
  // and |u - u'| along one leaf's branch.
  std::map<std::pair<std::size_t, double>, std::size_t> seen;
  std::vector<std::pair<std::size_t, double>> pts;
  std::vector<double> w1, w2;
  auto add_point = [&](std::size_t leaf, double height, double mass, bool first) {
    auto key = std::make_pair(leaf, height);
    auto it = seen.find(key);
    std::size_t at;
    if (it == seen.end()) {
      at = pts.size();
      seen.emplace(key, at);
      pts.push_back(key);
      w1.push_back(0.0);
      w2.push_back(0.0);
    } else {
      at = it->second;
    }
    (first ? w1 : w2)[at] += mass;
  };
  for (std::size_t i = 1; i <= n; ++i) {
    add_point(i, vn[i - 1], 1.0 / static_cast<double>(n), true);
  }
  for (std::size_t i = 1; i <= 2 * n; ++i) {
    add_point(i, v2n[i - 1], 0.5 / static_cast<double>(n), false);
  }

  const std::size_t m = pts.size();
  if (m > 200) {
    throw std::length_error("reconstruction_convergence_gap: union support larger than 200 points");
  }
  std::vector<std::vector<double>> metric(m, std::vector<double>(m, 0.0));
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      auto [i, u] = pts[a];
      auto [j, up] = pts[b];
      double d = (i == j) ? std::abs(u - up) : rho(i, j) - u - up;
      metric[a][b] = metric[b][a] = d;
    }
  }
  return prohorov_on_metric(metric, w1, w2);
}

}  // namespace coaltree
