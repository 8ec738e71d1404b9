#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace coaltree {

// Thrown when data fails a structural check (metric axioms, weight sums,
// file contents). Distinct from std::invalid_argument, which flags misuse
// of an interface.
class validation_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Symmetric nonnegative matrix with zero diagonal, indexed 1..size().
// Storage is dense; set() writes both (i,j) and (j,i).
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n, double fill = 0.0);

  std::size_t size() const { return n_; }

  double operator()(std::size_t i, std::size_t j) const {
    check_index(i);
    check_index(j);
    return d_[(i - 1) * n_ + (j - 1)];
  }

  void set(std::size_t i, std::size_t j, double value);

  // Adds delta to every off-diagonal entry.
  void add_off_diagonal(double delta);

  double max_off_diagonal() const;
  double min_off_diagonal() const;  // size() >= 2 required

  bool operator==(const DistanceMatrix& other) const = default;

 private:
  void check_index(std::size_t i) const {
    if (i < 1 || i > n_) throw std::invalid_argument("DistanceMatrix: index out of range");
  }

  std::size_t n_ = 0;
  std::vector<double> d_;
};

// Pair (r, v): a distance matrix plus one nonnegative mark per index.
class MarkedMatrix {
 public:
  MarkedMatrix() = default;
  explicit MarkedMatrix(std::size_t n) : r_(n), v_(n, 0.0) {}
  MarkedMatrix(DistanceMatrix r, std::vector<double> v);

  std::size_t size() const { return r_.size(); }
  const DistanceMatrix& r() const { return r_; }
  DistanceMatrix& r() { return r_; }
  double r(std::size_t i, std::size_t j) const { return r_(i, j); }
  void set_r(std::size_t i, std::size_t j, double value) { r_.set(i, j, value); }
  double v(std::size_t i) const;
  void set_v(std::size_t i, double value);
  const std::vector<double>& marks() const { return v_; }

  bool operator==(const MarkedMatrix& other) const = default;

 private:
  DistanceMatrix r_;
  std::vector<double> v_;
};

enum class MatrixKind { semimetric, ultrametric, treelike, marked };

// Outcome of a structural check. When ok is false, (i, j, k, l) identify
// the first violating tuple (unused positions are zero) and slack is the
// amount by which the condition failed.
struct ValidationReport {
  bool ok = true;
  MatrixKind kind = MatrixKind::semimetric;
  std::size_t i = 0, j = 0, k = 0, l = 0;
  double slack = 0.0;
  std::string message;
};

// Structural checks. semimetric: symmetry, zero diagonal, nonnegativity,
// triangle inequality. ultrametric: semimetric plus the strong triangle
// inequality. treelike: semimetric plus the four-point condition (the two
// largest of the three pairings of sums agree). marked: r treelike and all
// marks nonnegative. Checks beyond the pairwise level are cubic or quartic
// in size and refuse inputs larger than 1024 (cubic) or 128 (quartic).
ValidationReport validate(const DistanceMatrix& m, MatrixKind kind, double tol = 1e-9);
ValidationReport validate(const MarkedMatrix& m, double tol = 1e-9);

// Plain-text matrix exchange format: first line is the size, then one
// whitespace-separated row per line. The marked variant appends a line
// "marks" followed by the mark values. Values round-trip exactly.
void save_matrix(std::ostream& os, const DistanceMatrix& m);
DistanceMatrix load_matrix(std::istream& is);
void save_marked(std::ostream& os, const MarkedMatrix& m);
MarkedMatrix load_marked(std::istream& is);

}  // namespace coaltree
