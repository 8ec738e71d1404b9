#include "coaltree/matrix.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace coaltree {

DistanceMatrix::DistanceMatrix(std::size_t n, double fill) : n_(n), d_(n * n, fill) {
  for (std::size_t i = 0; i < n_; ++i) d_[i * n_ + i] = 0.0;
}

void DistanceMatrix::set(std::size_t i, std::size_t j, double value) {
  check_index(i);
  check_index(j);
  if (i == j) {
    if (value != 0.0) throw std::invalid_argument("DistanceMatrix: diagonal must stay zero");
    return;
  }
  d_[(i - 1) * n_ + (j - 1)] = value;
  d_[(j - 1) * n_ + (i - 1)] = value;
}

void DistanceMatrix::add_off_diagonal(double delta) {
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j)
      if (i != j) d_[i * n_ + j] += delta;
}

double DistanceMatrix::max_off_diagonal() const {
  double m = 0.0;
  for (std::size_t i = 1; i <= n_; ++i)
    for (std::size_t j = i + 1; j <= n_; ++j) m = std::max(m, (*this)(i, j));
  return m;
}

double DistanceMatrix::min_off_diagonal() const {
  if (n_ < 2) throw std::invalid_argument("DistanceMatrix: min_off_diagonal needs size >= 2");
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i <= n_; ++i)
    for (std::size_t j = i + 1; j <= n_; ++j) m = std::min(m, (*this)(i, j));
  return m;
}

MarkedMatrix::MarkedMatrix(DistanceMatrix r, std::vector<double> v) : r_(std::move(r)), v_(std::move(v)) {
  if (v_.size() != r_.size()) throw std::invalid_argument("MarkedMatrix: mark count must equal matrix size");
}

double MarkedMatrix::v(std::size_t i) const {
  if (i < 1 || i > v_.size()) throw std::invalid_argument("MarkedMatrix: index out of range");
  return v_[i - 1];
}

void MarkedMatrix::set_v(std::size_t i, double value) {
  if (i < 1 || i > v_.size()) throw std::invalid_argument("MarkedMatrix: index out of range");
  v_[i - 1] = value;
}

namespace {

ValidationReport fail(MatrixKind kind, std::size_t i, std::size_t j, std::size_t k, std::size_t l,
                      double slack, std::string message) {
  ValidationReport r;
  r.ok = false;
  r.kind = kind;
  r.i = i;
  r.j = j;
  r.k = k;
  r.l = l;
  r.slack = slack;
  r.message = std::move(message);
  return r;
}

ValidationReport check_pairwise(const DistanceMatrix& m, MatrixKind kind, double tol) {
  const std::size_t n = m.size();
  for (std::size_t i = 1; i <= n; ++i) {
    if (m(i, i) != 0.0)
      return fail(kind, i, i, 0, 0, std::abs(m(i, i)), "nonzero diagonal entry");
    for (std::size_t j = i + 1; j <= n; ++j) {
      if (m(i, j) < -tol) return fail(kind, i, j, 0, 0, -m(i, j), "negative entry");
      if (std::abs(m(i, j) - m(j, i)) > tol)
        return fail(kind, i, j, 0, 0, std::abs(m(i, j) - m(j, i)), "asymmetric entry");
    }
  }
  return ValidationReport{true, kind, 0, 0, 0, 0, 0.0, ""};
}

ValidationReport check_triangle(const DistanceMatrix& m, MatrixKind kind, double tol, bool strong) {
  const std::size_t n = m.size();
  if (n > 1024) throw std::length_error("validate: cubic check limited to size 1024");
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = i + 1; j <= n; ++j)
      for (std::size_t k = 1; k <= n; ++k) {
        if (k == i || k == j) continue;
        const double bound = strong ? std::max(m(i, k), m(k, j)) : m(i, k) + m(k, j);
        if (m(i, j) > bound + tol)
          return fail(kind, i, j, k, 0, m(i, j) - bound,
                      strong ? "strong triangle inequality violated" : "triangle inequality violated");
      }
  return ValidationReport{true, kind, 0, 0, 0, 0, 0.0, ""};
}

ValidationReport check_four_point(const DistanceMatrix& m, double tol) {
  const std::size_t n = m.size();
  if (n > 128) throw std::length_error("validate: quartic check limited to size 128");
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = i + 1; j <= n; ++j)
      for (std::size_t k = j + 1; k <= n; ++k)
        for (std::size_t l = k + 1; l <= n; ++l) {
          double s1 = m(i, j) + m(k, l);
          double s2 = m(i, k) + m(j, l);
          double s3 = m(i, l) + m(j, k);
          // Sort so s1 <= s2 <= s3; the condition is s2 == s3.
          if (s1 > s2) std::swap(s1, s2);
          if (s2 > s3) std::swap(s2, s3);
          if (s1 > s2) std::swap(s1, s2);
          if (s3 - s2 > tol)
            return fail(MatrixKind::treelike, i, j, k, l, s3 - s2, "four-point condition violated");
        }
  return ValidationReport{true, MatrixKind::treelike, 0, 0, 0, 0, 0.0, ""};
}

}  // namespace

ValidationReport validate(const DistanceMatrix& m, MatrixKind kind, double tol) {
  ValidationReport r = check_pairwise(m, kind, tol);
  if (!r.ok) return r;
  switch (kind) {
    case MatrixKind::semimetric:
      return check_triangle(m, kind, tol, /*strong=*/false);
    case MatrixKind::ultrametric:
      return check_triangle(m, kind, tol, /*strong=*/true);
    case MatrixKind::treelike:
      r = check_triangle(m, MatrixKind::treelike, tol, /*strong=*/false);
      if (!r.ok) return r;
      return check_four_point(m, tol);
    case MatrixKind::marked:
      throw std::invalid_argument("validate: marked kind requires a MarkedMatrix");
  }
  throw std::logic_error("validate: unknown kind");
}

ValidationReport validate(const MarkedMatrix& m, double tol) {
  for (std::size_t i = 1; i <= m.size(); ++i)
    if (m.v(i) < -tol)
      return fail(MatrixKind::marked, i, 0, 0, 0, -m.v(i), "negative mark");
  ValidationReport r = validate(m.r(), MatrixKind::treelike, tol);
  r.kind = MatrixKind::marked;
  return r;
}

namespace {

std::ostream& full_precision(std::ostream& os) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  return os;
}

}  // namespace

void save_matrix(std::ostream& os, const DistanceMatrix& m) {
  full_precision(os);
  os << m.size() << "\n";
  for (std::size_t i = 1; i <= m.size(); ++i) {
    for (std::size_t j = 1; j <= m.size(); ++j) {
      if (j > 1) os << ' ';
      os << m(i, j);
    }
    os << "\n";
  }
}

DistanceMatrix load_matrix(std::istream& is) {
  std::size_t n = 0;
  if (!(is >> n)) throw validation_error("matrix file: missing size line");
  DistanceMatrix m(n);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= n; ++j) {
      double x;
      if (!(is >> x)) throw validation_error("matrix file: truncated row " + std::to_string(i));
      if (i == j) {
        if (x != 0.0) throw validation_error("matrix file: nonzero diagonal in row " + std::to_string(i));
      } else if (j > i) {
        m.set(i, j, x);
      } else if (x != m(i, j)) {
        throw validation_error("matrix file: asymmetric entry at row " + std::to_string(i));
      }
    }
  return m;
}

void save_marked(std::ostream& os, const MarkedMatrix& m) {
  save_matrix(os, m.r());
  os << "marks";
  for (std::size_t i = 1; i <= m.size(); ++i) os << ' ' << m.v(i);
  os << "\n";
}

MarkedMatrix load_marked(std::istream& is) {
  DistanceMatrix r = load_matrix(is);
  std::string tag;
  if (!(is >> tag) || tag != "marks") throw validation_error("marked matrix file: missing marks line");
  std::vector<double> v(r.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    if (!(is >> v[i])) throw validation_error("marked matrix file: truncated marks line");
  return MarkedMatrix(std::move(r), std::move(v));
}

}  // namespace coaltree
