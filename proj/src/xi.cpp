#include "coaltree/xi.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "coaltree/matrix.hpp"

namespace coaltree {

XiSpec::XiSpec(double kingman_mass, std::vector<XiAtom> atoms)
    : kingman_mass_(kingman_mass), atoms_(std::move(atoms)) {
  if (!(kingman_mass_ >= 0.0)) {
    throw validation_error("XiSpec: kingman_mass must be nonnegative");
  }
  total_mass_ = kingman_mass_;
  for (std::size_t k = 0; k < atoms_.size(); ++k) {
    if (!(atoms_[k].weight > 0.0)) {
      throw validation_error("XiSpec: atoms[" + std::to_string(k) + "].weight must be positive");
    }
    if (atoms_[k].point.coords().empty()) {
      throw validation_error("XiSpec: atoms[" + std::to_string(k) +
                             "].x must be nonzero; zero-point mass belongs in kingman_mass");
    }
    total_mass_ += atoms_[k].weight;
  }
}

bool is_dust_free(const XiSpec& xi) { return xi.kingman_mass() > 0.0; }

ExtRate ExtRate::finite(double value) {
  if (!(value >= 0.0)) throw std::invalid_argument("ExtRate: rate must be nonnegative");
  ExtRate r;
  r.value_ = value;
  return r;
}

ExtRate ExtRate::infinity() {
  ExtRate r;
  r.infinite_ = true;
  return r;
}

double ExtRate::value() const {
  if (infinite_) throw std::logic_error("ExtRate: arithmetic on an infinite rate");
  return value_;
}

namespace {

// Sum over ordered tuples of distinct support indices of
// prod_b x_{i_b}^{exps[b]}, expanded through power sums: grouping tuple
// positions that share an index turns the sum into a signed sum over set
// partitions of the positions.
double distinct_tuple_sum(const SimplexPoint& x, const std::vector<std::size_t>& exps) {
  const std::size_t l = exps.size();
  if (l == 0) return 1.0;
  if (x.coords().size() < l) return 0.0;

  std::size_t max_pow = 0;
  for (std::size_t e : exps) max_pow += e;
  std::vector<double> power_sum(max_pow + 1, 0.0);
  for (double c : x.coords()) {
    double p = 1.0;
    for (std::size_t t = 1; t <= max_pow; ++t) {
      p *= c;
      power_sum[t] += p;
    }
  }

  double total = 0.0;
  for (const Partition& grouping : all_partitions(l)) {
    double term = 1.0;
    for (const auto& cell : grouping.blocks()) {
      std::size_t t = 0;
      for (std::size_t pos : cell) t += exps[pos - 1];
      double factor = power_sum[t];
      if (cell.size() % 2 == 0) factor = -factor;
      for (std::size_t m = 2; m + 1 <= cell.size(); ++m) factor *= static_cast<double>(m);
      term *= factor;
    }
    total += term;
  }
  return total;
}

double dust_power(const SimplexPoint& x, std::size_t e) {
  const double dust = std::max(0.0, x.dust());
  return e == 0 ? 1.0 : std::pow(dust, static_cast<double>(e));
}

}  // namespace

ExtRate rate_semipartition(const XiSpec& xi, std::size_t n, const SemiPartition& sigma) {
  if (sigma.n() != n) throw std::invalid_argument("rate_semipartition: horizon mismatch");
  if (sigma.is_empty()) {
    throw std::invalid_argument("rate_semipartition: need at least one covered block");
  }

  std::vector<std::size_t> sizes;
  std::size_t covered = 0;
  for (const auto& block : sigma.blocks()) {
    sizes.push_back(block.size());
    covered += block.size();
  }
  const bool lone_singleton = sizes.size() == 1 && sizes[0] == 1;
  if (lone_singleton && xi.kingman_mass() > 0.0) return ExtRate::infinity();

  double rate = 0.0;
  for (const XiAtom& atom : xi.atoms()) {
    rate += atom.weight / atom.point.l2sq() * distinct_tuple_sum(atom.point, sizes) *
            dust_power(atom.point, n - covered);
  }
  if (sizes.size() == 1 && sizes[0] == 2) rate += xi.kingman_mass();
  return ExtRate::finite(rate);
}

double rate_partition(const XiSpec& xi, std::size_t n, const Partition& pi) {
  if (pi.n() != n) throw std::invalid_argument("rate_partition: horizon mismatch");
  if (pi.is_singletons()) {
    throw std::invalid_argument("rate_partition: the all-singleton pattern has no rate");
  }

  std::vector<std::size_t> sizes;
  std::size_t singles = 0;
  for (std::size_t b = 1; b <= pi.count(); ++b) {
    const std::size_t k = pi.block_size(b);
    if (k >= 2) {
      sizes.push_back(k);
    } else {
      ++singles;
    }
  }

  double rate = 0.0;
  for (const XiAtom& atom : xi.atoms()) {
    // Each of the `singles` free levels either falls into dust or covers
    // its own support index, distinct from all other choices.
    double inner = 0.0;
    double binom = 1.0;
    std::vector<std::size_t> exps = sizes;
    for (std::size_t m = 0; m <= singles; ++m) {
      if (m > 0) {
        binom *= static_cast<double>(singles - m + 1) / static_cast<double>(m);
        exps.push_back(1);
      }
      inner += binom * dust_power(atom.point, singles - m) * distinct_tuple_sum(atom.point, exps);
    }
    rate += atom.weight / atom.point.l2sq() * inner;
  }
  if (sizes.size() == 1 && sizes[0] == 2) rate += xi.kingman_mass();
  return rate;
}

RateTable build_rate_table(const XiSpec& xi, std::size_t n) {
  if (n < 1) throw std::invalid_argument("build_rate_table: horizon must be positive");

  const double pair_rate = rate_partition(xi, 2, Partition::from_blocks(2, {{1, 2}}));
  if (std::abs(pair_rate - xi.total_mass()) > 1e-12 * std::max(1.0, xi.total_mass())) {
    throw std::logic_error("build_rate_table: two-point rate disagrees with total mass");
  }

  RateTable table;
  table.n = n;
  for (const Partition& pi : all_partitions(n)) {
    if (pi.is_singletons()) continue;
    table.partition_rates.emplace(pi, rate_partition(xi, n, pi));
  }
  for (const SemiPartition& sigma : all_semipartitions(n)) {
    if (sigma.is_empty()) continue;
    table.semipartition_rates.emplace(sigma, rate_semipartition(xi, n, sigma));
  }
  return table;
}

void sample_event_stream(const XiSpec& xi, std::size_t n, StreamMode mode, double horizon,
                         Rng& rng, const std::function<void(EventRecord&&)>& sink) {
  if (n < 1) throw std::invalid_argument("sample_event_stream: horizon level must be positive");
  if (!(horizon >= 0.0)) throw std::invalid_argument("sample_event_stream: negative time horizon");
  if (mode == StreamMode::rv && is_dust_free(xi)) {
    throw std::invalid_argument(
        "sample_event_stream: rv mode requires a measure with dust (no mass at zero)");
  }

  std::vector<double> atom_rates;
  double total = 0.0;
  for (const XiAtom& atom : xi.atoms()) {
    atom_rates.push_back(atom.weight / atom.point.l2sq());
    total += atom_rates.back();
  }
  const double kingman_total =
      n >= 2 ? xi.kingman_mass() * 0.5 * static_cast<double>(n) * static_cast<double>(n - 1) : 0.0;
  total += kingman_total;

  if (total <= 0.0 || horizon == 0.0) return;

  double t = 0.0;
  double last_emitted = -1.0;
  for (;;) {
    t += exponential(rng, total);
    if (t > horizon) break;

    double pick = uniform01(rng) * total;
    std::size_t cat = atom_rates.size();
    for (std::size_t a = 0; a < atom_rates.size(); ++a) {
      if (pick < atom_rates[a]) {
        cat = a;
        break;
      }
      pick -= atom_rates[a];
    }
    // Rounding in pick can overshoot the last positive category.
    if (cat == atom_rates.size() && kingman_total <= 0.0) cat = atom_rates.size() - 1;

    Partition pi;
    SemiPartition sigma;
    if (cat < atom_rates.size()) {
      PaintboxDraw draw = paintbox_sample(xi.atoms()[cat].point, n, rng);
      pi = draw.partition;
      sigma = strip_restrict(pi, draw.nonsingleton, n);
    } else {
      auto [i, j] = uniform_pair(rng, n);
      pi = Partition::pair_merger(n, i, j);
      sigma = SemiPartition::from_blocks(n, {{i, j}});
    }

    const bool visible = mode == StreamMode::rho ? !pi.is_singletons() : !sigma.is_empty();
    if (!visible) continue;
    if (t == last_emitted) {
      throw std::logic_error("sample_event_stream: duplicate event timestamp");
    }
    last_emitted = t;
    sink(EventRecord{t, std::move(pi), std::move(sigma)});
  }
}

std::vector<EventRecord> sample_event_stream(const XiSpec& xi, std::size_t n, StreamMode mode,
                                             double horizon, Rng& rng) {
  std::vector<EventRecord> out;
  sample_event_stream(xi, n, mode, horizon, rng,
                      [&out](EventRecord&& event) { out.push_back(std::move(event)); });
  return out;
}

XiSpec discretize_lambda(const std::function<double(double)>& density, double eps,
                         std::size_t nodes, double kingman_mass) {
  if (!(eps > 0.0 && eps < 1.0)) {
    throw std::invalid_argument("discretize_lambda: eps must lie in (0, 1)");
  }
  if (nodes == 0) throw std::invalid_argument("discretize_lambda: need at least one node");

  const double h = (1.0 - eps) / static_cast<double>(nodes);
  std::vector<XiAtom> atoms;
  for (std::size_t k = 0; k < nodes; ++k) {
    const double x = eps + (static_cast<double>(k) + 0.5) * h;
    const double f = density(x);
    if (f < 0.0) throw validation_error("discretize_lambda: density must be nonnegative");
    if (f == 0.0) continue;
    atoms.push_back(XiAtom{f * h, SimplexPoint({x})});
  }
  return XiSpec(kingman_mass, std::move(atoms));
}

namespace {

// Tokens of the measure file format: words, numbers, and the punctuation
// `:,[]{}`.
struct Token {
  enum Kind { word, number, punct, end } kind = end;
  std::string text;
  double num = 0.0;
};

class Lexer {
 public:
  explicit Lexer(std::istream& is) : is_(is) {}

  Token next() {
    int c = is_.peek();
    while (c != EOF && std::isspace(c)) {
      is_.get();
      c = is_.peek();
    }
    if (c == EOF) return Token{Token::end, "", 0.0};
    if (std::strchr(":,[]{}", c) != nullptr) {
      is_.get();
      return Token{Token::punct, std::string(1, static_cast<char>(c)), 0.0};
    }
    if (std::isalpha(c) || c == '_') {
      std::string w;
      while (c != EOF && (std::isalnum(c) || c == '_')) {
        w.push_back(static_cast<char>(is_.get()));
        c = is_.peek();
      }
      return Token{Token::word, std::move(w), 0.0};
    }
    double v = 0.0;
    if (!(is_ >> v)) throw validation_error("xi file: malformed number");
    return Token{Token::number, "", v};
  }

 private:
  std::istream& is_;
};

void expect_punct(Lexer& lex, char c, const std::string& where) {
  Token t = lex.next();
  if (t.kind != Token::punct || t.text[0] != c) {
    throw validation_error("xi file: expected '" + std::string(1, c) + "' after " + where);
  }
}

void expect_word(Lexer& lex, const std::string& w) {
  Token t = lex.next();
  if (t.kind != Token::word || t.text != w) {
    throw validation_error("xi file: expected '" + w + "' field");
  }
}

double expect_number(Lexer& lex, const std::string& field) {
  Token t = lex.next();
  if (t.kind != Token::number) {
    throw validation_error("xi file: expected a number for " + field);
  }
  return t.num;
}

}  // namespace

void XiSpec::save(std::ostream& os) const {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "kingman_mass: " << kingman_mass_ << "\n";
  if (atoms_.empty()) {
    os << "atoms: []\n";
    return;
  }
  os << "atoms: [\n";
  for (std::size_t k = 0; k < atoms_.size(); ++k) {
    os << "  {weight: " << atoms_[k].weight << ", x: [";
    const auto& c = atoms_[k].point.coords();
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (i > 0) os << ", ";
      os << c[i];
    }
    os << "]}" << (k + 1 < atoms_.size() ? "," : "") << "\n";
  }
  os << "]\n";
}

XiSpec XiSpec::load(std::istream& is) {
  Lexer lex(is);
  expect_word(lex, "kingman_mass");
  expect_punct(lex, ':', "kingman_mass");
  const double mass = expect_number(lex, "kingman_mass");
  if (!(mass >= 0.0)) throw validation_error("xi file: kingman_mass must be nonnegative");

  expect_word(lex, "atoms");
  expect_punct(lex, ':', "atoms");
  expect_punct(lex, '[', "atoms");

  std::vector<XiAtom> atoms;
  Token t = lex.next();
  while (!(t.kind == Token::punct && t.text == "]")) {
    const std::string slot = "atoms[" + std::to_string(atoms.size()) + "]";
    if (!(t.kind == Token::punct && t.text == "{")) {
      throw validation_error("xi file: expected '{' opening " + slot);
    }
    expect_word(lex, "weight");
    expect_punct(lex, ':', slot + ".weight");
    const double w = expect_number(lex, slot + ".weight");
    if (!(w > 0.0)) throw validation_error("xi file: " + slot + ".weight must be positive");
    expect_punct(lex, ',', slot + ".weight");
    expect_word(lex, "x");
    expect_punct(lex, ':', slot + ".x");
    expect_punct(lex, '[', slot + ".x");
    std::vector<double> coords;
    Token u = lex.next();
    while (!(u.kind == Token::punct && u.text == "]")) {
      if (u.kind == Token::punct && u.text == ",") {
        u = lex.next();
        continue;
      }
      if (u.kind != Token::number) {
        throw validation_error("xi file: expected a number in " + slot + ".x");
      }
      coords.push_back(u.num);
      u = lex.next();
    }
    expect_punct(lex, '}', slot);
    try {
      atoms.push_back(XiAtom{w, SimplexPoint(std::move(coords))});
    } catch (const std::invalid_argument& e) {
      throw validation_error("xi file: " + slot + ".x: " + e.what());
    }
    t = lex.next();
    if (t.kind == Token::punct && t.text == ",") t = lex.next();
  }
  try {
    return XiSpec(mass, std::move(atoms));
  } catch (const validation_error& e) {
    throw validation_error("xi file: " + std::string(e.what()));
  }
}

}  // namespace coaltree
