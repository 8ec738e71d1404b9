#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace coaltree {

struct ReportEntry {
  std::string label;
  double value;
  double se;
  std::size_t count;
};

struct ReportTest {
  std::string label;
  double p_value;
  bool rejected;
};

// Named experiment outcome. Serialization is deterministic: parameters are
// emitted sorted by key, numbers at full round-trip precision, and nothing
// clock-dependent is recorded.
struct ExperimentReport {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> parameters;
  std::vector<ReportEntry> estimates;
  std::vector<ReportTest> tests;
  std::vector<std::string> notes;
  bool passed = false;

  void add_param(const std::string& key, const std::string& value);
  void add_param(const std::string& key, double value);
  void add_param(const std::string& key, std::size_t value);

  void save(std::ostream& os) const;
  std::string to_text() const;
};

std::string format_full(double value);

}  // namespace coaltree
