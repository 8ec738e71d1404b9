#include "coaltree/report.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <sstream>

namespace coaltree {

std::string format_full(double value) {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << value;
  return os.str();
}

void ExperimentReport::add_param(const std::string& key, const std::string& value) {
  parameters.emplace_back(key, value);
}

void ExperimentReport::add_param(const std::string& key, double value) {
  parameters.emplace_back(key, format_full(value));
}

void ExperimentReport::add_param(const std::string& key, std::size_t value) {
  parameters.emplace_back(key, std::to_string(value));
}

void ExperimentReport::save(std::ostream& os) const {
  os << "report: " << name << "\n";
  os << "seed: " << seed << "\n";
  os << "passed: " << (passed ? "true" : "false") << "\n";
  std::vector<std::pair<std::string, std::string>> sorted = parameters;
  std::sort(sorted.begin(), sorted.end());
  os << "parameters:\n";
  for (const auto& [key, value] : sorted) os << "  " << key << ": " << value << "\n";
  os << "estimates:\n";
  for (const ReportEntry& e : estimates) {
    os << "  " << e.label << ": value=" << format_full(e.value) << " se=" << format_full(e.se)
       << " n=" << e.count << "\n";
  }
  os << "tests:\n";
  for (const ReportTest& t : tests) {
    os << "  " << t.label << ": p=" << format_full(t.p_value)
       << " rejected=" << (t.rejected ? "true" : "false") << "\n";
  }
  os << "notes:\n";
  for (const std::string& n : notes) os << "  - " << n << "\n";
}

std::string ExperimentReport::to_text() const {
  std::ostringstream os;
  save(os);
  return os.str();
}

}  // namespace coaltree
