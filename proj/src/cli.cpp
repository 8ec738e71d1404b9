#include "coaltree/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "CLI11.hpp"
#include "coaltree/bridges.hpp"
#include "coaltree/lookdown.hpp"
#include "coaltree/partitions.hpp"
#include "coaltree/stats.hpp"
#include "coaltree/treespace.hpp"
#include "coaltree/xi.hpp"

namespace coaltree {

namespace {

constexpr const char* kVersion = "0.1.0";

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex16(std::uint64_t value) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << value;
  return os.str();
}

XiSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("config file not found: " + path);
  return XiSpec::load(in);
}

std::string resolve_out_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("COALTREE_OUT"); env != nullptr && *env != '\0') return env;
  return ".";
}

std::string write_artifact(const std::string& dir, const std::string& filename,
                           const std::string& header, const std::string& body) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string path = (fs::path(dir) / filename).string();
  std::ofstream out(path);
  if (!out) throw validation_error("cannot open output file: " + path);
  out << header << body;
  return path;
}

std::string quoted(const std::string& field) { return "\"" + field + "\""; }

std::vector<double> upper_triangle(const DistanceMatrix& m) {
  std::vector<double> out;
  out.reserve(m.size() * (m.size() - 1) / 2);
  for (std::size_t i = 1; i <= m.size(); ++i)
    for (std::size_t j = i + 1; j <= m.size(); ++j) out.push_back(m(i, j));
  return out;
}

double median_of(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size();
  return m % 2 == 1 ? xs[m / 2] : 0.5 * (xs[m / 2 - 1] + xs[m / 2]);
}

// Wilson-Hilferty cube approximation of the chi-squared 0.99 quantile;
// accurate to a few tenths of a percent for the small block counts here.
double chi2_critical_99(std::size_t dof) {
  const double d = static_cast<double>(dof);
  const double z = 2.3263478740408408;
  const double c = 1.0 - 2.0 / (9.0 * d) + z * std::sqrt(2.0 / (9.0 * d));
  return d * c * c * c;
}

int run_rates(const RunConfig& cfg, const XiSpec& xi, const std::string& header) {
  const RateTable table = build_rate_table(xi, cfg.n);
  std::ostringstream body;
  body << "kind,pattern,rate\n";
  for (const auto& [pi, rate] : table.partition_rates) {
    body << "partition," << quoted(pi.to_string()) << "," << format_full(rate) << "\n";
  }
  for (const auto& [sigma, rate] : table.semipartition_rates) {
    body << "semipartition," << quoted(sigma.to_string()) << ","
         << (rate.is_infinite() ? std::string("inf") : format_full(rate.value())) << "\n";
  }
  const std::string path = write_artifact(cfg.out_dir, "rates.csv", header, body.str());
  std::cout << body.str() << "wrote " << path << "\n";
  return 0;
}

int run_coalescent(const RunConfig& cfg, const XiSpec& xi, const std::string& header) {
  std::vector<DistanceMatrix> trees(cfg.reps);
  for_each_replicate(cfg.reps, cfg.threads, [&](std::size_t r) {
    Rng rng = replicate_rng(cfg.seed, r);
    trees[r] = sample_stationary_ultrametric(xi, cfg.n, rng);
  });

  std::ostringstream body;
  body << "rep,i,j,rho\n";
  for (std::size_t r = 0; r < trees.size(); ++r) {
    for (std::size_t i = 1; i <= cfg.n; ++i)
      for (std::size_t j = i + 1; j <= cfg.n; ++j) {
        body << r << "," << i << "," << j << "," << format_full(trees[r](i, j)) << "\n";
      }
  }
  const std::string csv = write_artifact(cfg.out_dir, "coalescent.csv", header, body.str());

  ExperimentReport summary = summarize_trees("coalescent", trees, {});
  summary.seed = cfg.seed;
  const std::string txt =
      write_artifact(cfg.out_dir, "coalescent_summary.txt", header, summary.to_text());
  std::cout << summary.to_text() << "wrote " << csv << "\nwrote " << txt << "\n";
  return 0;
}

int run_lookdown(const RunConfig& cfg, const XiSpec& xi, const std::string& header) {
  Rng rng = replicate_rng(cfg.seed, 0);
  const StreamMode mode = cfg.mode == "rv" ? StreamMode::rv : StreamMode::rho;
  auto events = sample_event_stream(xi, cfg.n, mode, cfg.t, rng);
  const LookdownPath path =
      mode == StreamMode::rv
          ? LookdownPath::from_rv(MarkedMatrix(cfg.n), std::move(events), cfg.t)
          : LookdownPath::from_rho(DistanceMatrix(cfg.n), std::move(events), cfg.t);
  std::ostringstream body;
  dump_path_csv(path, body);
  const std::string out = write_artifact(cfg.out_dir, "lookdown.csv", header, body.str());
  std::cout << "wrote " << out << "\n";
  return 0;
}

int run_bridges(const RunConfig& cfg, const XiSpec& xi, const std::string& header) {
  Rng rng = replicate_rng(cfg.seed, 0);
  const BridgeFlow flow = sample_flow(xi, cfg.t, rng);
  std::ostringstream body;
  dump_flow_csv(flow, body);
  const std::string out = write_artifact(cfg.out_dir, "bridges.csv", header, body.str());
  std::cout << "wrote " << out << "\n";
  return 0;
}

ExperimentReport check_rates(const RunConfig& cfg, const XiSpec& xi) {
  const double horizon = cfg.t;
  Rng rng = replicate_rng(cfg.seed, 0);
  std::map<Partition, std::size_t> counts;
  sample_event_stream(xi, cfg.n, StreamMode::rho, horizon, rng,
                      [&counts](EventRecord&& ev) { counts[ev.partition] += 1; });

  ExperimentReport report;
  report.name = "rates";
  report.seed = cfg.seed;
  report.add_param("n", cfg.n);
  report.add_param("horizon", horizon);
  report.notes.push_back("test entries record z-scores, rejected above 3");

  bool all_ok = true;
  for (const auto& [pi, rate] : build_rate_table(xi, cfg.n).partition_rates) {
    const auto it = counts.find(pi);
    const double count = it == counts.end() ? 0.0 : static_cast<double>(it->second);
    const double empirical = count / horizon;
    const double se = std::sqrt(rate / horizon);
    const double z = se > 0.0 ? std::abs(empirical - rate) / se
                              : (count == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    const bool ok = z <= 3.0;
    all_ok = all_ok && ok;
    report.estimates.push_back({pi.to_string() + ":empirical", empirical, se, counts.size()});
    report.estimates.push_back({pi.to_string() + ":expected", rate, 0.0, 0});
    report.tests.push_back({pi.to_string(), z, !ok});
  }
  report.passed = all_ok;
  return report;
}

ExperimentReport check_representation(const RunConfig& cfg, const XiSpec& xi) {
  const std::size_t k = 4;
  std::vector<std::vector<double>> resampled(cfg.reps), fresh(cfg.reps);
  for_each_replicate(cfg.reps, cfg.threads, [&](std::size_t r) {
    Rng a = replicate_rng(cfg.seed, r);
    resampled[r] = upper_triangle(stationary_marked_resample(xi, cfg.n, k, a).rho);
    Rng b = replicate_rng(cfg.seed, cfg.reps + r);
    fresh[r] = upper_triangle(sample_stationary_ultrametric(xi, k, b));
  });
  Rng perm_rng = replicate_rng(cfg.seed, 2 * cfg.reps + 3);
  const double p = energy_two_sample(resampled, fresh, 500, perm_rng);

  ExperimentReport report;
  report.name = "representation";
  report.seed = cfg.seed;
  report.add_param("population", cfg.n);
  report.add_param("k", k);
  report.add_param("reps", cfg.reps);
  report.tests.push_back({"energy", p, p < 0.01});
  report.passed = p >= 0.01;
  return report;
}

ExperimentReport check_generator(const RunConfig& cfg, const XiSpec& xi) {
  ExperimentReport report = generator_check_rho(xi, TestFunction::plain(2, {1.0}),
                                                DistanceMatrix(cfg.n), cfg.step, cfg.reps,
                                                cfg.seed);
  report.add_param("n", cfg.n);
  return report;
}

ExperimentReport check_equilibrium(const RunConfig& cfg, const XiSpec& xi) {
  return equilibrium_gap(xi, cfg.n, cfg.t, TestFunction::registry(2, true),
                         DistanceMatrix(cfg.n), cfg.reps, cfg.seed);
}

ExperimentReport check_bridges(const RunConfig& cfg, const XiSpec& xi) {
  const double s = cfg.t;
  std::vector<Partition> from_flow(cfg.reps), from_tree(cfg.reps);
  for_each_replicate(cfg.reps, cfg.threads, [&](std::size_t r) {
    Rng a = replicate_rng(cfg.seed, r);
    const BridgeFlow flow = sample_flow(xi, s, a);
    std::vector<double> V(cfg.n);
    for (double& v : V) v = uniform01(a);
    from_flow[r] = coalescent_from_flow(flow, V, s, {s}).front();
    Rng b = replicate_rng(cfg.seed, cfg.reps + r);
    from_tree[r] = extract_coalescent(sample_stationary_ultrametric(xi, cfg.n, b), {s}).front();
  });

  std::map<Partition, std::pair<std::size_t, std::size_t>> cells;
  for (const Partition& pi : from_flow) cells[pi].first += 1;
  for (const Partition& pi : from_tree) cells[pi].second += 1;
  double stat = 0.0;
  for (const auto& [pi, ab] : cells) {
    const double a = static_cast<double>(ab.first);
    const double b = static_cast<double>(ab.second);
    stat += (a - b) * (a - b) / (a + b);
  }
  const std::size_t dof = cells.size() > 1 ? cells.size() - 1 : 1;
  const double critical = chi2_critical_99(dof);

  ExperimentReport report;
  report.name = "bridges";
  report.seed = cfg.seed;
  report.add_param("n", cfg.n);
  report.add_param("depth", s);
  report.add_param("reps", cfg.reps);
  report.add_param("classes", cells.size());
  report.estimates.push_back({"chi_squared", stat, 0.0, cfg.reps});
  report.estimates.push_back({"critical_0.99", critical, 0.0, 0});
  report.notes.push_back("critical value from the Wilson-Hilferty approximation");
  report.tests.push_back({"homogeneity", stat, stat >= critical});
  report.passed = stat < critical;
  return report;
}

ExperimentReport check_exchangeability(const RunConfig& cfg, const XiSpec& xi) {
  const std::size_t n = cfg.n;
  const double t = cfg.t;
  auto sampler = [&xi, n, t](Rng& rng) {
    return beta_finite(evolve_rho_direct(xi, DistanceMatrix(n), t, rng));
  };
  std::vector<std::vector<std::size_t>> perms;
  if (n >= 2) {
    std::vector<std::size_t> rotate(n), swap_front(n);
    for (std::size_t i = 0; i < n; ++i) {
      rotate[i] = i + 2 <= n ? i + 2 : 1;
      swap_front[i] = i + 1;
    }
    std::swap(swap_front[0], swap_front[1]);
    perms = {rotate, swap_front};
  }
  ExperimentReport report =
      exchangeability_check(sampler, n, perms, TestFunction::registry(n, true), cfg.reps,
                            cfg.seed);
  report.add_param("t", t);
  return report;
}

ExperimentReport check_dust(const RunConfig& cfg, const XiSpec& xi) {
  if (cfg.n < 2) throw std::invalid_argument("check dust: need at least two levels");
  const double t = cfg.t;
  auto medians_at = [&](std::size_t levels, std::size_t offset) {
    std::vector<double> mins(cfg.reps);
    for_each_replicate(cfg.reps, cfg.threads, [&](std::size_t r) {
      Rng rng = replicate_rng(cfg.seed, offset + r);
      mins[r] = 0.5 * evolve_rho_direct(xi, DistanceMatrix(levels), t, rng).min_off_diagonal();
    });
    return median_of(mins);
  };
  const double m1 = medians_at(cfg.n, 0);
  const double m2 = medians_at(2 * cfg.n, cfg.reps);
  const bool dust_free = is_dust_free(xi);
  // Sanity floor for the dusty branch; the dust-free branch checks decay
  // with the sample size instead.
  const double floor = 0.01;

  ExperimentReport report;
  report.name = "dust";
  report.seed = cfg.seed;
  report.add_param("n", cfg.n);
  report.add_param("t", t);
  report.add_param("reps", cfg.reps);
  report.add_param("dust_free", dust_free ? "true" : "false");
  report.add_param("floor", floor);
  report.estimates.push_back({"min_branch_median_n", m1, 0.0, cfg.reps});
  report.estimates.push_back({"min_branch_median_2n", m2, 0.0, cfg.reps});
  if (dust_free) {
    report.passed = m2 < m1;
    report.tests.push_back({"median_decreases_in_n", m1 - m2, !report.passed});
  } else {
    report.passed = m1 > floor && m2 > floor;
    report.tests.push_back({"medians_above_floor", std::min(m1, m2), !report.passed});
  }
  return report;
}

int run_check(const RunConfig& cfg, const XiSpec& xi, const std::string& header) {
  ExperimentReport report;
  if (cfg.check_name == "rates") {
    report = check_rates(cfg, xi);
  } else if (cfg.check_name == "representation") {
    report = check_representation(cfg, xi);
  } else if (cfg.check_name == "generator") {
    report = check_generator(cfg, xi);
  } else if (cfg.check_name == "equilibrium") {
    report = check_equilibrium(cfg, xi);
  } else if (cfg.check_name == "bridges") {
    report = check_bridges(cfg, xi);
  } else if (cfg.check_name == "exchangeability") {
    report = check_exchangeability(cfg, xi);
  } else {
    report = check_dust(cfg, xi);
  }
  const std::string path =
      write_artifact(cfg.out_dir, "check_" + cfg.check_name + ".txt", header, report.to_text());
  std::cout << report.to_text() << "report: " << path << "\n";
  return report.passed ? 0 : 1;
}

struct CheckDefaults {
  std::size_t n;
  double t;
  std::size_t reps;
};

CheckDefaults defaults_for(const std::string& check_name) {
  if (check_name == "rates") return {3, 2000.0, 0};
  if (check_name == "representation") return {2000, 0.0, 500};
  if (check_name == "generator") return {2, 0.0, 20000};
  if (check_name == "equilibrium") return {2, 1.0, 4000};
  if (check_name == "bridges") return {3, 1.0, 600};
  if (check_name == "exchangeability") return {3, 0.7, 100};
  return {10, 2.0, 201};  // dust
}

}  // namespace

std::string RunConfig::canonical_text() const {
  std::ostringstream os;
  os << "command: " << command << "\n";
  if (!check_name.empty()) os << "check: " << check_name << "\n";
  os << "n: " << n << "\n";
  os << "t: " << format_full(t) << "\n";
  os << "step: " << format_full(step) << "\n";
  os << "reps: " << reps << "\n";
  os << "mode: " << mode << "\n";
  os << "seed: " << seed << "\n";
  return os.str();
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"exchangeable coalescent genealogies: simulation and verification"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_common = [&cfg](CLI::App* sub) {
    sub->add_option("--xi", cfg.xi_path, "measure spec file")->required();
    sub->add_option("--seed", cfg.seed, "root seed; replicates derive from (seed, index)")
        ->required();
    sub->add_option("--out", cfg.out_dir, "output directory (default $COALTREE_OUT, else .)");
    sub->add_option("--threads", cfg.threads, "replicate-level parallelism")
        ->check(CLI::PositiveNumber);
  };

  CLI::App* rates = app.add_subcommand("rates", "print and dump the pattern rate tables");
  add_common(rates);
  rates->add_option("--n", cfg.n, "level horizon (default 3)")->check(CLI::PositiveNumber);

  CLI::App* coalescent =
      app.add_subcommand("coalescent", "dump stationary ultrametric samples with a summary");
  add_common(coalescent);
  coalescent->add_option("--n", cfg.n, "leaves per tree (default 10)")
      ->check(CLI::PositiveNumber);
  coalescent->add_option("--reps", cfg.reps, "tree count (default 100)")
      ->check(CLI::PositiveNumber);

  CLI::App* lookdown = app.add_subcommand("lookdown", "dump one lookdown event stream");
  add_common(lookdown);
  lookdown->add_option("--n", cfg.n, "level horizon (default 5)")->check(CLI::PositiveNumber);
  lookdown->add_option("--t", cfg.t, "time horizon (default 5)")
      ->check(CLI::NonNegativeNumber);
  lookdown->add_option("--mode", cfg.mode, "visibility mode (default rho)")
      ->check(CLI::IsMember({"rho", "rv"}));

  CLI::App* bridges = app.add_subcommand("bridges", "dump one sampled bridge flow");
  add_common(bridges);
  bridges->add_option("--horizon", cfg.t, "flow horizon (default 2)")
      ->check(CLI::NonNegativeNumber);

  CLI::App* check = app.add_subcommand("check", "run a named verification experiment");
  add_common(check);
  check
      ->add_option("name", cfg.check_name, "experiment name")
      ->required()
      ->check(CLI::IsMember({"rates", "representation", "generator", "equilibrium", "bridges",
                             "exchangeability", "dust"}));
  check->add_option("--n", cfg.n, "size knob; default depends on the experiment")
      ->check(CLI::PositiveNumber);
  check->add_option("--t", cfg.t, "time knob; default depends on the experiment")
      ->check(CLI::NonNegativeNumber);
  check->add_option("--reps", cfg.reps, "replicates; default depends on the experiment")
      ->check(CLI::PositiveNumber);
  check->add_option("--step", cfg.step, "finite-difference step (default 0.01)")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (rates->parsed()) {
      cfg.command = "rates";
      if (rates->count("--n") == 0) cfg.n = 3;
    } else if (coalescent->parsed()) {
      cfg.command = "coalescent";
      if (coalescent->count("--n") == 0) cfg.n = 10;
      if (coalescent->count("--reps") == 0) cfg.reps = 100;
    } else if (lookdown->parsed()) {
      cfg.command = "lookdown";
      if (lookdown->count("--n") == 0) cfg.n = 5;
      if (lookdown->count("--t") == 0) cfg.t = 5.0;
    } else if (bridges->parsed()) {
      cfg.command = "bridges";
      if (bridges->count("--horizon") == 0) cfg.t = 2.0;
    } else {
      cfg.command = "check";
      const CheckDefaults d = defaults_for(cfg.check_name);
      if (check->count("--n") == 0) cfg.n = d.n;
      if (check->count("--t") == 0) cfg.t = d.t;
      if (check->count("--reps") == 0) cfg.reps = d.reps;
    }
    cfg.out_dir = resolve_out_dir(cfg.out_dir);

    const XiSpec xi = load_spec(cfg.xi_path);
    std::ostringstream canonical;
    xi.save(canonical);
    canonical << cfg.canonical_text();
    const std::string header = "# coaltree " + std::string(kVersion) + ", config_hash " +
                               hex16(fnv1a64(canonical.str())) + ", seed " +
                               std::to_string(cfg.seed) + "\n";

    if (cfg.command == "rates") return run_rates(cfg, xi, header);
    if (cfg.command == "coalescent") return run_coalescent(cfg, xi, header);
    if (cfg.command == "lookdown") return run_lookdown(cfg, xi, header);
    if (cfg.command == "bridges") return run_bridges(cfg, xi, header);
    return run_check(cfg, xi, header);
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace coaltree
