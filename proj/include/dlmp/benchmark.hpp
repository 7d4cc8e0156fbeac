#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dlmp/opf_assembly.hpp"
#include "dlmp/pd_solver.hpp"

namespace dlmp {

struct OracleOptions {
  double tolerance = 1e-7;
  double sigma = 1.0;
  MetricKind metric = MetricKind::Surrogate;
  int max_iterations = 400000;
  int check_interval = 50;
};

struct OracleResult {
  BlockVec x;
  Vec y;
  double kkt = 0.0;
  int iterations = 0;
  bool converged = false;
  double seconds = 0.0;
};

/// Deterministic full-sampling primal-dual solve, stopped once the KKT residual reaches the tolerance.
OracleResult reference_solve(const BlockProblem& problem, const std::vector<Vec>& lambda,
                             const OracleOptions& options = {});

struct DlmpRow {
  int bus = 0;
  int t = 0;
  double y_p = 0.0;
  double y_q = 0.0;
};

/// One row per (bus, t) in bus order. With `x0` the root rows are prepended, priced at the
/// marginal generation cost c_t'(-p0_t) (reactive price 0, q0 being free).
std::vector<DlmpRow> dlmp_table(const OpfModel& model, const Vec& y, const Vec* x0 = nullptr);
void write_dlmp_csv(std::ostream& out, const std::vector<DlmpRow>& rows);
std::vector<DlmpRow> read_dlmp_csv(std::istream& in);

struct LineLoading {
  int bus = 0;
  int parent = 0;
  int t = 0;
  double sending = 0.0;    // |(f, g)|
  double receiving = 0.0;  // |(f - R l, g - X l)|
  double limit = 0.0;
  double headroom() const { return limit - std::max(sending, receiving); }
};

std::vector<LineLoading> line_loading(const OpfModel& model, const Vec& x0);

struct Target {
  int bus = 0;
  int t = 0;
  char component = 'p';  // 'p' active, 'q' reactive
  double expected = 0.0;
  double tolerance = 0.05;
};

struct Comparison {
  std::string label;
  double expected = 0.0;
  double actual = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

std::vector<Comparison> compare_targets(const std::vector<DlmpRow>& rows, const std::vector<Target>& targets,
                                        const std::string& prefix);
/// Row-by-row comparison of two DLMP tables; a missing row fails.
std::vector<Comparison> compare_tables(const std::vector<DlmpRow>& actual, const std::vector<DlmpRow>& expected,
                                       double tolerance);

struct Scenario {
  std::string instance = "bus15.json";
  double sigma = 1.0;
  std::optional<double> tau;  // empty: automatic
  std::string metric = "surrogate";
  int iterations = 2000;
  std::uint64_t seed = 1;
  std::string sampling = "ppdlmp";
  std::string out = "out";
  double oracle_tolerance = 1e-7;
  double oracle_gate = 1e-2;
  int kkt_interval = 50;
  bool payloads = false;  // include payload vectors in the message log
  std::vector<Target> targets;
};

/// Relative `instance` paths are resolved against `base_dir`.
Scenario parse_scenario(const std::string& json_text, const std::string& base_dir = "");
Scenario load_scenario_file(const std::string& path);
void validate_scenario(const Scenario& scenario);

struct BenchmarkReport {
  int status = 0;
  std::vector<Comparison> comparisons;
  double oracle_deviation = 0.0;
  double oracle_kkt = 0.0;
  bool audit_passed = true;
  std::vector<std::string> audit_violations;
  std::vector<std::string> artifacts;
};

/// Runs the scenario, writes trace.csv, dlmp.csv, oracle_dlmp.csv, messages.jsonl (agent runs)
/// and report.json into the output directory; status is 1 when any comparison fails.
BenchmarkReport run_benchmark(const Scenario& scenario);

}  // namespace dlmp
