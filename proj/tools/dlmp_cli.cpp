// dlmp: DLMP benchmark driver.
//
//   dlmp run [scenario.json] [--instance F] [--iters K] [--seed S] [--sigma X] [--sampling NAME] [--out DIR]
//   dlmp oracle --instance F [--tol T] [--out DIR]
//   dlmp check ACTUAL.csv EXPECTED.csv [--tol T]
//   dlmp validate INSTANCE.json
//
// Log verbosity: DLMP_LOG_LEVEL=trace|debug|info|warn|error|off (default info).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "dlmp/benchmark.hpp"
#include "dlmp/diagnostics.hpp"

namespace {

void setup_logging() {
  if (const char* lvl = std::getenv("DLMP_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(lvl));
  spdlog::set_pattern("[%l] %v");
}

void print_comparisons(const std::vector<dlmp::Comparison>& rows) {
  for (const auto& c : rows)
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.label << ": expected " << c.expected << ", got " << c.actual
              << " (tol " << c.tolerance << ")\n";
}

int cmd_run(const std::string& scenario_path, const CLI::App& sub, const std::string& instance, int iters,
            std::uint64_t seed, double sigma, const std::string& sampling, const std::string& out,
            const std::string& metric) {
  dlmp::Scenario s = scenario_path.empty() ? dlmp::Scenario{} : dlmp::load_scenario_file(scenario_path);
  if (sub.count("--instance")) s.instance = instance;
  if (sub.count("--iters")) s.iterations = iters;
  if (sub.count("--seed")) s.seed = seed;
  if (sub.count("--sigma")) s.sigma = sigma;
  if (sub.count("--sampling")) s.sampling = sampling;
  if (sub.count("--out")) s.out = out;
  if (sub.count("--metric")) s.metric = metric;
  spdlog::info("running {} on {} for {} iterations (seed {})", s.sampling, s.instance, s.iterations, s.seed);
  const auto rep = dlmp::run_benchmark(s);
  print_comparisons(rep.comparisons);
  if (!rep.audit_passed)
    for (const auto& v : rep.audit_violations) std::cout << "AUDIT " << v << '\n';
  spdlog::info("oracle KKT {:.3g}, deviation from oracle {:.3g}", rep.oracle_kkt, rep.oracle_deviation);
  for (const auto& a : rep.artifacts) spdlog::debug("wrote {}", a);
  std::cout << (rep.status == 0 ? "OK" : "FAILED") << '\n';
  return rep.status;
}

int cmd_oracle(const std::string& instance, double tol, const std::string& out) {
  const auto model = dlmp::assemble(dlmp::load_instance_file(instance));
  const auto problem = dlmp::build_block_problem(model);
  dlmp::OracleOptions oo;
  oo.tolerance = tol;
  const auto res = dlmp::reference_solve(problem, dlmp::smoothness_matrix(problem), oo);
  spdlog::info("oracle: {} iterations, KKT {:.3g}, {:.2f} s", res.iterations, res.kkt, res.seconds);
  const auto rows = dlmp::dlmp_table(model, res.y, &res.x[0]);
  if (out.empty()) {
    dlmp::write_dlmp_csv(std::cout, rows);
  } else {
    std::filesystem::create_directories(out);
    std::ofstream f(std::filesystem::path(out) / "oracle_dlmp.csv");
    dlmp::write_dlmp_csv(f, rows);
  }
  for (const auto& l : dlmp::line_loading(model, res.x[0]))
    if (l.headroom() <= 1e-3)
      spdlog::info("line ({},{}) t={} at its limit {:.3f}", l.parent, l.bus, l.t, l.limit);
  spdlog::info("max cone gap {:.3g}", dlmp::max_cone_gap(model.dso, res.x[0]));
  return res.converged ? 0 : 1;
}

int cmd_check(const std::string& actual, const std::string& expected, double tol) {
  std::ifstream a(actual), e(expected);
  if (!a || !e) {
    spdlog::error("cannot open {}", !a ? actual : expected);
    return 2;
  }
  const auto rows = dlmp::compare_tables(dlmp::read_dlmp_csv(a), dlmp::read_dlmp_csv(e), tol);
  print_comparisons(rows);
  for (const auto& r : rows)
    if (!r.passed) return 1;
  return 0;
}

int cmd_validate(const std::string& instance) {
  const auto inst = dlmp::load_instance_file(instance);
  const auto model = dlmp::assemble(inst);
  std::cout << inst.name << ": " << model.topology.size() << " buses, T=" << inst.horizon << ", "
            << model.partition.size() << " aggregators, " << model.coupling.rows() << " coupling rows\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"DLMP computation by randomized block primal-dual iterations"};
  app.require_subcommand(1);

  std::string scenario, instance, sampling, out, metric;
  int iters = 0;
  std::uint64_t seed = 0;
  double sigma = 0.0;
  auto* run = app.add_subcommand("run", "run a scenario");
  run->add_option("scenario", scenario, "scenario JSON file")->check(CLI::ExistingFile);
  run->add_option("--instance", instance, "instance JSON file");
  run->add_option("--iters", iters, "iterations K")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "random seed");
  run->add_option("--sigma", sigma, "dual step sigma")->check(CLI::PositiveNumber);
  run->add_option("--sampling", sampling, "ppdlmp, full or uniform");
  run->add_option("--out", out, "output directory");
  run->add_option("--metric", metric, "surrogate, exact or exact-dso");

  std::string oracle_instance, oracle_out;
  double oracle_tol = 1e-7;
  auto* oracle = app.add_subcommand("oracle", "reference full-sampling solve");
  oracle->add_option("--instance", oracle_instance, "instance JSON file")->required();
  oracle->add_option("--tol", oracle_tol, "KKT tolerance")->check(CLI::PositiveNumber);
  oracle->add_option("--out", oracle_out, "output directory (stdout when absent)");

  std::string actual, expected;
  double check_tol = 1e-2;
  auto* check = app.add_subcommand("check", "compare two DLMP CSV files");
  check->add_option("actual", actual)->required();
  check->add_option("expected", expected)->required();
  check->add_option("--tol", check_tol, "absolute tolerance")->check(CLI::PositiveNumber);

  std::string validate_instance;
  auto* validate = app.add_subcommand("validate", "lint an instance file");
  validate->add_option("instance", validate_instance)->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(scenario, *run, instance, iters, seed, sigma, sampling, out, metric);
    if (*oracle) return cmd_oracle(oracle_instance, oracle_tol, oracle_out);
    if (*check) return cmd_check(actual, expected, check_tol);
    if (*validate) return cmd_validate(validate_instance);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
