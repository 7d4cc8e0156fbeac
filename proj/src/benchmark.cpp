#include "dlmp/benchmark.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "dlmp/diagnostics.hpp"
#include "dlmp/ppdlmp.hpp"

namespace dlmp {

namespace fs = std::filesystem;
using nlohmann::json;

OracleResult reference_solve(const BlockProblem& problem, const std::vector<Vec>& lambda,
                             const OracleOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const auto sampling = make_sampling("full", problem.num_blocks());
  const auto tau = auto_tau(problem, options.sigma, sampling);
  const auto steps = stepsize_matrices(problem, lambda, options.sigma, tau, sampling, options.metric);
  SolverOptions so;
  so.iterations = options.max_iterations;
  so.kkt_interval = options.check_interval;
  so.kkt_target = options.tolerance;
  so.inner = {1e-4, std::min(1e-10, 1e-2 * options.tolerance)};
  auto res = run(problem, sampling, steps, so);
  OracleResult out;
  out.x = std::move(res.x);
  out.y = std::move(res.y);
  out.kkt = res.last_kkt;
  out.iterations = res.iterations;
  out.converged = res.last_kkt <= options.tolerance;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<DlmpRow> dlmp_table(const OpfModel& model, const Vec& y, const Vec* x0) {
  const auto& cs = model.coupling;
  if (y.size() != cs.rows()) throw std::invalid_argument("DLMP table: dual has the wrong dimension");
  std::vector<DlmpRow> rows;
  if (x0) {
    for (int t = 0; t < cs.horizon; ++t) {
      const auto& c = model.instance.cost[static_cast<size_t>(t)];
      const double gen = -(*x0)[model.dso.p0(t)];
      rows.push_back({model.topology.root_id, t, c.linear + 2.0 * c.quadratic * gen, 0.0});
    }
  }
  for (int k = 0; k < cs.buses; ++k)
    for (int t = 0; t < cs.horizon; ++t)
      rows.push_back({model.topology.bus_ids[static_cast<size_t>(k)], t, y[cs.active_row(k, t)],
                      y[cs.reactive_row(k, t)]});
  return rows;
}

void write_dlmp_csv(std::ostream& out, const std::vector<DlmpRow>& rows) {
  out << "bus,t,y_p,y_q\n";
  out << std::setprecision(12);
  for (const auto& r : rows) out << r.bus << ',' << r.t << ',' << r.y_p << ',' << r.y_q << '\n';
}

std::vector<DlmpRow> read_dlmp_csv(std::istream& in) {
  std::vector<DlmpRow> rows;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    if (n == 1 && line.rfind("bus", 0) == 0) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4) throw std::runtime_error("DLMP CSV line " + std::to_string(n) + ": expected 4 columns");
    try {
      rows.push_back({std::stoi(cells[0]), std::stoi(cells[1]), std::stod(cells[2]), std::stod(cells[3])});
    } catch (const std::exception&) {
      throw std::runtime_error("DLMP CSV line " + std::to_string(n) + ": malformed number");
    }
  }
  return rows;
}

std::vector<LineLoading> line_loading(const OpfModel& model, const Vec& x0) {
  std::vector<LineLoading> out;
  const auto& d = model.dso;
  for (int k = 0; k < d.buses; ++k) {
    const int id = model.topology.bus_ids[static_cast<size_t>(k)];
    const Bus& b = model.instance.bus(id);
    for (int t = 0; t < d.horizon; ++t) {
      const double f = x0[d.f(k, t)], g = x0[d.g(k, t)], l = x0[d.l(k, t)];
      out.push_back({id, *b.parent, t, std::hypot(f, g), std::hypot(f - b.r * l, g - b.x * l), b.s_max});
    }
  }
  return out;
}

namespace {

std::string target_label(const std::string& prefix, int bus, int t, char component) {
  return prefix + "bus " + std::to_string(bus) + " t=" + std::to_string(t) + (component == 'p' ? " active" : " reactive");
}

const DlmpRow* find_row(const std::vector<DlmpRow>& rows, int bus, int t) {
  for (const auto& r : rows)
    if (r.bus == bus && r.t == t) return &r;
  return nullptr;
}

}  // namespace

std::vector<Comparison> compare_targets(const std::vector<DlmpRow>& rows, const std::vector<Target>& targets,
                                        const std::string& prefix) {
  std::vector<Comparison> out;
  for (const auto& tg : targets) {
    Comparison c;
    c.label = target_label(prefix, tg.bus, tg.t, tg.component);
    c.expected = tg.expected;
    c.tolerance = tg.tolerance;
    if (const auto* r = find_row(rows, tg.bus, tg.t)) {
      c.actual = tg.component == 'p' ? r->y_p : r->y_q;
      c.passed = std::abs(c.actual - c.expected) <= c.tolerance;
    } else {
      c.actual = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(c);
  }
  return out;
}

std::vector<Comparison> compare_tables(const std::vector<DlmpRow>& actual, const std::vector<DlmpRow>& expected,
                                       double tolerance) {
  std::vector<Comparison> out;
  for (const auto& e : expected) {
    const auto* a = find_row(actual, e.bus, e.t);
    for (char comp : {'p', 'q'}) {
      Comparison c;
      c.label = target_label("", e.bus, e.t, comp);
      c.expected = comp == 'p' ? e.y_p : e.y_q;
      c.tolerance = tolerance;
      c.actual = a ? (comp == 'p' ? a->y_p : a->y_q) : std::numeric_limits<double>::quiet_NaN();
      c.passed = a && std::abs(c.actual - c.expected) <= tolerance;
      out.push_back(c);
    }
  }
  return out;
}

Scenario parse_scenario(const std::string& json_text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scenario: ") + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("scenario: top level must be an object");
  Scenario s;
  try {
    s.instance = doc.value("instance", s.instance);
    s.sigma = doc.value("sigma", s.sigma);
    if (doc.contains("tau")) {
      const auto& t = doc.at("tau");
      if (t.is_number())
        s.tau = t.get<double>();
      else if (!(t.is_string() && t.get<std::string>() == "auto"))
        throw std::invalid_argument("scenario: 'tau' must be a number or \"auto\"");
    }
    s.metric = doc.value("metric", s.metric);
    s.iterations = doc.value("iterations", s.iterations);
    s.seed = doc.value("seed", s.seed);
    s.sampling = doc.value("sampling", s.sampling);
    s.out = doc.value("out", s.out);
    s.oracle_tolerance = doc.value("oracle_tolerance", s.oracle_tolerance);
    s.oracle_gate = doc.value("oracle_gate", s.oracle_gate);
    s.kkt_interval = doc.value("kkt_interval", s.kkt_interval);
    s.payloads = doc.value("payloads", s.payloads);
    const double default_tol = doc.value("target_tolerance", 0.05);
    if (doc.contains("targets")) {
      for (const auto& jt : doc.at("targets")) {
        const int bus = jt.at("bus").get<int>();
        const int t = jt.at("t").get<int>();
        const double tol = jt.value("tolerance", default_tol);
        if (jt.contains("p")) s.targets.push_back({bus, t, 'p', jt.at("p").get<double>(), tol});
        if (jt.contains("q")) s.targets.push_back({bus, t, 'q', jt.at("q").get<double>(), tol});
      }
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scenario: ") + e.what());
  }
  if (!base_dir.empty() && fs::path(s.instance).is_relative()) s.instance = (fs::path(base_dir) / s.instance).string();
  validate_scenario(s);
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), fs::path(path).parent_path().string());
}

void validate_scenario(const Scenario& s) {
  if (s.iterations < 1) throw std::invalid_argument("scenario: iterations must be at least 1");
  if (!(s.sigma > 0.0)) throw std::invalid_argument("scenario: sigma must be positive");
  if (s.tau && !(*s.tau > 0.0)) throw std::invalid_argument("scenario: tau must be positive");
  if (!(s.oracle_tolerance > 0.0) || !(s.oracle_gate > 0.0))
    throw std::invalid_argument("scenario: tolerances must be positive");
  for (const auto& t : s.targets)
    if (!(t.tolerance > 0.0)) throw std::invalid_argument("scenario: target tolerances must be positive");
  parse_metric_kind(s.metric);
  if (s.sampling != "ppdlmp" && s.sampling != "full" && s.sampling != "uniform")
    throw std::invalid_argument("scenario: unknown sampling '" + s.sampling + "'");
}

namespace {

json comparison_json(const Comparison& c) {
  return {{"label", c.label}, {"expected", c.expected}, {"actual", c.actual}, {"tolerance", c.tolerance},
          {"passed", c.passed}};
}

}  // namespace

BenchmarkReport run_benchmark(const Scenario& scenario) {
  validate_scenario(scenario);
  BenchmarkReport rep;
  const auto model = assemble(load_instance_file(scenario.instance));
  const auto problem = build_block_problem(model);
  const auto lambda = smoothness_matrix(problem);
  const auto sampling = make_sampling(scenario.sampling, problem.num_blocks());
  const auto tau = scenario.tau ? std::vector<double>(static_cast<size_t>(problem.num_blocks()), *scenario.tau)
                                : auto_tau(problem, scenario.sigma, sampling);
  const auto steps =
      stepsize_matrices(problem, lambda, scenario.sigma, tau, sampling, parse_metric_kind(scenario.metric));

  fs::create_directories(scenario.out);
  const fs::path dir(scenario.out);
  auto artifact = [&](const std::string& name) {
    rep.artifacts.push_back((dir / name).string());
    return std::ofstream(dir / name);
  };

  BlockVec x;
  Vec y;
  ConvergenceTrace trace;
  if (scenario.sampling == "ppdlmp") {
    SimulationOptions so;
    so.iterations = scenario.iterations;
    so.seed = scenario.seed;
    so.kkt_interval = scenario.kkt_interval;
    so.snapshot_interval = scenario.kkt_interval;
    auto sim = simulate(problem, steps, so);
    std::vector<std::string> names;
    for (int a = 1; a < problem.num_blocks(); ++a) names.push_back(problem.blocks[static_cast<size_t>(a)].name);
    const auto audit = privacy_audit(sim.log, problem.rows(), names);
    rep.audit_passed = audit.passed;
    rep.audit_violations = audit.violations;
    auto log_out = artifact("messages.jsonl");
    sim.log.write_jsonl(log_out, scenario.payloads);
    x = std::move(sim.x);
    y = std::move(sim.y);
    trace = std::move(sim.trace);
  } else {
    SolverOptions so;
    so.iterations = scenario.iterations;
    so.seed = scenario.seed;
    so.kkt_interval = scenario.kkt_interval;
    so.snapshot_interval = scenario.kkt_interval;
    auto res = run(problem, sampling, steps, so);
    x = std::move(res.x);
    y = std::move(res.y);
    trace = std::move(res.trace);
  }
  {
    auto out = artifact("trace.csv");
    trace.write_csv(out);
  }
  const auto rows = dlmp_table(model, y, &x[0]);
  {
    auto out = artifact("dlmp.csv");
    write_dlmp_csv(out, rows);
  }

  OracleOptions oo;
  oo.tolerance = scenario.oracle_tolerance;
  const auto oracle = reference_solve(problem, lambda, oo);
  rep.oracle_kkt = oracle.kkt;
  {
    auto out = artifact("oracle_dlmp.csv");
    write_dlmp_csv(out, dlmp_table(model, oracle.y, &oracle.x[0]));
  }
  rep.oracle_deviation = (y - oracle.y).lpNorm<Eigen::Infinity>();

  rep.comparisons = compare_targets(rows, scenario.targets, "");
  rep.comparisons.push_back({"oracle dual deviation (inf-norm)", 0.0, rep.oracle_deviation, scenario.oracle_gate,
                             rep.oracle_deviation <= scenario.oracle_gate});
  bool ok = rep.audit_passed;
  for (const auto& c : rep.comparisons) ok = ok && c.passed;
  rep.status = ok ? 0 : 1;

  json doc;
  doc["instance"] = scenario.instance;
  doc["sampling"] = scenario.sampling;
  doc["iterations"] = scenario.iterations;
  doc["seed"] = scenario.seed;
  doc["sigma"] = steps.sigma;
  doc["tau"] = steps.tau.front();
  doc["step_margin"] = steps.margin;
  doc["oracle"] = {{"kkt", oracle.kkt}, {"iterations", oracle.iterations}, {"converged", oracle.converged}};
  doc["oracle_deviation"] = rep.oracle_deviation;
  doc["audit"] = {{"passed", rep.audit_passed}, {"violations", rep.audit_violations}};
  doc["comparisons"] = json::array();
  for (const auto& c : rep.comparisons) doc["comparisons"].push_back(comparison_json(c));
  doc["status"] = rep.status;
  auto out = artifact("report.json");
  out << std::setw(1) << doc << '\n';
  return rep;
}

}  // namespace dlmp
