#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlmp/diagnostics.hpp"
#include "dlmp/problem.hpp"
#include "dlmp/sampling.hpp"

namespace dlmp {

enum class MetricKind {
  Surrogate,  // (1/tau + max Lambda / p_i + sigma |A_i|^2) I on every block
  Exact,      // (1/tau) I + Lambda / p_i + sigma A_i^T A_i on every block
  ExactDso,   // exact on block 0, surrogate elsewhere
};

MetricKind parse_metric_kind(const std::string& name);
std::string to_string(MetricKind kind);

struct StepSizes {
  double sigma = 1.0;
  std::vector<double> tau;
  std::vector<Metric> T;          // T_i; block i is updated with metric T_i / p_i
  std::vector<Metric> diagonal;   // diagonal surrogate of each T_i (KKT measurements)
  bool valid = false;
  double margin = 0.0;            // lambda_min(diag[(I/tau + sigma A_i^T A_i)/p_i] - sigma Sigma)
  double lambda_margin = 0.0;     // lambda_min(P T - Lambda - sigma Sigma)
};

StepSizes stepsize_matrices(const BlockProblem& problem, const std::vector<Vec>& lambda, double sigma,
                            const std::vector<double>& tau, const SamplingScheme& sampling,
                            MetricKind kind = MetricKind::Surrogate);

/// Largest uniform tau for which the step-size condition holds (infinity when it always does).
double critical_tau(const BlockProblem& problem, double sigma, const SamplingScheme& sampling);

/// Uniform tau = (1 - margin) * critical_tau, capped at tau_cap.
std::vector<double> auto_tau(const BlockProblem& problem, double sigma, const SamplingScheme& sampling,
                             double margin = 0.05, double tau_cap = 1e3);

/// Inner tolerance eps_k = max(floor, base / (k+1)^2).
struct InnerTolerance {
  double base = 1e-4;
  double floor = 1e-10;
  double at(int k) const;
};

class ProxFailure : public std::runtime_error {
 public:
  ProxFailure(int iteration, int block, double residual);
  int iteration;
  int block;
  double residual;
};

struct SolverOptions {
  int iterations = 2000;
  std::uint64_t seed = 1;
  InnerTolerance inner;
  bool strict_inner = false;   // throw ProxFailure when an inner solve misses its tolerance
  bool allow_invalid = false;  // run even when the step-size condition fails
  int kkt_interval = 0;        // 0 disables KKT measurements
  int snapshot_interval = 0;   // 0 keeps only the final dual
  int drift_window = 50;
  double kkt_target = 0.0;     // stop at the first KKT measurement at or below this value
  bool keep_history = false;   // store x^k and y^k for every k
};

struct SolverResult {
  BlockVec x;
  BlockVec mean;  // running mean s^k
  Vec y;
  Vec z;
  int iterations = 0;
  double last_kkt = std::numeric_limits<double>::quiet_NaN();
  int inner_misses = 0;
  ConvergenceTrace trace;
  std::vector<BlockVec> x_history;
  std::vector<Vec> y_history;
};

/// Randomized block-coordinate primal-dual method in dual form.
SolverResult run(const BlockProblem& problem, const SamplingScheme& sampling, const StepSizes& steps,
                 const SolverOptions& options);

/// The same method written on the primal sequences (Z, S) with theta_k = 1/(k+1); `y` of the
/// result is the implied dual (sigma / theta_K)(A Z^K - b).
SolverResult run_primal_form(const BlockProblem& problem, const SamplingScheme& sampling, const StepSizes& steps,
                             const SolverOptions& options);

/// |E_I h(x + U_I P t) - h(x) - <grad h(x), t> - 0.5 |t|_Sigma^2| by enumeration of the subsets.
double eso_check(const BlockProblem& problem, const SamplingScheme& sampling, const BlockVec& x, const BlockVec& t);

/// gamma[k][l] for k = 0..K and l = 0..k, each entry the per-block diagonal of a diagonal matrix.
/// Row 0 is the identity on x^0.
using GammaTable = std::vector<std::vector<Vec>>;
GammaTable gamma_coefficients(int K, const SamplingScheme& sampling);
/// max over rows and blocks of |sum_l gamma[k][l] - 1|, accumulated in extended precision.
double gamma_row_sum_error(const GammaTable& table);

}  // namespace dlmp
