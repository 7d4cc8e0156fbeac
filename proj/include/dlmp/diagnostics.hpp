#pragma once

#include <iosfwd>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "dlmp/opf_assembly.hpp"
#include "dlmp/problem.hpp"

namespace dlmp {

struct TraceRecord {
  int k = 0;
  double cost = 0.0;
  double h_last = 0.0;     // 0.5 |A x^k - b|^2
  double h_erg = 0.0;      // 0.5 |A s^k - b|^2 for the running mean s^k
  double resid_inf = 0.0;  // |A x^k - b|_inf
  double kkt = std::numeric_limits<double>::quiet_NaN();
  double dlmp_drift = std::numeric_limits<double>::quiet_NaN();  // |y^k - y^{k-w}|_inf
};

struct ConvergenceTrace {
  std::vector<TraceRecord> records;
  std::vector<std::pair<int, Vec>> dual_snapshots;

  /// Header: k,cost,h_last,h_erg,resid_inf,kkt,dlmp_drift. Missing values are empty cells.
  void write_csv(std::ostream& out) const;
};

/// Prox-residual KKT measure with private prox clones so the caller's warm starts stay intact.
class KktEvaluator {
 public:
  KktEvaluator(const BlockProblem& problem, std::vector<Metric> metrics, double inner_tolerance = 1e-10);

  double operator()(const BlockVec& x, const Vec& y);

 private:
  const BlockProblem* problem_;
  std::vector<Metric> metrics_;
  std::vector<std::unique_ptr<BlockProx>> prox_;
  double tol_;
};

/// Fills a ConvergenceTrace one iteration at a time.
class TraceRecorder {
 public:
  TraceRecorder(const BlockProblem& problem, const std::vector<Metric>& kkt_metrics, int kkt_interval,
                int snapshot_interval, int drift_window, double kkt_inner_tolerance = 1e-10);

  /// Appends the record of iteration k; returns the KKT residual when it was measured, NaN otherwise.
  double record(int k, const BlockVec& x, const BlockVec& mean, const Vec& y, bool final = false);
  ConvergenceTrace& trace() { return trace_; }

 private:
  const BlockProblem* problem_;
  std::unique_ptr<KktEvaluator> kkt_;
  int kkt_interval_;
  int snapshot_interval_;
  int window_;
  std::vector<Vec> recent_;  // ring buffer of the last window+1 duals
  ConvergenceTrace trace_;
};

/// max(|x - prox_D(x, grad phi + A^T y)|_inf, |Ax - b|_inf).
double kkt_residual(const BlockProblem& problem, const BlockVec& x, const Vec& y, const std::vector<Metric>& metrics,
                    double inner_tolerance = 1e-10);

/// v l - (f^2 + g^2) for every (bus, period), bus-major.
std::vector<double> cone_tightness(const DsoLayout& layout, const Vec& x0);
double max_cone_gap(const DsoLayout& layout, const Vec& x0);

/// Ordinary least-squares slope of log(values) against log(ks).
double loglog_slope(const std::vector<double>& ks, const std::vector<double>& values);

struct RateFit {
  double last = 0.0;
  double ergodic = 0.0;
  int points = 0;
};

/// Slopes of log h(x^k) and log h(s^k) against log k over k in [k_min, k_max].
RateFit rate_fit(const ConvergenceTrace& trace, int k_min, int k_max);

/// max_k h(s^k) - (1/k) sum_{j=1..k} h(x^j); non-positive when the running mean is exact.
double ergodic_excess(const ConvergenceTrace& trace);

}  // namespace dlmp
