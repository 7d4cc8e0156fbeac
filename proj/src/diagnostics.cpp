#include "dlmp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace dlmp {

namespace {

void cell(std::ostream& out, double v) {
  if (!std::isnan(v)) out << v;
}

}  // namespace

void ConvergenceTrace::write_csv(std::ostream& out) const {
  out << "k,cost,h_last,h_erg,resid_inf,kkt,dlmp_drift\n";
  out.precision(12);
  for (const auto& r : records) {
    out << r.k << ',';
    cell(out, r.cost);
    out << ',';
    cell(out, r.h_last);
    out << ',';
    cell(out, r.h_erg);
    out << ',';
    cell(out, r.resid_inf);
    out << ',';
    cell(out, r.kkt);
    out << ',';
    cell(out, r.dlmp_drift);
    out << '\n';
  }
}

KktEvaluator::KktEvaluator(const BlockProblem& problem, std::vector<Metric> metrics, double inner_tolerance)
    : problem_(&problem), metrics_(std::move(metrics)), tol_(inner_tolerance) {
  if (metrics_.size() != problem.blocks.size()) throw std::invalid_argument("KKT: one metric per block required");
  for (const auto& b : problem.blocks) prox_.push_back(b.prox->clone());
}

double KktEvaluator::operator()(const BlockVec& x, const Vec& y) {
  double r = problem_->residual(x).lpNorm<Eigen::Infinity>();
  for (size_t i = 0; i < problem_->blocks.size(); ++i) {
    const auto& blk = problem_->blocks[i];
    const Vec g = blk.cost->gradient(x[i]) + blk.A.transpose() * y;
    const Vec next = prox_[i]->solve(x[i], g, metrics_[i], tol_).x;
    r = std::max(r, (x[i] - next).lpNorm<Eigen::Infinity>());
  }
  return r;
}

double kkt_residual(const BlockProblem& problem, const BlockVec& x, const Vec& y, const std::vector<Metric>& metrics,
                    double inner_tolerance) {
  KktEvaluator eval(problem, metrics, inner_tolerance);
  return eval(x, y);
}

TraceRecorder::TraceRecorder(const BlockProblem& problem, const std::vector<Metric>& kkt_metrics, int kkt_interval,
                             int snapshot_interval, int drift_window, double kkt_inner_tolerance)
    : problem_(&problem),
      kkt_interval_(kkt_interval),
      snapshot_interval_(snapshot_interval),
      window_(std::max(drift_window, 1)),
      recent_(static_cast<size_t>(window_ + 1)) {
  if (kkt_interval_ > 0) kkt_ = std::make_unique<KktEvaluator>(problem, kkt_metrics, kkt_inner_tolerance);
}

double TraceRecorder::record(int k, const BlockVec& x, const BlockVec& mean, const Vec& y, bool final) {
  TraceRecord r;
  r.k = k;
  r.cost = problem_->cost(x);
  const Vec res = problem_->residual(x);
  r.h_last = 0.5 * res.squaredNorm();
  r.resid_inf = res.lpNorm<Eigen::Infinity>();
  r.h_erg = problem_->feasibility(mean);
  if (kkt_ && (k % kkt_interval_ == 0 || final)) r.kkt = (*kkt_)(x, y);
  recent_[static_cast<size_t>(k % (window_ + 1))] = y;
  if (k >= window_)
    r.dlmp_drift = (y - recent_[static_cast<size_t>((k - window_) % (window_ + 1))]).lpNorm<Eigen::Infinity>();
  if ((snapshot_interval_ > 0 && k % snapshot_interval_ == 0) || final) trace_.dual_snapshots.emplace_back(k, y);
  trace_.records.push_back(r);
  return r.kkt;
}

std::vector<double> cone_tightness(const DsoLayout& layout, const Vec& x0) {
  std::vector<double> gaps;
  for (int k = 0; k < layout.buses; ++k)
    for (int t = 0; t < layout.horizon; ++t) {
      const double f = x0[layout.f(k, t)], g = x0[layout.g(k, t)];
      gaps.push_back(x0[layout.v(k, t)] * x0[layout.l(k, t)] - (f * f + g * g));
    }
  return gaps;
}

double max_cone_gap(const DsoLayout& layout, const Vec& x0) {
  const auto gaps = cone_tightness(layout, x0);
  double m = 0.0;
  for (double g : gaps) m = std::max(m, g);
  return m;
}

double loglog_slope(const std::vector<double>& ks, const std::vector<double>& values) {
  if (ks.size() != values.size() || ks.size() < 2) throw std::invalid_argument("rate fit: need at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(ks.size());
  for (size_t i = 0; i < ks.size(); ++i) {
    if (!(ks[i] > 0.0) || !(values[i] > 0.0)) throw std::invalid_argument("rate fit: non-positive sample");
    const double lx = std::log(ks[i]), ly = std::log(values[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (den <= 0.0) throw std::invalid_argument("rate fit: degenerate window");
  return (n * sxy - sx * sy) / den;
}

RateFit rate_fit(const ConvergenceTrace& trace, int k_min, int k_max) {
  std::vector<double> ks, last, erg;
  for (const auto& r : trace.records)
    if (r.k >= k_min && r.k <= k_max) {
      ks.push_back(r.k);
      last.push_back(r.h_last);
      erg.push_back(r.h_erg);
    }
  RateFit fit;
  fit.points = static_cast<int>(ks.size());
  fit.last = loglog_slope(ks, last);
  fit.ergodic = loglog_slope(ks, erg);
  return fit;
}

double ergodic_excess(const ConvergenceTrace& trace) {
  double sum = 0.0, worst = -std::numeric_limits<double>::infinity();
  for (const auto& r : trace.records) {
    if (r.k < 1) continue;
    sum += r.h_last;
    worst = std::max(worst, r.h_erg - sum / r.k);
  }
  return worst;
}

}  // namespace dlmp
