#include "dlmp/pd_solver.hpp"

#include <algorithm>
#include <cmath>

namespace dlmp {

MetricKind parse_metric_kind(const std::string& name) {
  if (name == "surrogate") return MetricKind::Surrogate;
  if (name == "exact") return MetricKind::Exact;
  if (name == "exact-dso") return MetricKind::ExactDso;
  throw std::invalid_argument("unknown metric '" + name + "' (expected surrogate, exact or exact-dso)");
}

std::string to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::Surrogate:
      return "surrogate";
    case MetricKind::Exact:
      return "exact";
    case MetricKind::ExactDso:
      return "exact-dso";
  }
  return "?";
}

namespace {

Mat gram(const SpMat& A) { return Mat(Mat(A).transpose() * Mat(A)); }

double max_eigenvalue(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double min_eigenvalue(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Mat block_diagonal(const std::vector<Mat>& blocks) {
  int n = 0;
  for (const auto& b : blocks) n += static_cast<int>(b.rows());
  Mat out = Mat::Zero(n, n);
  int at = 0;
  for (const auto& b : blocks) {
    out.block(at, at, b.rows(), b.cols()) = b;
    at += static_cast<int>(b.rows());
  }
  return out;
}

}  // namespace

StepSizes stepsize_matrices(const BlockProblem& problem, const std::vector<Vec>& lambda, double sigma,
                            const std::vector<double>& tau, const SamplingScheme& sampling, MetricKind kind) {
  const int nb = problem.num_blocks();
  if (!(sigma > 0.0)) throw std::invalid_argument("step sizes: sigma must be positive");
  if (static_cast<int>(tau.size()) != nb || static_cast<int>(lambda.size()) != nb || sampling.blocks() != nb)
    throw std::invalid_argument("step sizes: one tau, one Lambda and one sampling entry per block required");
  for (double t : tau)
    if (!(t > 0.0)) throw std::invalid_argument("step sizes: tau must be positive");

  StepSizes s;
  s.sigma = sigma;
  s.tau = tau;
  const Vec& p = sampling.marginals();
  std::vector<Mat> cond_blocks, used_blocks, lambda_blocks;
  for (int i = 0; i < nb; ++i) {
    const auto& blk = problem.blocks[static_cast<size_t>(i)];
    const Mat AtA = gram(blk.A);
    const Vec& lam = lambda[static_cast<size_t>(i)];
    const double pi = p[i];
    const double lam_max = lam.size() ? lam.maxCoeff() : 0.0;
    const double diag = 1.0 / tau[static_cast<size_t>(i)] + lam_max / pi + sigma * max_eigenvalue(AtA);
    s.diagonal.push_back(Metric::diag(Vec::Constant(blk.dim, diag)));
    const bool exact = kind == MetricKind::Exact || (kind == MetricKind::ExactDso && i == 0);
    if (exact) {
      Mat T = sigma * AtA;
      T.diagonal().array() += 1.0 / tau[static_cast<size_t>(i)];
      T.diagonal() += lam / pi;
      s.T.push_back(Metric::full(T));
    } else {
      s.T.push_back(s.diagonal.back());
    }
    Mat c = sigma * AtA;
    c.diagonal().array() += 1.0 / tau[static_cast<size_t>(i)];
    cond_blocks.push_back(c / pi);
    used_blocks.push_back(s.T.back().as_dense() / pi);
    lambda_blocks.push_back(Mat(lam.asDiagonal()));
  }
  const Mat Sigma = sigma * sigma_matrix(problem, sampling);
  s.margin = min_eigenvalue(block_diagonal(cond_blocks) - Sigma);
  s.lambda_margin = min_eigenvalue(block_diagonal(used_blocks) - block_diagonal(lambda_blocks) - Sigma);
  s.valid = s.margin > 0.0;
  return s;
}

double critical_tau(const BlockProblem& problem, double sigma, const SamplingScheme& sampling) {
  const Vec& p = sampling.marginals();
  std::vector<Mat> blocks;
  Vec sqrt_p(problem.dim());
  int at = 0;
  for (int i = 0; i < problem.num_blocks(); ++i) {
    const auto& blk = problem.blocks[static_cast<size_t>(i)];
    blocks.push_back(gram(blk.A) / p[i]);
    sqrt_p.segment(at, blk.dim).setConstant(std::sqrt(p[i]));
    at += blk.dim;
  }
  const Mat B = sigma * (block_diagonal(blocks) - sigma_matrix(problem, sampling));
  const Mat scaled = -(sqrt_p.asDiagonal() * B * sqrt_p.asDiagonal());
  const double top = max_eigenvalue(scaled);
  const double tiny = 1e-13 * std::max(1.0, B.cwiseAbs().maxCoeff());
  return top > tiny ? 1.0 / top : std::numeric_limits<double>::infinity();
}

std::vector<double> auto_tau(const BlockProblem& problem, double sigma, const SamplingScheme& sampling, double margin,
                             double tau_cap) {
  const double crit = critical_tau(problem, sigma, sampling);
  const double tau = std::min(tau_cap, (1.0 - margin) * crit);
  return std::vector<double>(static_cast<size_t>(problem.num_blocks()), tau);
}

double InnerTolerance::at(int k) const {
  const double d = static_cast<double>(k) + 1.0;
  return std::max(floor, base / (d * d));
}

ProxFailure::ProxFailure(int it, int blk, double res)
    : std::runtime_error("inner solve of block " + std::to_string(blk) + " at iteration " + std::to_string(it) +
                         " stopped at residual " + std::to_string(res)),
      iteration(it),
      block(blk),
      residual(res) {}

namespace {

struct Engine {
  const BlockProblem& problem;
  const SamplingScheme& sampling;
  const StepSizes& steps;
  const SolverOptions& options;
  std::vector<std::unique_ptr<BlockProx>> prox;
  std::vector<Metric> metrics;
  Vec weights;

  Engine(const BlockProblem& pb, const SamplingScheme& sm, const StepSizes& st, const SolverOptions& op)
      : problem(pb), sampling(sm), steps(st), options(op) {
    if (sampling.blocks() != problem.num_blocks() || static_cast<int>(steps.T.size()) != problem.num_blocks())
      throw std::invalid_argument("solver: sampling, step sizes and problem disagree on the block count");
    if (!steps.valid && !options.allow_invalid)
      throw std::invalid_argument("solver: step-size condition violated (margin " + std::to_string(steps.margin) +
                                  ")");
    weights = sampling.weights();
    for (int i = 0; i < problem.num_blocks(); ++i) {
      prox.push_back(problem.blocks[static_cast<size_t>(i)].prox->clone());
      metrics.push_back(steps.T[static_cast<size_t>(i)].scaled(weights[i]));
    }
  }

  Vec step_block(int k, int i, const Vec& xi, const Vec& y, int& misses) {
    const auto& blk = problem.blocks[static_cast<size_t>(i)];
    const Vec g = blk.cost->gradient(xi) + blk.A.transpose() * y;
    const double tol = options.inner.at(k);
    ProxResult r = prox[static_cast<size_t>(i)]->solve(xi, g, metrics[static_cast<size_t>(i)], tol);
    if (!r.converged) {
      ++misses;
      if (options.strict_inner) throw ProxFailure(k, i, r.residual);
    }
    return r.x;
  }
};

void update_mean(BlockVec& mean, const BlockVec& x, int count) {
  for (size_t i = 0; i < x.size(); ++i) mean[i] += (x[i] - mean[i]) / static_cast<double>(count);
}

bool record(TraceRecorder& rec, SolverResult& out, const SolverOptions& options, int k, const BlockVec& x,
            const BlockVec& mean, const Vec& y) {
  const bool last = k == options.iterations;
  const double kkt = rec.record(k, x, mean, y, last);
  if (!std::isnan(kkt)) out.last_kkt = kkt;
  if (options.keep_history) {
    out.x_history.push_back(x);
    out.y_history.push_back(y);
  }
  return !std::isnan(kkt) && kkt <= options.kkt_target;
}

}  // namespace

SolverResult run(const BlockProblem& problem, const SamplingScheme& sampling, const StepSizes& steps,
                 const SolverOptions& options) {
  Engine eng(problem, sampling, steps, options);
  const double sigma = steps.sigma;
  SolverResult out;
  BlockVec x = problem.initial_point();
  BlockVec mean = x;
  Vec z = sigma * problem.residual(x);
  Vec y = z;
  TraceRecorder rec(problem, steps.diagonal, options.kkt_interval, options.snapshot_interval, options.drift_window);
  bool done = record(rec, out, options, 0, x, mean, y);

  for (int k = 0; k < options.iterations && !done; ++k) {
    const auto& I = sampling.draw(options.seed, static_cast<std::uint64_t>(k));
    Vec plain = Vec::Zero(problem.rows());
    Vec weighted = Vec::Zero(problem.rows());
    for (int i : I) {
      const auto& blk = problem.blocks[static_cast<size_t>(i)];
      Vec next = eng.step_block(k, i, x[static_cast<size_t>(i)], y, out.inner_misses);
      const Vec d = blk.A * (next - x[static_cast<size_t>(i)]);
      plain += d;
      weighted += eng.weights[i] * d;
      x[static_cast<size_t>(i)] = std::move(next);
    }
    z += sigma * plain;
    y += sigma * weighted + z;
    update_mean(mean, x, k + 1);
    out.iterations = k + 1;
    done = record(rec, out, options, k + 1, x, mean, y);
  }
  out.x = std::move(x);
  out.mean = std::move(mean);
  out.y = std::move(y);
  out.z = std::move(z);
  out.trace = std::move(rec.trace());
  return out;
}

SolverResult run_primal_form(const BlockProblem& problem, const SamplingScheme& sampling, const StepSizes& steps,
                             const SolverOptions& options) {
  Engine eng(problem, sampling, steps, options);
  const double sigma = steps.sigma;
  const int nb = problem.num_blocks();
  SolverResult out;
  BlockVec x = problem.initial_point();
  BlockVec S = x;
  BlockVec mean = x;
  BlockVec Z = x;

  auto implied_dual = [&](int k) {
    const double theta = 1.0 / (k + 1.0);
    for (int i = 0; i < nb; ++i)
      Z[static_cast<size_t>(i)] = (1.0 - theta) * S[static_cast<size_t>(i)] + theta * x[static_cast<size_t>(i)];
    return Vec((sigma / theta) * problem.residual(Z));
  };

  TraceRecorder rec(problem, steps.diagonal, options.kkt_interval, options.snapshot_interval, options.drift_window);
  Vec y = implied_dual(0);
  bool done = record(rec, out, options, 0, x, mean, y);

  for (int k = 0; k < options.iterations && !done; ++k) {
    const double theta = 1.0 / (k + 1.0);
    const auto& I = sampling.draw(options.seed, static_cast<std::uint64_t>(k));
    BlockVec next = x;
    for (int i : I) next[static_cast<size_t>(i)] = eng.step_block(k, i, x[static_cast<size_t>(i)], y, out.inner_misses);
    S = Z;
    for (int i : I)
      S[static_cast<size_t>(i)] += theta * eng.weights[i] * (next[static_cast<size_t>(i)] - x[static_cast<size_t>(i)]);
    x = std::move(next);
    update_mean(mean, x, k + 1);
    y = implied_dual(k + 1);
    out.iterations = k + 1;
    done = record(rec, out, options, k + 1, x, mean, y);
  }
  out.x = std::move(x);
  out.mean = std::move(mean);
  out.y = std::move(y);
  out.z = sigma * problem.residual(out.x);
  out.trace = std::move(rec.trace());
  return out;
}

double eso_check(const BlockProblem& problem, const SamplingScheme& sampling, const BlockVec& x, const BlockVec& t) {
  const Vec w = sampling.weights();
  const Vec r = problem.residual(x);
  const double h = 0.5 * r.squaredNorm();
  double expected = 0.0;
  for (size_t s = 0; s < sampling.subsets().size(); ++s) {
    BlockVec moved = x;
    for (int i : sampling.subsets()[s]) moved[static_cast<size_t>(i)] += w[i] * t[static_cast<size_t>(i)];
    expected += sampling.probabilities()[s] * problem.feasibility(moved);
  }
  double lin = 0.0;
  for (int i = 0; i < problem.num_blocks(); ++i)
    lin += (problem.blocks[static_cast<size_t>(i)].A.transpose() * r).dot(t[static_cast<size_t>(i)]);
  const Vec tf = problem.flatten(t);
  const double quad = 0.5 * tf.dot(sigma_matrix(problem, sampling) * tf);
  return std::abs(expected - (h + lin + quad));
}

GammaTable gamma_coefficients(int K, const SamplingScheme& sampling) {
  if (K < 1) throw std::invalid_argument("gamma coefficients: K must be at least 1");
  const int nb = sampling.blocks();
  const Vec w = sampling.weights();
  using Row = std::vector<std::vector<long double>>;
  Row row(1, std::vector<long double>(static_cast<size_t>(nb), 1.0L));
  GammaTable table;
  auto push = [&](const Row& r) {
    std::vector<Vec> out;
    for (const auto& e : r) {
      Vec v(nb);
      for (int i = 0; i < nb; ++i) v[i] = static_cast<double>(e[static_cast<size_t>(i)]);
      out.push_back(v);
    }
    table.push_back(std::move(out));
  };
  push(row);
  // Row 1 from theta_0 = 1, then the recursion with theta_k = 1/(k+1).
  Row next(2, std::vector<long double>(static_cast<size_t>(nb)));
  for (int i = 0; i < nb; ++i) {
    next[0][static_cast<size_t>(i)] = 1.0L - static_cast<long double>(w[i]);
    next[1][static_cast<size_t>(i)] = static_cast<long double>(w[i]);
  }
  row = std::move(next);
  push(row);
  for (int k = 1; k < K; ++k) {
    const long double theta = 1.0L / (k + 1);
    Row grown(static_cast<size_t>(k + 2), std::vector<long double>(static_cast<size_t>(nb)));
    for (int i = 0; i < nb; ++i) {
      const long double P = static_cast<long double>(w[i]);
      const auto ii = static_cast<size_t>(i);
      for (int l = 0; l < k; ++l) grown[static_cast<size_t>(l)][ii] = (1.0L - theta) * row[static_cast<size_t>(l)][ii];
      grown[static_cast<size_t>(k)][ii] = (1.0L - theta) * row[static_cast<size_t>(k)][ii] - theta * (P - 1.0L);
      grown[static_cast<size_t>(k + 1)][ii] = theta * P;
    }
    row = std::move(grown);
    push(row);
  }
  return table;
}

double gamma_row_sum_error(const GammaTable& table) {
  long double worst = 0.0L;
  for (const auto& r : table) {
    if (r.empty()) continue;
    for (Eigen::Index i = 0; i < r.front().size(); ++i) {
      long double sum = 0.0L;
      for (const auto& e : r) sum += static_cast<long double>(e[i]);
      worst = std::max(worst, std::abs(sum - 1.0L));
    }
  }
  return static_cast<double>(worst);
}

}  // namespace dlmp
