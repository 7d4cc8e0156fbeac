#include "dlmp/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dlmp {

Vec Metric::apply(const Vec& v) const {
  return is_diagonal() ? Vec(diagonal.cwiseProduct(v)) : Vec(dense * v);
}

Metric Metric::scaled(double factor) const {
  return is_diagonal() ? diag(diagonal * factor) : full(dense * factor);
}

Mat Metric::as_dense() const { return is_diagonal() ? Mat(diagonal.asDiagonal()) : dense; }

double Metric::min_eigenvalue() const {
  if (is_diagonal()) return diagonal.size() ? diagonal.minCoeff() : 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(dense, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

BoxProx BoxProx::unconstrained(int dim) {
  const double inf = std::numeric_limits<double>::infinity();
  return {Vec::Constant(dim, -inf), Vec::Constant(dim, inf)};
}

ProxResult BoxProx::solve(const Vec& anchor, const Vec& linear, const Metric& metric, double tol) {
  ProxResult out;
  if (metric.is_diagonal()) {
    const Vec target = anchor - linear.cwiseQuotient(metric.diagonal);
    out.x = target.cwiseMax(lo_).cwiseMin(hi_);
    return out;
  }
  // Dense metric: cyclic coordinate minimisation of the strictly convex box QP.
  const Mat& M = metric.dense;
  const Vec q = linear - M * anchor;  // objective 0.5 u'Mu + q'u
  Vec u = anchor.cwiseMax(lo_).cwiseMin(hi_);
  Vec grad = M * u + q;
  for (int sweep = 0; sweep < 100000; ++sweep) {
    double moved = 0.0;
    for (Eigen::Index j = 0; j < u.size(); ++j) {
      const double next = std::clamp(u[j] - grad[j] / M(j, j), lo_[j], hi_[j]);
      const double delta = next - u[j];
      if (delta != 0.0) {
        grad += M.col(j) * delta;
        u[j] = next;
        moved = std::max(moved, std::abs(delta));
      }
    }
    ++out.iterations;
    if (moved <= tol * 1e-2) break;
  }
  out.x = u;
  out.residual = 0.0;
  return out;
}

double BoxProx::violation(const Vec& x) const {
  double v = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) v = std::max({v, lo_[j] - x[j], x[j] - hi_[j]});
  return v;
}

int BlockProblem::dim() const {
  int d = 0;
  for (const auto& b : blocks) d += b.dim;
  return d;
}

Vec BlockProblem::rhs() const {
  Vec b = Vec::Zero(rows());
  for (const auto& blk : blocks)
    if (blk.b.size()) b += blk.b;
  return b;
}

Vec BlockProblem::apply_A(const BlockVec& x) const {
  Vec out = Vec::Zero(rows());
  for (size_t i = 0; i < blocks.size(); ++i) out += blocks[i].A * x[i];
  return out;
}

double BlockProblem::cost(const BlockVec& x) const {
  double c = 0.0;
  for (size_t i = 0; i < blocks.size(); ++i) c += blocks[i].cost->value(x[i]);
  return c;
}

BlockVec BlockProblem::initial_point() const {
  BlockVec x;
  x.reserve(blocks.size());
  for (const auto& b : blocks) x.push_back(b.x0.size() ? b.x0 : Vec::Zero(b.dim));
  return x;
}

Mat BlockProblem::dense_A() const {
  Mat A(rows(), dim());
  int col = 0;
  for (const auto& b : blocks) {
    A.middleCols(col, b.dim) = Mat(b.A);
    col += b.dim;
  }
  return A;
}

Vec BlockProblem::flatten(const BlockVec& x) const {
  Vec out(dim());
  int col = 0;
  for (size_t i = 0; i < blocks.size(); ++i) {
    out.segment(col, blocks[i].dim) = x[i];
    col += blocks[i].dim;
  }
  return out;
}

BlockVec BlockProblem::split(const Vec& flat) const {
  if (flat.size() != dim()) throw std::invalid_argument("split: dimension mismatch");
  BlockVec out;
  int col = 0;
  for (const auto& b : blocks) {
    out.push_back(flat.segment(col, b.dim));
    col += b.dim;
  }
  return out;
}

}  // namespace dlmp
