#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace dlmp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using BlockVec = std::vector<Vec>;

/// Positive-definite block metric, either diagonal or dense.
struct Metric {
  Vec diagonal;  // used when `dense` is empty
  Mat dense;

  static Metric diag(Vec d) { return Metric{std::move(d), {}}; }
  static Metric full(Mat m) { return Metric{{}, std::move(m)}; }
  static Metric identity(int n) { return diag(Vec::Ones(n)); }

  bool is_diagonal() const { return dense.size() == 0; }
  int dim() const { return static_cast<int>(is_diagonal() ? diagonal.size() : dense.rows()); }
  Vec apply(const Vec& v) const;
  Metric scaled(double factor) const;
  Mat as_dense() const;
  double min_eigenvalue() const;
  double norm_sq(const Vec& v) const { return v.dot(apply(v)); }
};

/// Smooth convex cost of one block.
class BlockCost {
 public:
  virtual ~BlockCost() = default;
  virtual double value(const Vec& x) const = 0;
  virtual Vec gradient(const Vec& x) const = 0;
  /// Diagonal of a matrix Lambda with phi(y) <= phi(x) + <grad, y-x> + 0.5 |y-x|^2_Lambda.
  virtual Vec curvature(int dim) const = 0;
};

class ZeroCost final : public BlockCost {
 public:
  double value(const Vec&) const override { return 0.0; }
  Vec gradient(const Vec& x) const override { return Vec::Zero(x.size()); }
  Vec curvature(int dim) const override { return Vec::Zero(dim); }
};

/// 0.5 * sum_j w_j x_j^2 + <c, x>.
class QuadraticCost final : public BlockCost {
 public:
  QuadraticCost(Vec weights, Vec linear) : w_(std::move(weights)), c_(std::move(linear)) {}
  static QuadraticCost half_norm(int dim) { return {Vec::Ones(dim), Vec::Zero(dim)}; }

  double value(const Vec& x) const override { return 0.5 * x.dot(w_.cwiseProduct(x)) + c_.dot(x); }
  Vec gradient(const Vec& x) const override { return w_.cwiseProduct(x) + c_; }
  Vec curvature(int) const override { return w_; }

 private:
  Vec w_;
  Vec c_;
};

struct ProxResult {
  Vec x;
  double residual = 0.0;  // inner fixed-point residual (0 for closed-form operators)
  int iterations = 0;
  bool converged = true;
};

/// Solves argmin_u <linear, u> + 0.5 |u - anchor|^2_M + indicator(u in X_i).
///
/// Implementations may keep warm-start state between calls; `clone` returns a copy with
/// fresh state so independent runs stay deterministic.
class BlockProx {
 public:
  virtual ~BlockProx() = default;
  virtual ProxResult solve(const Vec& anchor, const Vec& linear, const Metric& metric, double tol) = 0;
  virtual std::unique_ptr<BlockProx> clone() const = 0;
  /// Largest constraint violation of `x` (0 when feasible).
  virtual double violation(const Vec& x) const = 0;
};

/// Prox of an unconstrained block or a box; closed form for diagonal metrics.
class BoxProx final : public BlockProx {
 public:
  BoxProx(Vec lower, Vec upper) : lo_(std::move(lower)), hi_(std::move(upper)) {}
  static BoxProx unconstrained(int dim);

  ProxResult solve(const Vec& anchor, const Vec& linear, const Metric& metric, double tol) override;
  std::unique_ptr<BlockProx> clone() const override { return std::make_unique<BoxProx>(*this); }
  double violation(const Vec& x) const override;

 private:
  Vec lo_;
  Vec hi_;
};

struct Block {
  std::string name;
  int dim = 0;
  SpMat A;  // rows x dim slice of the coupling matrix
  Vec b;    // this block's share of the right-hand side
  std::shared_ptr<const BlockCost> cost;
  std::shared_ptr<const BlockProx> prox;  // prototype; solvers clone it
  Vec x0;                                 // feasible starting point
};

/// min sum_i phi_i(x_i) + r_i(x_i)  s.t.  sum_i A_i x_i = b,  with b = sum_i b_i.
struct BlockProblem {
  std::vector<Block> blocks;

  int num_blocks() const { return static_cast<int>(blocks.size()); }
  int rows() const { return blocks.empty() ? 0 : static_cast<int>(blocks.front().A.rows()); }
  int dim() const;
  Vec rhs() const;

  Vec apply_A(const BlockVec& x) const;
  Vec residual(const BlockVec& x) const { return apply_A(x) - rhs(); }
  /// h(x) = 0.5 |Ax - b|^2.
  double feasibility(const BlockVec& x) const { return 0.5 * residual(x).squaredNorm(); }
  double cost(const BlockVec& x) const;
  BlockVec initial_point() const;
  Mat dense_A() const;
  Vec flatten(const BlockVec& x) const;
  BlockVec split(const Vec& flat) const;
};

}  // namespace dlmp
