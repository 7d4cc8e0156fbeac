#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include "dlmp/grid_model.hpp"
#include "dlmp/problem.hpp"

namespace dlmp {

/// Index map of the DSO block x0 = (p0, q0, f, g, v, l).
///
/// p0/q0 are the root's net consumption (non-positive active part: the root only
/// generates). Network quantities are indexed by dense bus index k in [0, N).
struct DsoLayout {
  int buses = 0;
  int horizon = 0;

  int dim() const { return 2 * horizon + 4 * buses * horizon; }
  int p0(int t) const { return t; }
  int q0(int t) const { return horizon + t; }
  int f(int k, int t) const { return 2 * horizon + k * horizon + t; }
  int g(int k, int t) const { return 2 * horizon + (buses + k) * horizon + t; }
  int v(int k, int t) const { return 2 * horizon + (2 * buses + k) * horizon + t; }
  int l(int k, int t) const { return 2 * horizon + (3 * buses + k) * horizon + t; }
};

/// Index map of one aggregator block: per managed bus j, consumption pc, production pp and
/// production reactive qp for every period. Reactive consumption is tau_c * pc.
struct LaLayout {
  std::vector<int> buses;  // dense bus indices
  int horizon = 0;

  int dim() const { return 3 * static_cast<int>(buses.size()) * horizon; }
  int pc(int j, int t) const { return 3 * j * horizon + t; }
  int pp(int j, int t) const { return 3 * j * horizon + horizon + t; }
  int qp(int j, int t) const { return 3 * j * horizon + 2 * horizon + t; }
};

/// A0 x0 + sum_a A_a x_a = b0 + sum_a b_a: active balance rows first, then reactive rows.
struct CouplingSystem {
  int buses = 0;
  int horizon = 0;
  SpMat A0;
  std::vector<SpMat> A_la;
  Vec b0;
  std::vector<Vec> b_la;

  int rows() const { return 2 * buses * horizon; }
  int active_row(int k, int t) const { return k * horizon + t; }
  int reactive_row(int k, int t) const { return buses * horizon + k * horizon + t; }
  Vec rhs() const;
};

/// Everything the assembly layer derives from an instance.
struct OpfModel {
  NetworkInstance instance;
  Topology topology;
  AggregatorPartition partition;
  DsoLayout dso;
  std::vector<LaLayout> las;
  CouplingSystem coupling;
};

OpfModel assemble(const NetworkInstance& instance);
CouplingSystem build_coupling(const NetworkInstance& instance);

/// sum_t c_t(-p0_t) + k_loss * sum_{n,t} R_n l_{n,t}.
class DsoCost final : public BlockCost {
 public:
  DsoCost(DsoLayout layout, std::vector<PeriodCost> cost, double k_loss, std::vector<double> resistance);

  double value(const Vec& x0) const override;
  Vec gradient(const Vec& x0) const override;
  Vec curvature(int dim) const override;

 private:
  void check(const Vec& x0) const;

  DsoLayout layout_;
  std::vector<PeriodCost> cost_;
  double k_loss_;
  std::vector<double> r_;
};

std::shared_ptr<const BlockCost> dso_cost(const OpfModel& model);
/// Aggregator costs are zero in the benchmark.
std::shared_ptr<const BlockCost> la_cost(const OpfModel& model, int aggregator);

/// Block-diagonal Lambda, returned as one diagonal per block (DSO first).
std::vector<Vec> smoothness_matrix(const BlockProblem& problem);

/// Full block problem: block 0 is the DSO, blocks 1..p the aggregators.
BlockProblem build_block_problem(const OpfModel& model);

/// "rows cols nnz" header followed by one "row col value" line per entry (0-based).
void write_triplets(std::ostream& out, const SpMat& m);

}  // namespace dlmp
