#pragma once

#include <array>
#include <memory>
#include <optional>
#include <vector>

#include "dlmp/opf_assembly.hpp"
#include "dlmp/problem.hpp"

namespace dlmp {

/// (f, g, v, l) coordinates of one rotated cone f^2 + g^2 <= v l.
using ConePoint = std::array<double, 4>;

/// Euclidean projection onto {f^2 + g^2 <= v l, v >= 0, l >= 0}.
///
/// The isometry (v, l) -> ((v+l)/sqrt2, (v-l)/sqrt2) maps the set onto the cone
/// s >= |(sqrt2 f, sqrt2 g, w)|; the projection onto that cone reduces to one monotone
/// scalar equation in s which is solved by safeguarded Newton to machine precision.
ConePoint project_rotated_soc(const ConePoint& point);

/// Projection onto the disk of the given radius centred at the origin.
std::array<double, 2> project_disk(double a, double b, double radius);

/// Weighted projection of (p, q) onto {0 <= p <= cap, rho_min p <= q <= rho_max p}
/// under the metric diag(wp, wq).
std::array<double, 2> project_production(double p, double q, double wp, double wq, double cap,
                                         double rho_min, double rho_max);

/// Result of the energy-constrained box projection.
struct EnergyProjection {
  std::vector<double> x;
  double multiplier = 0.0;  // KKT multiplier of sum x >= energy
};

/// argmin sum_t 0.5 w_t (x_t - c_t)^2  s.t.  lo <= x <= hi, sum_t x_t >= energy.
/// Solved exactly by walking the breakpoints of the piecewise-linear dual function.
EnergyProjection project_energy_box(const std::vector<double>& c, const std::vector<double>& w,
                                    const std::vector<double>& lo, const std::vector<double>& hi,
                                    double energy);

/// Closed-form prox over one aggregator's feasible set (diagonal metrics only).
class LaProx final : public BlockProx {
 public:
  LaProx(LaLayout layout, std::vector<FlexibilityProfile> profiles);

  ProxResult solve(const Vec& anchor, const Vec& linear, const Metric& metric, double tol) override;
  std::unique_ptr<BlockProx> clone() const override { return std::make_unique<LaProx>(*this); }
  double violation(const Vec& x) const override;

  /// Energy multipliers of the last solve, one per managed bus.
  const std::vector<double>& energy_multipliers() const { return multipliers_; }

 private:
  LaLayout layout_;
  std::vector<FlexibilityProfile> profiles_;
  std::vector<double> multipliers_;
};

struct DsoProxOptions {
  double rho_scale = 1.0;
  double relaxation = 1.6;
  int max_iterations = 200000;
};

/// Prox over the DSO set: Ohm's law and the root balance (affine), per-(n,t) rotated cone,
/// both apparent-power disks, voltage box, and p0 <= 0.
///
/// Solved by ADMM on the lifted splitting u -> (K u in product of closed-form sets) with the
/// affine constraints kept in the u-step. The u-step matrix is factorised once per metric
/// and the splitting state (z, w) is warm-started across calls.
class DsoProx final : public BlockProx {
 public:
  DsoProx(const OpfModel& model, DsoProxOptions options = {});

  ProxResult solve(const Vec& anchor, const Vec& linear, const Metric& metric, double tol) override;
  std::unique_ptr<BlockProx> clone() const override;
  double violation(const Vec& x) const override;

  /// Drops the warm-start state.
  void reset();

  const SpMat& affine_matrix() const { return E_; }
  const Vec& affine_rhs() const { return e_; }

 private:
  struct CellSet {
    int row = 0;  // first K row of the 9-row group
    double s_max = 0.0;
    double r = 0.0;
    double x = 0.0;
    double v_min = 0.0;
    double v_max = 0.0;
  };
  struct Factor {
    Metric metric;
    double rho = 0.0;
    Mat G;  // u = G rhs + g
    Vec g;
  };

  void project_sets(Vec& z) const;
  const Factor& factor_for(const Metric& metric);
  double set_violation(const Vec& x) const;

  DsoLayout layout_;
  DsoProxOptions options_;
  SpMat K_;
  SpMat Kt_;
  SpMat E_;
  Vec e_;
  std::vector<CellSet> cells_;
  int root_rows_ = 0;  // first K row of the p0 <= 0 rows
  std::shared_ptr<Factor> factor_;
  Vec z_;
  Vec w_;
};

}  // namespace dlmp
