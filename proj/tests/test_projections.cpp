#include <gtest/gtest.h>

#include <random>

#include "dlmp/projections.hpp"
#include "prox_oracles.hpp"
#include "support.hpp"

using namespace dlmp;
using testing_support::bus15;
using testing_support::bus15_model;

namespace {

std::array<double, 4> to_arr(const ConePoint& p) { return {p[0], p[1], p[2], p[3]}; }

double dist4(const ConePoint& a, const ConePoint& b) {
  double s = 0;
  for (int i = 0; i < 4; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

Mat random_spd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Mat B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = g(rng);
  return B * B.transpose() / n + 0.5 * Mat::Identity(n, n);
}

}  // namespace

TEST(RotatedCone, InteriorIsFixed) {
  const auto p = project_rotated_soc({0, 0, 1, 1});
  EXPECT_EQ(p, (ConePoint{0, 0, 1, 1}));
}

TEST(RotatedCone, AxisPointMatchesKkt) {
  const auto p = project_rotated_soc({1, 0, 0, 0});
  const auto o = oracle::rotated_cone_kkt({1, 0, 0, 0});
  EXPECT_NEAR(p[0] * p[0] + p[1] * p[1] - p[2] * p[3], 0.0, 1e-14);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(p[i], o[i], 1e-10);
  EXPECT_NEAR(p[0], 1.0 / 3.0, 1e-12);
}

TEST(RotatedCone, SignSymmetry) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int i = 0; i < 200; ++i) {
    const ConePoint x{g(rng), g(rng), g(rng), g(rng)};
    const auto a = project_rotated_soc(x), b = project_rotated_soc({-x[0], x[1], x[2], x[3]});
    EXPECT_EQ(a[0], -b[0]);
    EXPECT_EQ(a[1], b[1]);
    EXPECT_EQ(a[2], b[2]);
    EXPECT_EQ(a[3], b[3]);
  }
}

TEST(RotatedCone, MatchesKktOracle) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  for (int i = 0; i < 1000; ++i) {
    const double s = std::exp(2.0 * g(rng));
    const ConePoint x{s * g(rng), s * g(rng), s * g(rng), s * g(rng)};
    const auto p = project_rotated_soc(x);
    const auto o = oracle::rotated_cone_kkt(to_arr(x));
    for (int c = 0; c < 4; ++c) EXPECT_NEAR(p[c], o[c], 1e-10 * std::max(1.0, s)) << "case " << i;
  }
}

TEST(RotatedCone, NonExpansive) {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> g;
  for (int i = 0; i < 1000; ++i) {
    const ConePoint x{g(rng), g(rng), g(rng), g(rng)}, y{g(rng), g(rng), g(rng), g(rng)};
    EXPECT_LE(dist4(project_rotated_soc(x), project_rotated_soc(y)), dist4(x, y) + 1e-12);
  }
}

TEST(Disk, RadialProjection) {
  const auto p = project_disk(3.0, 4.0, 1.0);
  EXPECT_NEAR(p[0], 0.6, 1e-15);
  EXPECT_NEAR(p[1], 0.8, 1e-15);
  const auto q = project_disk(0.1, -0.2, 1.0);
  EXPECT_EQ(q[0], 0.1);
  EXPECT_EQ(q[1], -0.2);
}

TEST(Production, MatchesMeshOracle) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.5, 1.5), w(0.2, 5.0), r(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double cap = (i % 10 == 0) ? 0.0 : std::abs(u(rng));
    double rmin = r(rng), rmax = r(rng);
    if (rmin > rmax) std::swap(rmin, rmax);
    if (i % 7 == 0) rmax = rmin;
    const double p = u(rng), q = u(rng), wp = w(rng), wq = w(rng);
    const auto a = project_production(p, q, wp, wq, cap, rmin, rmax);
    const auto o = oracle::production_mesh(p, q, wp, wq, cap, rmin, rmax);
    EXPECT_NEAR(a[0], o[0], 1e-6) << "case " << i;
    EXPECT_NEAR(a[1], o[1], 1e-6) << "case " << i;
    if (rmin == rmax) EXPECT_EQ(a[1], rmin * a[0]);
  }
}

TEST(Production, WeightedNonExpansive) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(-1.5, 1.5), w(0.2, 5.0);
  for (int i = 0; i < 1000; ++i) {
    const double wp = w(rng), wq = w(rng), cap = std::abs(u(rng));
    const double p1 = u(rng), q1 = u(rng), p2 = u(rng), q2 = u(rng);
    const auto a = project_production(p1, q1, wp, wq, cap, -0.3, 0.4);
    const auto b = project_production(p2, q2, wp, wq, cap, -0.3, 0.4);
    const double out = wp * (a[0] - b[0]) * (a[0] - b[0]) + wq * (a[1] - b[1]) * (a[1] - b[1]);
    const double in = wp * (p1 - p2) * (p1 - p2) + wq * (q1 - q2) * (q1 - q2);
    EXPECT_LE(out, in * (1 + 1e-12) + 1e-15);
  }
}

TEST(EnergyBox, MatchesBisection) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0), w(0.2, 5.0);
  for (int i = 0; i < 1000; ++i) {
    const int T = 1 + i % 12;
    std::vector<double> c(T), ww(T), lo(T), hi(T);
    double hsum = 0;
    for (int t = 0; t < T; ++t) {
      c[t] = u(rng);
      ww[t] = w(rng);
      lo[t] = u(rng) - 0.5;
      hi[t] = lo[t] + std::abs(u(rng));
      hsum += hi[t];
    }
    const double energy = hsum - std::abs(u(rng)) * T * 0.5;
    const auto a = project_energy_box(c, ww, lo, hi, energy);
    const auto [o, mu] = oracle::energy_bisection(c, ww, lo, hi, energy);
    for (int t = 0; t < T; ++t) EXPECT_NEAR(a.x[t], o[t], 1e-9) << "case " << i;
    EXPECT_NEAR(a.multiplier, mu, 1e-7 * std::max(1.0, mu));
  }
}

TEST(LaProx, Bus3EnergyExample) {
  const auto& model = bus15_model();
  const int k = model.topology.index_of.at(3);
  const auto& layout = model.las[static_cast<size_t>(k)];
  LaProx prox(layout, {bus15().profile(3)});
  const Vec anchor = Vec::Zero(layout.dim());
  const auto r = prox.solve(anchor, Vec::Zero(layout.dim()), Metric::identity(layout.dim()), 0.0);
  EXPECT_NEAR(r.x[layout.pc(0, 0)] + r.x[layout.pc(0, 1)], 0.047, 1e-15);
  ASSERT_EQ(prox.energy_multipliers().size(), 1u);
  EXPECT_GE(prox.energy_multipliers()[0], 0.0);
  const auto [o, mu] = oracle::energy_bisection({0, 0}, {1, 1}, {0.003, 0.011}, {0.020, 0.035}, 0.047);
  EXPECT_NEAR(r.x[layout.pc(0, 0)], o[0], 1e-12);
  EXPECT_NEAR(prox.energy_multipliers()[0], mu, 1e-9);
}

TEST(LaProx, ZeroRatioForcesZeroReactive) {
  const auto& model = bus15_model();
  const int k = model.topology.index_of.at(11);
  const auto& layout = model.las[static_cast<size_t>(k)];
  LaProx prox(layout, {bus15().profile(11)});
  std::mt19937_64 rng(37);
  std::normal_distribution<double> g;
  for (int i = 0; i < 100; ++i) {
    Vec anchor(layout.dim()), lin(layout.dim());
    for (auto& v : anchor) v = g(rng);
    for (auto& v : lin) v = g(rng);
    const auto r = prox.solve(anchor, lin, Metric::identity(layout.dim()), 0.0);
    for (int t = 0; t < 2; ++t) EXPECT_EQ(r.x[layout.qp(0, t)], 0.0);
  }
}

TEST(LaProx, InteriorAnchorUnchanged) {
  const auto& model = bus15_model();
  const int k = model.topology.index_of.at(1);
  const auto& layout = model.las[static_cast<size_t>(k)];
  LaProx prox(layout, {bus15().profile(1)});
  Vec anchor = Vec::Zero(layout.dim());
  anchor[layout.pc(0, 0)] = 1.2;
  anchor[layout.pc(0, 1)] = 1.2;
  const auto r = prox.solve(anchor, Vec::Zero(layout.dim()), Metric::identity(layout.dim()), 0.0);
  EXPECT_EQ(r.x, anchor);
}

TEST(LaProx, MatchesBarrierOracle) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> w(0.2, 5.0);
  for (int i = 0; i < 300; ++i) {
    const int T = 1 + i % 4;
    LaLayout layout{{0}, T};
    const auto prof = prox_oracle::random_profile(1, T, rng);
    LaProx prox(layout, {prof});
    Vec anchor(layout.dim()), lin(layout.dim()), ww(layout.dim());
    for (auto& v : anchor) v = g(rng);
    for (auto& v : lin) v = g(rng);
    for (auto& v : ww) v = w(rng);
    const auto r = prox.solve(anchor, lin, Metric::diag(ww), 0.0);
    const Vec o = prox_oracle::la(layout, {prof}, anchor, lin, ww);
    EXPECT_LE((r.x - o).lpNorm<Eigen::Infinity>(), 1e-6) << "case " << i;
  }
}

TEST(LaProx, VariationalInequality) {
  std::mt19937_64 rng(43);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0), w(0.2, 5.0);
  for (int i = 0; i < 50; ++i) {
    const int T = 2;
    LaLayout layout{{0}, T};
    const auto prof = prox_oracle::random_profile(1, T, rng);
    LaProx prox(layout, {prof});
    Vec anchor(layout.dim()), lin(layout.dim()), ww(layout.dim());
    for (auto& v : anchor) v = g(rng);
    for (auto& v : lin) v = g(rng);
    for (auto& v : ww) v = w(rng);
    const Vec xp = prox.solve(anchor, lin, Metric::diag(ww), 0.0).x;
    const Vec grad = lin + ww.cwiseProduct(xp - anchor);
    int tested = 0;
    while (tested < 100) {
      Vec cand(layout.dim());
      double e = 0;
      for (int t = 0; t < T; ++t) {
        const size_t ts = static_cast<size_t>(t);
        cand[layout.pc(0, t)] = prof.p_min[ts] + u(rng) * (prof.p_max[ts] - prof.p_min[ts]);
        cand[layout.pp(0, t)] = u(rng) * prof.prod_max[ts];
        const double rho = prof.rho_min[ts] + u(rng) * (prof.rho_max[ts] - prof.rho_min[ts]);
        cand[layout.qp(0, t)] = rho * cand[layout.pp(0, t)];
        e += cand[layout.pc(0, t)];
      }
      if (e < prof.energy) continue;
      EXPECT_GE(grad.dot(cand - xp), -1e-9);
      ++tested;
    }
  }
}

TEST(LaProx, NonExpansiveInMetric) {
  std::mt19937_64 rng(47);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> w(0.2, 5.0);
  for (int i = 0; i < 200; ++i) {
    LaLayout layout{{0}, 3};
    const auto prof = prox_oracle::random_profile(1, 3, rng);
    LaProx prox(layout, {prof});
    Vec a(layout.dim()), b(layout.dim()), ww(layout.dim());
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng);
    for (auto& v : ww) v = w(rng);
    const Metric M = Metric::diag(ww);
    const Vec zero = Vec::Zero(layout.dim());
    const Vec pa = prox.solve(a, zero, M, 0.0).x, pb = prox.solve(b, zero, M, 0.0).x;
    EXPECT_LE(M.norm_sq(pa - pb), M.norm_sq(a - b) * (1 + 1e-12));
  }
}

TEST(LaProx, RejectsDenseMetric) {
  LaLayout layout{{0}, 1};
  LaProx prox(layout, {FlexibilityProfile::zero(1, 1)});
  EXPECT_THROW(prox.solve(Vec::Zero(3), Vec::Zero(3), Metric::full(Mat::Identity(3, 3)), 0.0),
               std::invalid_argument);
}

TEST(DsoProx, FeasibleAnchorReturnedUnchanged) {
  const auto problem = build_block_problem(bus15_model());
  auto prox = problem.blocks[0].prox->clone();
  const Vec& x0 = problem.blocks[0].x0;
  const auto r = prox->solve(x0, Vec::Zero(x0.size()), Metric::identity(static_cast<int>(x0.size())), 1e-10);
  EXPECT_EQ(r.x, x0);
  EXPECT_EQ(r.residual, 0.0);
}

TEST(DsoProx, SingleConeExample) {
  // One line with negligible impedance: the set reduces to the cone plus boxes.
  auto inst = testing_support::chain_instance(2);
  inst.buses[1].r = 1e-9;
  inst.buses[1].x = 1e-9;
  inst.buses[1].s_max = 10.0;
  inst.buses[1].v_min = 0.1;
  inst.buses[1].v_max = 10.0;
  inst.v0 = 0.5;
  const auto model = assemble(inst);
  DsoProx prox(model);
  const auto& d = model.dso;
  Vec anchor = Vec::Zero(d.dim());
  anchor[d.f(0, 0)] = 1.0;
  anchor[d.v(0, 0)] = 0.5;
  anchor[d.l(0, 0)] = 0.5;
  const Mat I = Mat::Identity(d.dim(), d.dim());
  const auto r = prox.solve(anchor, Vec::Zero(d.dim()), Metric::identity(d.dim()), 1e-12);
  ASSERT_TRUE(r.converged);
  const double f = r.x[d.f(0, 0)], g = r.x[d.g(0, 0)], v = r.x[d.v(0, 0)], l = r.x[d.l(0, 0)];
  EXPECT_LE(f * f + g * g - v * l, 1e-8);
  const Vec o = prox_oracle::dso(model, anchor, Vec::Zero(d.dim()), I);
  EXPECT_LE((r.x - o).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(DsoProx, VoltageClamp) {
  const auto model = assemble(testing_support::chain_instance(3));
  DsoProx prox(model);
  const auto& d = model.dso;
  Vec anchor = Vec::Zero(d.dim());
  anchor[d.v(0, 0)] = 1.0;
  anchor[d.v(1, 0)] = 1.5;
  const auto r = prox.solve(anchor, Vec::Zero(d.dim()), Metric::identity(d.dim()), 1e-12);
  EXPECT_LE(r.x[d.v(1, 0)], 1.21 + 1e-9);
  const Vec o = prox_oracle::dso(model, anchor, Vec::Zero(d.dim()), Mat::Identity(d.dim(), d.dim()));
  EXPECT_LE((r.x - o).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(DsoProx, MatchesBarrierOracle) {
  std::mt19937_64 rng(53);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> w(0.3, 4.0);
  int checked = 0;
  for (std::uint64_t seed = 1; checked < 120; ++seed) {
    const int buses = 2 + static_cast<int>(seed % 2);
    const int T = buses == 2 ? 1 + static_cast<int>(seed % 2) : 1;
    const auto model = assemble(random_instance(buses, T, seed));
    const int n = model.dso.dim();
    ASSERT_LE(n, 12);
    DsoProx prox(model);
    const bool dense = seed % 3 == 0;
    Mat M;
    if (dense) {
      M = random_spd(n, rng);
    } else {
      Vec ww(n);
      for (auto& v : ww) v = w(rng);
      M = ww.asDiagonal();
    }
    const Metric metric = dense ? Metric::full(M) : Metric::diag(M.diagonal());
    for (int rep = 0; rep < 3; ++rep, ++checked) {
      Vec anchor(n), lin(n);
      for (auto& v : anchor) v = 0.5 * g(rng);
      for (int k = 0; k < model.dso.buses; ++k) anchor[model.dso.v(k, 0)] += 1.0;
      for (auto& v : lin) v = 0.3 * g(rng);
      const auto r = prox.solve(anchor, lin, metric, 1e-12);
      EXPECT_TRUE(r.converged);
      const Vec o = prox_oracle::dso(model, anchor, lin, M);
      EXPECT_LE((r.x - o).lpNorm<Eigen::Infinity>(), 1e-6) << "seed " << seed << " rep " << rep;
      EXPECT_LE(prox.violation(r.x), 1e-9);
    }
  }
}

TEST(DsoProx, NonExpansiveInMetric) {
  const auto model = assemble(random_instance(3, 1, 9));
  const int n = model.dso.dim();
  DsoProx prox(model);
  std::mt19937_64 rng(59);
  std::normal_distribution<double> g;
  const Metric M = Metric::full(random_spd(n, rng));
  for (int i = 0; i < 50; ++i) {
    Vec a(n), b(n);
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng);
    const Vec zero = Vec::Zero(n);
    const Vec pa = prox.solve(a, zero, M, 1e-13).x, pb = prox.solve(b, zero, M, 1e-13).x;
    EXPECT_LE(M.norm_sq(pa - pb), M.norm_sq(a - b) + 1e-9);
  }
}

TEST(BoxProx, ClosedForm) {
  BoxProx box(Vec::Constant(3, -1.0), Vec::Constant(3, 1.0));
  Vec anchor(3);
  anchor << 0.5, 2.0, -0.2;
  Vec lin(3);
  lin << 1.0, 0.0, -10.0;
  Vec w(3);
  w << 2.0, 1.0, 5.0;
  const auto r = box.solve(anchor, lin, Metric::diag(w), 0.0);
  EXPECT_DOUBLE_EQ(r.x[0], 0.0);
  EXPECT_DOUBLE_EQ(r.x[1], 1.0);
  EXPECT_DOUBLE_EQ(r.x[2], 1.0);
}
