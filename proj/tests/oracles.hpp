#pragma once

// Independent reference solvers used only by the tests.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// 0.5 u'Q u + q'u + r <= 0.
struct Quad {
  Mat Q;
  Vec q;
  double r = 0.0;
  double value(const Vec& u) const { return 0.5 * u.dot(Q * u) + q.dot(u) + r; }
  Vec grad(const Vec& u) const { return Q * u + q; }
};

inline Quad linear(int n, int j, double coef, double rhs) {  // coef * u_j <= rhs
  Quad c{Mat::Zero(n, n), Vec::Zero(n), -rhs};
  c.q[j] = coef;
  return c;
}

/// min 0.5 u'Hu + h'u  s.t.  cons(u) <= 0, E u = e.
struct Qcqp {
  Mat H;
  Vec h;
  std::vector<Quad> cons;
  Mat E;
  Vec e;
};

/// Log-barrier interior-point method on the null space of E, from a start strictly inside the
/// inequalities. The start is first moved onto E u = e by a least-norm correction.
inline Vec solve_barrier(const Qcqp& p, Vec u, double final_t = 1e13) {
  const int n = static_cast<int>(u.size());
  const int m = static_cast<int>(p.cons.size());
  Mat Z = Mat::Identity(n, n);
  if (p.E.rows()) {
    Eigen::JacobiSVD<Mat> svd(p.E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    svd.setThreshold(1e-12);
    u += svd.solve(p.e - p.E * u);
    const int rank = static_cast<int>(svd.rank());
    Z = svd.matrixV().rightCols(n - rank);
  }
  auto feasible = [&](const Vec& x) {
    for (const auto& c : p.cons)
      if (!(c.value(x) < 0.0)) return false;
    return true;
  };
  auto objective = [&](const Vec& x, double t) {
    double f = t * (0.5 * x.dot(p.H * x) + p.h.dot(x));
    for (const auto& c : p.cons) f -= std::log(-c.value(x));
    return f;
  };
  for (double t = 1.0; t <= final_t * 10.0; t *= 8.0) {
    for (int it = 0; it < 200; ++it) {
      Vec g = t * (p.H * u + p.h);
      Mat Hs = t * p.H;
      for (const auto& c : p.cons) {
        const double v = c.value(u);
        const Vec gc = c.grad(u);
        g -= gc / v;
        Hs += gc * gc.transpose() / (v * v) - c.Q / v;
      }
      const Vec gz = Z.transpose() * g;
      const Mat Hz = Z.transpose() * Hs * Z;
      // Scale to unit diagonal before factoring.
      const Vec d = Hz.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
      const Vec dz = d.asDiagonal() * Mat(d.asDiagonal() * Hz * d.asDiagonal()).ldlt().solve(-(d.asDiagonal() * gz));
      const Vec du = Z * dz;
      const double dec = -gz.dot(dz);
      if (!(dec > 1e-20)) break;
      double step = 1.0;
      const double f0 = objective(u, t);
      while (step > 1e-20) {
        const Vec cand = u + step * du;
        if (feasible(cand) && objective(cand, t) <= f0 - 0.25 * step * dec) break;
        step *= 0.5;
      }
      if (step <= 1e-20) break;
      u += step * du;
    }
    if (m / t < 1e-14) break;
  }
  return u;
}

/// Euclidean projection onto {f^2 + g^2 <= v l, v, l >= 0} via the multiplier equation in the
/// original coordinates: (f, g) / (1 + 2mu), v = (v0 + mu l0) / (1 - mu^2), l = (l0 + mu v0) / (1 - mu^2).
inline std::array<double, 4> rotated_cone_kkt(const std::array<double, 4>& p) {
  const auto [f0, g0, v0, l0] = p;
  if (f0 * f0 + g0 * g0 <= v0 * l0 && v0 >= 0 && l0 >= 0) return p;
  auto dist = [&](const std::array<double, 4>& c) {
    double d = 0;
    for (int i = 0; i < 4; ++i) d += (c[i] - p[i]) * (c[i] - p[i]);
    return d;
  };
  std::vector<std::array<double, 4>> cands;
  cands.push_back({0, 0, 0, 0});
  cands.push_back({0, 0, std::max(v0, 0.0), 0});
  cands.push_back({0, 0, 0, std::max(l0, 0.0)});
  const double r2 = f0 * f0 + g0 * g0;
  auto at = [&](double mu) {
    const double k = 1.0 / (1.0 + 2.0 * mu);
    const double den = 1.0 - mu * mu;
    return std::array<double, 4>{f0 * k, g0 * k, (v0 + mu * l0) / den, (l0 + mu * v0) / den};
  };
  auto gap = [&](double mu) {
    const auto c = at(mu);
    return c[0] * c[0] + c[1] * c[1] - c[2] * c[3];
  };
  auto bisect = [&](double lo, double hi) {
    const bool up = gap(lo) < 0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      ((gap(mid) < 0) == up ? lo : hi) = mid;
    }
    const auto c = at(0.5 * (lo + hi));
    if (c[2] >= 0 && c[3] >= 0) cands.push_back(c);
  };
  // Roots of the constraint along mu in (0,1) and (1,inf).
  for (const bool below : {true, false}) {
    double prev_mu = 0, prev_gap = 0;
    for (int i = 0; i <= 16000; ++i) {
      const double s = -40.0 + 80.0 * i / 16000.0;
      const double mu = below ? 1.0 / (1.0 + std::exp(-s)) : 1.0 + std::exp(s);
      const double gv = gap(mu);
      if (i > 0 && (gv > 0) != (prev_gap > 0)) bisect(prev_mu, mu);
      prev_mu = mu;
      prev_gap = gv;
    }
  }
  if (gap(1e-300) <= 0) {
    const auto c = at(0.0);
    if (c[2] >= 0 && c[3] >= 0) cands.push_back(c);
  }
  if (std::abs(v0 + l0) <= 1e-300 && r2 > 0) {  // multiplier exactly 1
    const double l = 0.5 * (-v0 + std::sqrt(v0 * v0 + 4.0 * r2 / 9.0));
    cands.push_back({f0 / 3.0, g0 / 3.0, l + v0, l});
  }
  std::array<double, 4> best = cands.front();
  for (const auto& c : cands)
    if (c[0] * c[0] + c[1] * c[1] <= c[2] * c[3] * (1 + 1e-12) + 1e-15 && c[2] >= 0 && c[3] >= 0 &&
        dist(c) < dist(best))
      best = c;
  return best;
}

/// Energy-constrained box projection by bisection on the scalar multiplier.
inline std::pair<std::vector<double>, double> energy_bisection(const std::vector<double>& c,
                                                               const std::vector<double>& w,
                                                               const std::vector<double>& lo,
                                                               const std::vector<double>& hi, double energy) {
  auto at = [&](double mu) {
    std::vector<double> x(c.size());
    for (size_t t = 0; t < c.size(); ++t) x[t] = std::clamp(c[t] + mu / w[t], lo[t], hi[t]);
    return x;
  };
  auto sum = [](const std::vector<double>& x) {
    double s = 0;
    for (double v : x) s += v;
    return s;
  };
  if (sum(at(0.0)) >= energy) return {at(0.0), 0.0};
  double a = 0.0, b = 1.0;
  while (sum(at(b)) < energy) b *= 2.0;
  for (int i = 0; i < 300; ++i) {
    const double mid = 0.5 * (a + b);
    (sum(at(mid)) < energy ? a : b) = mid;
  }
  return {at(b), b};
}

/// Weighted projection onto the production triangle: interior test, else the best of the three
/// edge minimisers.
inline std::array<double, 2> production_mesh(double p, double q, double wp, double wq, double cap, double rmin,
                                             double rmax) {
  if (cap <= 0) return {0, 0};
  if (p >= 0 && p <= cap && q >= rmin * p && q <= rmax * p) return {p, q};
  std::array<double, 2> best{0, 0};
  double bd = std::numeric_limits<double>::infinity();
  auto consider = [&](double a, double b) {
    const double d = wp * (a - p) * (a - p) + wq * (b - q) * (b - q);
    if (d < bd) {
      bd = d;
      best = {a, b};
    }
  };
  // Each edge: minimise the convex 1-D quadratic by golden-section search.
  auto edge = [&](double ax, double ay, double bx, double by) {
    double lo = 0, hi = 1;
    auto f = [&](double s) {
      const double a = ax + s * (bx - ax), b = ay + s * (by - ay);
      return wp * (a - p) * (a - p) + wq * (b - q) * (b - q);
    };
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int i = 0; i < 200; ++i) {
      const double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
      (f(m1) < f(m2) ? hi : lo) = (f(m1) < f(m2) ? m2 : m1);
    }
    const double s = 0.5 * (lo + hi);
    consider(ax + s * (bx - ax), ay + s * (by - ay));
  };
  edge(0, 0, cap, rmin * cap);
  edge(0, 0, cap, rmax * cap);
  edge(cap, rmin * cap, cap, rmax * cap);
  return best;
}

}  // namespace oracle
