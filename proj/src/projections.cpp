#include "dlmp/projections.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dlmp {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;

// Projects (z0, s0) onto {(z, s) : |D z| <= s} with D = diag(sqrt2, sqrt2, 1).
void project_scaled_cone(const double z0[3], double s0, double z[3], double& s) {
  static constexpr double d2[3] = {2.0, 2.0, 1.0};
  double dz = 0.0;
  for (int i = 0; i < 3; ++i) dz += d2[i] * z0[i] * z0[i];
  dz = std::sqrt(dz);
  if (dz <= s0) {
    for (int i = 0; i < 3; ++i) z[i] = z0[i];
    s = s0;
    return;
  }
  if (s0 <= 0.0) {
    double polar = 0.0;
    for (int i = 0; i < 3; ++i) polar += z0[i] * z0[i] / d2[i];
    if (polar <= s0 * s0) {
      z[0] = z[1] = z[2] = 0.0;
      s = 0.0;
      return;
    }
  }
  // psi(s) = sum d_i^2 z0_i^2 / (s + (s - s0) d_i^2)^2 - 1 is decreasing on the bracket.
  auto psi = [&](double t, double* deriv) {
    double val = -1.0, der = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double den = t + (t - s0) * d2[i];
      const double num = d2[i] * z0[i] * z0[i];
      val += num / (den * den);
      der -= 2.0 * num * (1.0 + d2[i]) / (den * den * den);
    }
    if (deriv) *deriv = der;
    return val;
  };
  double lo = std::max(s0, 0.0);
  double hi = std::max(dz, s0);
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    double der = 0.0;
    const double val = psi(t, &der);
    if (val > 0.0)
      lo = t;
    else
      hi = t;
    if (val == 0.0 || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
    double next = t - val / der;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= std::numeric_limits<double>::epsilon() * t) {
      t = next;
      break;
    }
    t = next;
  }
  s = t;
  for (int i = 0; i < 3; ++i) z[i] = z0[i] * t / (t + (t - s0) * d2[i]);
}

double weighted_dist(double p, double q, double a, double b, double wp, double wq) {
  return wp * (p - a) * (p - a) + wq * (q - b) * (q - b);
}

// Weighted projection of (p, q) onto the segment from A to B.
std::array<double, 2> project_segment(double p, double q, double ax, double ay, double bx, double by,
                                      double wp, double wq) {
  const double dx = bx - ax, dy = by - ay;
  const double den = wp * dx * dx + wq * dy * dy;
  if (den <= 0.0) return {ax, ay};
  const double s = std::clamp((wp * (p - ax) * dx + wq * (q - ay) * dy) / den, 0.0, 1.0);
  return {ax + s * dx, ay + s * dy};
}

}  // namespace

ConePoint project_rotated_soc(const ConePoint& point) {
  const auto [f, g, v, l] = point;
  if (f * f + g * g <= v * l && v >= 0.0 && l >= 0.0) return point;
  if (f == 0.0 && g == 0.0) return {0.0, 0.0, std::max(v, 0.0), std::max(l, 0.0)};
  const double z0[3] = {f, g, (v - l) / kSqrt2};
  const double s0 = (v + l) / kSqrt2;
  double z[3], s;
  project_scaled_cone(z0, s0, z, s);
  return {z[0], z[1], std::max((s + z[2]) / kSqrt2, 0.0), std::max((s - z[2]) / kSqrt2, 0.0)};
}

std::array<double, 2> project_disk(double a, double b, double radius) {
  const double n = std::hypot(a, b);
  if (n <= radius) return {a, b};
  const double k = radius / n;
  return {a * k, b * k};
}

std::array<double, 2> project_production(double p, double q, double wp, double wq, double cap,
                                         double rho_min, double rho_max) {
  if (cap <= 0.0) return {0.0, 0.0};
  if (p >= 0.0 && p <= cap && q >= rho_min * p && q <= rho_max * p) return {p, q};
  struct Edge {
    double ax, ay, bx, by;
    double ratio;  // NaN unless the edge lies on q = ratio * p
  };
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const Edge edges[3] = {{0.0, 0.0, cap, rho_min * cap, rho_min},
                         {0.0, 0.0, cap, rho_max * cap, rho_max},
                         {cap, rho_min * cap, cap, rho_max * cap, nan}};
  std::array<double, 2> best{0.0, 0.0};
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& e : edges) {
    auto c = project_segment(p, q, e.ax, e.ay, e.bx, e.by, wp, wq);
    if (!std::isnan(e.ratio)) c[1] = e.ratio * c[0];
    const double d = weighted_dist(p, q, c[0], c[1], wp, wq);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

EnergyProjection project_energy_box(const std::vector<double>& c, const std::vector<double>& w,
                                    const std::vector<double>& lo, const std::vector<double>& hi,
                                    double energy) {
  const size_t n = c.size();
  auto at = [&](double mu) {
    std::vector<double> x(n);
    for (size_t t = 0; t < n; ++t) x[t] = std::clamp(c[t] + mu / w[t], lo[t], hi[t]);
    return x;
  };
  auto total = [](const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  };
  EnergyProjection out;
  out.x = at(0.0);
  double s_prev = total(out.x);
  if (s_prev >= energy) return out;

  std::vector<double> bps;
  for (size_t t = 0; t < n; ++t)
    for (double b : {w[t] * (lo[t] - c[t]), w[t] * (hi[t] - c[t])})
      if (b > 0.0) bps.push_back(b);
  std::sort(bps.begin(), bps.end());
  bps.erase(std::unique(bps.begin(), bps.end()), bps.end());

  double mu_prev = 0.0;
  for (double mu : bps) {
    const double s = total(at(mu));
    if (s >= energy) {
      const double mid = 0.5 * (mu_prev + mu);
      double slope = 0.0;
      for (size_t t = 0; t < n; ++t) {
        const double u = c[t] + mid / w[t];
        if (u > lo[t] && u < hi[t]) slope += 1.0 / w[t];
      }
      out.multiplier = slope > 0.0 ? mu_prev + (energy - s_prev) / slope : mu;
      out.multiplier = std::clamp(out.multiplier, mu_prev, mu);
      out.x = at(out.multiplier);
      return out;
    }
    mu_prev = mu;
    s_prev = s;
  }
  throw std::invalid_argument("energy projection: demand exceeds the sum of upper bounds");
}

LaProx::LaProx(LaLayout layout, std::vector<FlexibilityProfile> profiles)
    : layout_(std::move(layout)), profiles_(std::move(profiles)), multipliers_(profiles_.size(), 0.0) {
  if (profiles_.size() != layout_.buses.size())
    throw std::invalid_argument("LaProx: one profile per managed bus required");
}

ProxResult LaProx::solve(const Vec& anchor, const Vec& linear, const Metric& metric, double) {
  if (!metric.is_diagonal()) throw std::invalid_argument("LaProx: diagonal metric required");
  const Vec& m = metric.diagonal;
  const Vec target = anchor - linear.cwiseQuotient(m);
  const int T = layout_.horizon;
  ProxResult out;
  out.x.resize(layout_.dim());
  for (size_t j = 0; j < profiles_.size(); ++j) {
    const auto& prof = profiles_[j];
    const int jj = static_cast<int>(j);
    std::vector<double> c(T), w(T);
    for (int t = 0; t < T; ++t) {
      c[t] = target[layout_.pc(jj, t)];
      w[t] = m[layout_.pc(jj, t)];
    }
    auto ep = project_energy_box(c, w, prof.p_min, prof.p_max, prof.energy);
    multipliers_[j] = ep.multiplier;
    for (int t = 0; t < T; ++t) {
      out.x[layout_.pc(jj, t)] = ep.x[t];
      const int ip = layout_.pp(jj, t), iq = layout_.qp(jj, t);
      const auto pq = project_production(target[ip], target[iq], m[ip], m[iq], prof.prod_max[t],
                                         prof.rho_min[t], prof.rho_max[t]);
      out.x[ip] = pq[0];
      out.x[iq] = pq[1];
    }
  }
  return out;
}

double LaProx::violation(const Vec& x) const {
  double v = 0.0;
  for (size_t j = 0; j < profiles_.size(); ++j) {
    const auto& prof = profiles_[j];
    const int jj = static_cast<int>(j);
    double sum = 0.0;
    for (int t = 0; t < layout_.horizon; ++t) {
      const double pc = x[layout_.pc(jj, t)];
      const double pp = x[layout_.pp(jj, t)];
      const double qp = x[layout_.qp(jj, t)];
      sum += pc;
      v = std::max({v, prof.p_min[t] - pc, pc - prof.p_max[t], -pp, pp - prof.prod_max[t],
                    prof.rho_min[t] * pp - qp, qp - prof.rho_max[t] * pp});
    }
    v = std::max(v, prof.energy - sum);
  }
  return v;
}

DsoProx::DsoProx(const OpfModel& model, DsoProxOptions options) : layout_(model.dso), options_(options) {
  const int N = layout_.buses, T = layout_.horizon;
  const auto& topo = model.topology;
  const auto& inst = model.instance;
  using Triplet = Eigen::Triplet<double>;

  std::vector<Triplet> kt;
  int row = 0;
  for (int k = 0; k < N; ++k) {
    const Bus& bus = inst.bus(topo.bus_ids[static_cast<size_t>(k)]);
    for (int t = 0; t < T; ++t) {
      const int f = layout_.f(k, t), g = layout_.g(k, t), v = layout_.v(k, t), l = layout_.l(k, t);
      cells_.push_back({row, bus.s_max, bus.r, bus.x, bus.v_min, bus.v_max});
      kt.emplace_back(row + 0, f, 1.0);
      kt.emplace_back(row + 1, g, 1.0);
      kt.emplace_back(row + 2, v, 1.0);
      kt.emplace_back(row + 3, l, 1.0);
      kt.emplace_back(row + 4, f, 1.0);
      kt.emplace_back(row + 5, g, 1.0);
      kt.emplace_back(row + 6, f, 1.0);
      kt.emplace_back(row + 6, l, -bus.r);
      kt.emplace_back(row + 7, g, 1.0);
      kt.emplace_back(row + 7, l, -bus.x);
      kt.emplace_back(row + 8, v, 1.0);
      row += 9;
    }
  }
  root_rows_ = row;
  for (int t = 0; t < T; ++t) kt.emplace_back(row++, layout_.p0(t), 1.0);
  K_.resize(row, layout_.dim());
  K_.setFromTriplets(kt.begin(), kt.end());
  Kt_ = K_.transpose();

  // Ohm's law per (k, t), then the root active and reactive balance per t.
  std::vector<Triplet> et;
  const int erows = N * T + 2 * T;
  e_ = Vec::Zero(erows);
  int er = 0;
  for (int k = 0; k < N; ++k) {
    const Bus& bus = inst.bus(topo.bus_ids[static_cast<size_t>(k)]);
    const int parent = topo.parent_index[static_cast<size_t>(k)];
    for (int t = 0; t < T; ++t, ++er) {
      et.emplace_back(er, layout_.v(k, t), 1.0);
      et.emplace_back(er, layout_.f(k, t), -2.0 * bus.r);
      et.emplace_back(er, layout_.g(k, t), -2.0 * bus.x);
      et.emplace_back(er, layout_.l(k, t), bus.r * bus.r + bus.x * bus.x);
      if (parent >= 0)
        et.emplace_back(er, layout_.v(parent, t), -1.0);
      else
        e_[er] = inst.v0;
    }
  }
  for (int t = 0; t < T; ++t, ++er) {
    et.emplace_back(er, layout_.p0(t), 1.0);
    for (int m : topo.root_children) {
      const Bus& child = inst.bus(topo.bus_ids[static_cast<size_t>(m)]);
      et.emplace_back(er, layout_.f(m, t), -1.0);
      et.emplace_back(er, layout_.l(m, t), child.r);
    }
  }
  for (int t = 0; t < T; ++t, ++er) {
    et.emplace_back(er, layout_.q0(t), 1.0);
    for (int m : topo.root_children) {
      const Bus& child = inst.bus(topo.bus_ids[static_cast<size_t>(m)]);
      et.emplace_back(er, layout_.g(m, t), -1.0);
      et.emplace_back(er, layout_.l(m, t), child.x);
    }
  }
  E_.resize(erows, layout_.dim());
  E_.setFromTriplets(et.begin(), et.end());
  E_.prune(0.0);
}

std::unique_ptr<BlockProx> DsoProx::clone() const {
  auto copy = std::make_unique<DsoProx>(*this);
  copy->reset();
  return copy;
}

void DsoProx::reset() {
  z_.resize(0);
  w_.resize(0);
}

void DsoProx::project_sets(Vec& z) const {
  for (const auto& c : cells_) {
    const int r = c.row;
    const auto cone = project_rotated_soc({z[r], z[r + 1], z[r + 2], z[r + 3]});
    for (int i = 0; i < 4; ++i) z[r + i] = cone[static_cast<size_t>(i)];
    const auto send = project_disk(z[r + 4], z[r + 5], c.s_max);
    z[r + 4] = send[0];
    z[r + 5] = send[1];
    const auto recv = project_disk(z[r + 6], z[r + 7], c.s_max);
    z[r + 6] = recv[0];
    z[r + 7] = recv[1];
    z[r + 8] = std::clamp(z[r + 8], c.v_min, c.v_max);
  }
  for (Eigen::Index i = root_rows_; i < z.size(); ++i) z[i] = std::min(z[i], 0.0);
}

double DsoProx::set_violation(const Vec& x) const {
  double v = 0.0;
  for (size_t i = 0; i < cells_.size(); ++i) {
    const auto& c = cells_[i];
    const int k = static_cast<int>(i) / layout_.horizon, t = static_cast<int>(i) % layout_.horizon;
    const double f = x[layout_.f(k, t)], g = x[layout_.g(k, t)];
    const double vv = x[layout_.v(k, t)], l = x[layout_.l(k, t)];
    v = std::max({v, f * f + g * g - vv * l, -vv, -l, std::hypot(f, g) - c.s_max,
                  std::hypot(f - c.r * l, g - c.x * l) - c.s_max, c.v_min - vv, vv - c.v_max});
  }
  for (int t = 0; t < layout_.horizon; ++t) v = std::max(v, x[layout_.p0(t)]);
  return v;
}

double DsoProx::violation(const Vec& x) const {
  if (x.size() != layout_.dim()) throw std::invalid_argument("DsoProx: dimension mismatch");
  const double affine = E_.rows() ? (E_ * x - e_).lpNorm<Eigen::Infinity>() : 0.0;
  return std::max(affine, set_violation(x));
}

const DsoProx::Factor& DsoProx::factor_for(const Metric& metric) {
  if (factor_) {
    const Metric& m = factor_->metric;
    const bool same = m.is_diagonal() == metric.is_diagonal() &&
                      (m.is_diagonal() ? m.diagonal == metric.diagonal : m.dense == metric.dense);
    if (same) return *factor_;
  }
  auto f = std::make_shared<Factor>();
  f->metric = metric;
  const Mat M = metric.as_dense();
  f->rho = options_.rho_scale * M.diagonal().mean();
  const Mat H = M + f->rho * Mat(Kt_ * K_);
  Eigen::LLT<Mat> llt(H);
  if (llt.info() != Eigen::Success) throw std::runtime_error("DsoProx: metric is not positive definite");
  const Mat Et = Mat(E_.transpose());
  const Mat HiEt = llt.solve(Et);
  const Mat S = Mat(E_) * HiEt;
  Eigen::LDLT<Mat> sl(S);
  const Mat Hi = llt.solve(Mat::Identity(H.rows(), H.cols()));
  f->G = Hi - HiEt * sl.solve(HiEt.transpose());
  f->g = HiEt * sl.solve(e_);
  if (factor_ && w_.size()) w_ *= factor_->rho / f->rho;
  factor_ = std::move(f);
  return *factor_;
}

ProxResult DsoProx::solve(const Vec& anchor, const Vec& linear, const Metric& metric, double tol) {
  if (anchor.size() != layout_.dim() || linear.size() != layout_.dim() || metric.dim() != layout_.dim())
    throw std::invalid_argument("DsoProx: dimension mismatch");
  ProxResult out;
  if (linear.lpNorm<Eigen::Infinity>() == 0.0 && violation(anchor) <= 1e-14) {
    out.x = anchor;
    return out;
  }
  const Factor& fac = factor_for(metric);
  const Vec base = fac.G * (metric.apply(anchor) - linear) + fac.g;
  if (z_.size() != K_.rows()) {
    z_ = K_ * anchor;
    project_sets(z_);
    w_ = Vec::Zero(K_.rows());
  }
  const double alpha = options_.relaxation;
  Vec u, Ku, zhat, z_old;
  out.converged = false;
  for (int it = 1; it <= options_.max_iterations; ++it) {
    u = base + fac.G * (fac.rho * (Kt_ * (z_ - w_)));
    Ku = K_ * u;
    zhat = alpha * Ku + (1.0 - alpha) * z_;
    z_old = z_;
    z_ = zhat + w_;
    project_sets(z_);
    w_ += zhat - z_;
    out.iterations = it;
    out.residual = std::max((Ku - z_).lpNorm<Eigen::Infinity>(), (z_ - z_old).lpNorm<Eigen::Infinity>());
    if (out.residual <= tol) {
      out.converged = true;
      break;
    }
  }
  out.x = u;
  return out;
}

}  // namespace dlmp
