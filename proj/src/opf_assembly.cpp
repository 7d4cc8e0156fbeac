#include "dlmp/opf_assembly.hpp"

#include <ostream>
#include <stdexcept>

#include "dlmp/projections.hpp"

namespace dlmp {

namespace {

using Triplet = Eigen::Triplet<double>;

SpMat from_triplets(int rows, int cols, const std::vector<Triplet>& trips) {
  SpMat m(rows, cols);
  m.setFromTriplets(trips.begin(), trips.end());
  m.prune(0.0);
  return m;
}

}  // namespace

Vec CouplingSystem::rhs() const {
  Vec b = b0;
  for (const auto& ba : b_la) b += ba;
  return b;
}

OpfModel assemble(const NetworkInstance& instance) {
  validate(instance);
  OpfModel model;
  model.instance = instance;
  model.topology = build_topology(instance);
  model.partition = aggregator_partition(instance, model.topology);
  const int N = model.topology.size();
  const int T = instance.horizon;
  model.dso = DsoLayout{N, T};
  for (const auto& buses : model.partition.buses) model.las.push_back(LaLayout{buses, T});

  CouplingSystem& cs = model.coupling;
  cs.buses = N;
  cs.horizon = T;
  const int rows = 2 * N * T;
  const auto& topo = model.topology;

  std::vector<Triplet> trips;
  for (int k = 0; k < N; ++k) {
    const Bus& bus = instance.bus(topo.bus_ids[static_cast<size_t>(k)]);
    for (int t = 0; t < T; ++t) {
      const int ra = cs.active_row(k, t);
      const int rq = cs.reactive_row(k, t);
      trips.emplace_back(ra, model.dso.f(k, t), 1.0);
      trips.emplace_back(ra, model.dso.v(k, t), bus.g_shunt);
      trips.emplace_back(rq, model.dso.g(k, t), 1.0);
      trips.emplace_back(rq, model.dso.v(k, t), -bus.b_shunt);
      for (int m : topo.children[static_cast<size_t>(k)]) {
        const Bus& child = instance.bus(topo.bus_ids[static_cast<size_t>(m)]);
        trips.emplace_back(ra, model.dso.f(m, t), -1.0);
        trips.emplace_back(ra, model.dso.l(m, t), child.r);
        trips.emplace_back(rq, model.dso.g(m, t), -1.0);
        trips.emplace_back(rq, model.dso.l(m, t), child.x);
      }
    }
  }
  cs.A0 = from_triplets(rows, model.dso.dim(), trips);
  cs.b0 = Vec::Zero(rows);

  for (const auto& la : model.las) {
    trips.clear();
    for (size_t j = 0; j < la.buses.size(); ++j) {
      const int k = la.buses[j];
      const auto prof = instance.profile(topo.bus_ids[static_cast<size_t>(k)]);
      const int jj = static_cast<int>(j);
      for (int t = 0; t < T; ++t) {
        trips.emplace_back(cs.active_row(k, t), la.pc(jj, t), 1.0);
        trips.emplace_back(cs.active_row(k, t), la.pp(jj, t), -1.0);
        trips.emplace_back(cs.reactive_row(k, t), la.pc(jj, t), prof.tau_c);
        trips.emplace_back(cs.reactive_row(k, t), la.qp(jj, t), -1.0);
      }
    }
    cs.A_la.push_back(from_triplets(rows, la.dim(), trips));
    cs.b_la.push_back(Vec::Zero(rows));
  }
  return model;
}

CouplingSystem build_coupling(const NetworkInstance& instance) { return assemble(instance).coupling; }

DsoCost::DsoCost(DsoLayout layout, std::vector<PeriodCost> cost, double k_loss, std::vector<double> resistance)
    : layout_(layout), cost_(std::move(cost)), k_loss_(k_loss), r_(std::move(resistance)) {}

void DsoCost::check(const Vec& x0) const {
  if (x0.size() != layout_.dim())
    throw std::invalid_argument("DSO cost: expected dimension " + std::to_string(layout_.dim()) +
                                ", got " + std::to_string(x0.size()));
}

double DsoCost::value(const Vec& x0) const {
  check(x0);
  double c = 0.0;
  for (int t = 0; t < layout_.horizon; ++t) {
    const double gen = -x0[layout_.p0(t)];
    const auto& pc = cost_[static_cast<size_t>(t)];
    c += pc.linear * gen + pc.quadratic * gen * gen;
  }
  double loss = 0.0;
  for (int k = 0; k < layout_.buses; ++k)
    for (int t = 0; t < layout_.horizon; ++t) loss += r_[static_cast<size_t>(k)] * x0[layout_.l(k, t)];
  return c + k_loss_ * loss;
}

Vec DsoCost::gradient(const Vec& x0) const {
  check(x0);
  Vec g = Vec::Zero(x0.size());
  for (int t = 0; t < layout_.horizon; ++t) {
    const double gen = -x0[layout_.p0(t)];
    const auto& pc = cost_[static_cast<size_t>(t)];
    g[layout_.p0(t)] = -(pc.linear + 2.0 * pc.quadratic * gen);
  }
  for (int k = 0; k < layout_.buses; ++k)
    for (int t = 0; t < layout_.horizon; ++t) g[layout_.l(k, t)] = k_loss_ * r_[static_cast<size_t>(k)];
  return g;
}

Vec DsoCost::curvature(int dim) const {
  Vec c = Vec::Zero(dim);
  for (int t = 0; t < layout_.horizon; ++t) c[layout_.p0(t)] = 2.0 * cost_[static_cast<size_t>(t)].quadratic;
  return c;
}

std::shared_ptr<const BlockCost> dso_cost(const OpfModel& model) {
  std::vector<double> r;
  for (int id : model.topology.bus_ids) r.push_back(model.instance.bus(id).r);
  return std::make_shared<DsoCost>(model.dso, model.instance.cost, model.instance.k_loss, std::move(r));
}

std::shared_ptr<const BlockCost> la_cost(const OpfModel&, int) { return std::make_shared<ZeroCost>(); }

std::vector<Vec> smoothness_matrix(const BlockProblem& problem) {
  std::vector<Vec> out;
  for (const auto& b : problem.blocks) out.push_back(b.cost->curvature(b.dim));
  return out;
}

BlockProblem build_block_problem(const OpfModel& model) {
  BlockProblem problem;
  const auto& inst = model.instance;

  Block dso;
  dso.name = "DSO";
  dso.dim = model.dso.dim();
  dso.A = model.coupling.A0;
  dso.b = model.coupling.b0;
  dso.cost = dso_cost(model);
  auto dso_prox = std::make_shared<DsoProx>(model);
  // Flat start: every voltage at v0 and no flow; projected when v0 violates a voltage bound.
  Vec flat = Vec::Zero(dso.dim);
  for (int k = 0; k < model.dso.buses; ++k)
    for (int t = 0; t < model.dso.horizon; ++t) flat[model.dso.v(k, t)] = inst.v0;
  if (dso_prox->violation(flat) > 0.0) {
    auto scratch = dso_prox->clone();
    flat = scratch->solve(flat, Vec::Zero(dso.dim), Metric::identity(dso.dim), 1e-12).x;
  }
  dso.x0 = flat;
  dso.prox = dso_prox;
  problem.blocks.push_back(std::move(dso));

  for (size_t a = 0; a < model.las.size(); ++a) {
    const auto& layout = model.las[a];
    std::vector<FlexibilityProfile> profiles;
    for (int k : layout.buses) profiles.push_back(inst.profile(model.topology.bus_ids[static_cast<size_t>(k)]));
    Block la;
    la.name = "LA" + std::to_string(model.partition.ids[a]);
    la.dim = layout.dim();
    la.A = model.coupling.A_la[a];
    la.b = model.coupling.b_la[a];
    la.cost = la_cost(model, static_cast<int>(a));
    auto prox = std::make_shared<LaProx>(layout, std::move(profiles));
    auto scratch = prox->clone();
    la.x0 = scratch->solve(Vec::Zero(la.dim), Vec::Zero(la.dim), Metric::identity(la.dim), 0.0).x;
    la.prox = prox;
    problem.blocks.push_back(std::move(la));
  }
  return problem;
}

void write_triplets(std::ostream& out, const SpMat& m) {
  out << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
  out.precision(17);
  for (int c = 0; c < m.outerSize(); ++c)
    for (SpMat::InnerIterator it(m, c); it; ++it) out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

}  // namespace dlmp
