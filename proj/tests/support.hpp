#pragma once

#include <memory>
#include <random>
#include <string>

#include "dlmp/benchmark.hpp"
#include "dlmp/grid_model.hpp"
#include "dlmp/opf_assembly.hpp"
#include "dlmp/problem.hpp"

namespace testing_support {

using namespace dlmp;

inline std::string data_path(const std::string& name) { return std::string(DLMP_DATA_DIR) + "/" + name; }

inline const NetworkInstance& bus15() {
  static const NetworkInstance inst = load_instance_file(data_path("bus15.json"));
  return inst;
}

inline const OpfModel& bus15_model() {
  static const OpfModel model = assemble(bus15());
  return model;
}

/// Random problem: `blocks` blocks of dimension `dim`, quadratic costs, dense random coupling.
/// With `boxed` every block lives in [-1, 1]^dim.
inline BlockProblem random_problem(int blocks, int rows, int dim, unsigned seed, bool boxed = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u(0.5, 2.0);
  BlockProblem p;
  for (int i = 0; i < blocks; ++i) {
    Block b;
    b.name = "B" + std::to_string(i);
    b.dim = dim;
    Mat A(rows, dim);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < dim; ++c) A(r, c) = n01(rng);
    b.A = A.sparseView();
    b.b = Vec::NullaryExpr(rows, [&] { return 0.3 * n01(rng); });
    Vec w(dim), c(dim);
    for (int j = 0; j < dim; ++j) {
      w[j] = u(rng);
      c[j] = 0.5 * n01(rng);
    }
    b.cost = std::make_shared<QuadraticCost>(w, c);
    if (boxed)
      b.prox = std::make_shared<BoxProx>(Vec::Constant(dim, -1.0), Vec::Constant(dim, 1.0));
    else
      b.prox = std::make_shared<BoxProx>(BoxProx::unconstrained(dim));
    b.x0 = Vec::Zero(dim);
    p.blocks.push_back(std::move(b));
  }
  return p;
}

/// min 0.5 (x1^2 + x2^2) s.t. x1 + x2 = 1, one scalar per block.
inline BlockProblem two_variable_qp() {
  BlockProblem p;
  for (int i = 0; i < 2; ++i) {
    Block b;
    b.name = "x" + std::to_string(i + 1);
    b.dim = 1;
    b.A = Mat::Ones(1, 1).sparseView();
    b.b = Vec::Constant(1, 0.5);
    b.cost = std::make_shared<QuadraticCost>(QuadraticCost::half_norm(1));
    b.prox = std::make_shared<BoxProx>(BoxProx::unconstrained(1));
    b.x0 = Vec::Zero(1);
    p.blocks.push_back(std::move(b));
  }
  return p;
}

/// Small radial instance: a chain 0-1-...-(buses-1), one period unless stated.
inline NetworkInstance chain_instance(int buses, int horizon = 1) {
  NetworkInstance inst;
  inst.name = "chain";
  inst.horizon = horizon;
  inst.v0 = 1.0;
  inst.k_loss = 0.0;
  for (int t = 0; t < horizon; ++t) inst.cost.push_back({1.0, 0.0});
  Bus root;
  root.id = 0;
  inst.buses.push_back(root);
  for (int i = 1; i < buses; ++i) {
    Bus b;
    b.id = i;
    b.parent = i - 1;
    b.r = 0.01;
    b.x = 0.02;
    b.s_max = 1.0;
    b.v_min = 0.81;
    b.v_max = 1.21;
    inst.buses.push_back(b);
  }
  return inst;
}

}  // namespace testing_support
