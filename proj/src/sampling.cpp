#include "dlmp/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dlmp {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t k) { return splitmix64(splitmix64(seed) ^ k); }

double counter_uniform(std::uint64_t seed, std::uint64_t k) {
  return static_cast<double>(counter_hash(seed, k) >> 11) * 0x1.0p-53;
}

SamplingScheme::SamplingScheme(std::string name, int blocks, std::vector<std::vector<int>> subsets,
                               std::vector<double> probabilities)
    : name_(std::move(name)), blocks_(blocks), subsets_(std::move(subsets)), probs_(std::move(probabilities)) {
  if (blocks_ < 1) throw std::invalid_argument("sampling: at least one block required");
  if (subsets_.size() != probs_.size() || subsets_.empty())
    throw std::invalid_argument("sampling: one probability per subset required");
  double total = 0.0;
  marginal_ = Vec::Zero(blocks_);
  pairwise_ = Mat::Zero(blocks_, blocks_);
  for (size_t s = 0; s < subsets_.size(); ++s) {
    if (probs_[s] < 0.0) throw std::invalid_argument("sampling: negative probability");
    auto& set = subsets_[s];
    std::sort(set.begin(), set.end());
    if (std::adjacent_find(set.begin(), set.end()) != set.end())
      throw std::invalid_argument("sampling: repeated block in a subset");
    for (int i : set) {
      if (i < 0 || i >= blocks_) throw std::invalid_argument("sampling: block index out of range");
      marginal_[i] += probs_[s];
      for (int j : set) pairwise_(i, j) += probs_[s];
    }
    total += probs_[s];
    cumulative_.push_back(total);
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("sampling: probabilities sum to " + std::to_string(total) + ", not 1");
  for (int i = 0; i < blocks_; ++i)
    if (!(marginal_[i] > 0.0))
      throw std::invalid_argument("sampling: block " + std::to_string(i) + " is never sampled");
}

double SamplingScheme::unbiasedness_error() const {
  Vec e = Vec::Zero(blocks_);
  for (size_t s = 0; s < subsets_.size(); ++s)
    for (int i : subsets_[s]) e[i] += probs_[s] / marginal_[i];
  return (e.array() - 1.0).abs().maxCoeff();
}

int SamplingScheme::draw_index(std::uint64_t seed, std::uint64_t k) const {
  if (subsets_.size() == 1) return 0;
  const double u = counter_uniform(seed, k) * cumulative_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return static_cast<int>(std::min<std::ptrdiff_t>(it - cumulative_.begin(), cumulative_.size() - 1));
}

SamplingScheme make_sampling(const std::string& name, int blocks) {
  std::vector<std::vector<int>> subsets;
  std::vector<double> probs;
  if (name == "ppdlmp") {
    if (blocks < 2) throw std::invalid_argument("ppdlmp sampling needs at least one aggregator");
    const int p = blocks - 1;
    for (int a = 1; a <= p; ++a) {
      subsets.push_back({0, a});
      probs.push_back(1.0 / p);
    }
  } else if (name == "full") {
    std::vector<int> all(static_cast<size_t>(blocks));
    for (int i = 0; i < blocks; ++i) all[static_cast<size_t>(i)] = i;
    subsets.push_back(std::move(all));
    probs.push_back(1.0);
  } else if (name == "uniform") {
    for (int i = 0; i < blocks; ++i) {
      subsets.push_back({i});
      probs.push_back(1.0 / blocks);
    }
  } else {
    throw std::invalid_argument("unknown sampling scheme '" + name + "'");
  }
  return SamplingScheme(name, blocks, std::move(subsets), std::move(probs));
}

Mat sigma_matrix(const BlockProblem& problem, const SamplingScheme& sampling) {
  const int n = problem.dim();
  Mat S = Mat::Zero(n, n);
  const Vec& p = sampling.marginals();
  const Mat& pij = sampling.pairwise();
  std::vector<Mat> A;
  for (const auto& b : problem.blocks) A.emplace_back(Mat(b.A));
  int ri = 0;
  for (int i = 0; i < problem.num_blocks(); ++i) {
    int cj = 0;
    for (int j = 0; j < problem.num_blocks(); ++j) {
      const int di = problem.blocks[static_cast<size_t>(i)].dim, dj = problem.blocks[static_cast<size_t>(j)].dim;
      if (pij(i, j) != 0.0)
        S.block(ri, cj, di, dj) = (pij(i, j) / (p[i] * p[j])) * A[static_cast<size_t>(i)].transpose() *
                                  A[static_cast<size_t>(j)];
      cj += dj;
    }
    ri += problem.blocks[static_cast<size_t>(i)].dim;
  }
  return S;
}

}  // namespace dlmp
