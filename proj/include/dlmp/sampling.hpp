#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlmp/problem.hpp"

namespace dlmp {

/// Counter-based generator: the k-th draw of a stream depends only on (seed, k).
std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t k);
/// Uniform double in [0, 1) from the k-th draw.
double counter_uniform(std::uint64_t seed, std::uint64_t k);

/// A probability law over subsets of blocks {0, ..., blocks-1}.
class SamplingScheme {
 public:
  SamplingScheme(std::string name, int blocks, std::vector<std::vector<int>> subsets,
                 std::vector<double> probabilities);

  const std::string& name() const { return name_; }
  int blocks() const { return blocks_; }
  const std::vector<std::vector<int>>& subsets() const { return subsets_; }
  const std::vector<double>& probabilities() const { return probs_; }

  /// p_i = P(i in I).
  const Vec& marginals() const { return marginal_; }
  /// p_ij = P(i, j in I).
  const Mat& pairwise() const { return pairwise_; }
  /// Diagonal of P: 1 / p_i.
  Vec weights() const { return marginal_.cwiseInverse(); }
  /// max_i |E[1{i in I} / p_i] - 1|, zero up to rounding for a valid scheme.
  double unbiasedness_error() const;

  /// Subset drawn at iteration k of the stream `seed`.
  int draw_index(std::uint64_t seed, std::uint64_t k) const;
  const std::vector<int>& draw(std::uint64_t seed, std::uint64_t k) const { return subsets_[draw_index(seed, k)]; }

 private:
  std::string name_;
  int blocks_;
  std::vector<std::vector<int>> subsets_;
  std::vector<double> probs_;
  std::vector<double> cumulative_;
  Vec marginal_;
  Mat pairwise_;
};

/// Named schemes: "ppdlmp" (subsets {0, a}, a = 1..blocks-1, each with probability
/// 1/(blocks-1)), "full" (all blocks every iteration) and "uniform" (one block, uniform).
SamplingScheme make_sampling(const std::string& name, int blocks);

/// Dense Sigma with blocks p_ij A_i^T A_j / (p_i p_j).
Mat sigma_matrix(const BlockProblem& problem, const SamplingScheme& sampling);

}  // namespace dlmp
