#include <gtest/gtest.h>

#include <cstring>
#include <sstream>

#include <json.hpp>

#include "dlmp/ppdlmp.hpp"
#include "support.hpp"

using namespace dlmp;
using testing_support::bus15_model;

namespace {

struct Setup {
  OpfModel model;
  BlockProblem problem;
  StepSizes steps;
  std::vector<std::string> names;
};

Setup make_setup(const NetworkInstance& inst, double sigma = 1.0) {
  Setup s{assemble(inst), {}, {}, {}};
  s.problem = build_block_problem(s.model);
  const auto sampling = make_sampling("ppdlmp", s.problem.num_blocks());
  s.steps = stepsize_matrices(s.problem, smoothness_matrix(s.problem), sigma, auto_tau(s.problem, sigma, sampling),
                              sampling);
  for (int a = 1; a < s.problem.num_blocks(); ++a) s.names.push_back(s.problem.blocks[a].name);
  return s;
}

const Setup& bus15_setup() {
  static const Setup s = make_setup(testing_support::bus15());
  return s;
}

}  // namespace

TEST(Ppdlmp, ZeroIterationsOnlyInitialMessages) {
  const auto& s = bus15_setup();
  SimulationOptions o;
  o.iterations = 0;
  const auto r = simulate(s.problem, s.steps, o);
  EXPECT_EQ(r.log.count(MessageKind::InitBid), 14u);
  EXPECT_EQ(r.log.count(MessageKind::DlmpBroadcast), 1u);
  EXPECT_EQ(r.log.count(MessageKind::BidDelta), 0u);
  const Vec y0 = s.steps.sigma * s.problem.residual(s.problem.initial_point());
  EXPECT_LE((r.log.messages().back().payload - y0).lpNorm<Eigen::Infinity>(), 1e-14);
}

TEST(Ppdlmp, PayloadsAreDualSized) {
  const auto& s = bus15_setup();
  SimulationOptions o;
  o.iterations = 40;
  const auto r = simulate(s.problem, s.steps, o);
  for (const auto& m : r.log.messages()) EXPECT_EQ(m.payload.size(), 56);
  EXPECT_EQ(r.log.count(MessageKind::BidDelta), 40u);
  EXPECT_EQ(r.log.count(MessageKind::DlmpBroadcast), 41u);
  const auto audit = privacy_audit(r.log, 56, s.names);
  EXPECT_TRUE(audit.passed);
  EXPECT_EQ(audit.counts.at("InitBid"), 14u);
}

TEST(Ppdlmp, GammaConsistency) {
  const auto& s = bus15_setup();
  SimulationOptions o;
  o.iterations = 200;
  const auto r = simulate(s.problem, s.steps, o);
  EXPECT_LE(r.gamma_consistency, 1e-10);
}

TEST(Ppdlmp, UnsampledAggregatorsFreeze) {
  const auto& s = bus15_setup();
  SimulationOptions o;
  o.iterations = 60;
  o.keep_history = true;
  const auto r = simulate(s.problem, s.steps, o);
  ASSERT_EQ(r.sampled.size(), 60u);
  for (int k = 0; k < 60; ++k)
    for (int a = 1; a < s.problem.num_blocks(); ++a) {
      if (a == r.sampled[k]) continue;
      const Vec& before = r.x_history[k][a];
      const Vec& after = r.x_history[k + 1][a];
      ASSERT_EQ(before.size(), after.size());
      EXPECT_EQ(std::memcmp(before.data(), after.data(), sizeof(double) * before.size()), 0);
    }
}

TEST(Ppdlmp, EquivalenceOnRandomInstances) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = make_setup(random_instance(3, 2, seed));
    const auto rep = equivalence_harness(s.problem, s.steps, 100, seed);
    EXPECT_LE(rep.max(), 1e-10) << "seed " << seed;
  }
}

TEST(Ppdlmp, EquivalenceAtZeroIterations) {
  const auto s = make_setup(random_instance(3, 1, 4));
  EXPECT_EQ(equivalence_harness(s.problem, s.steps, 0, 1).max(), 0.0);
}

TEST(Ppdlmp, DeterministicForSeed) {
  const auto s = make_setup(random_instance(4, 1, 2));
  SimulationOptions o;
  o.iterations = 50;
  const auto a = simulate(s.problem, s.steps, o), b = simulate(s.problem, s.steps, o);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.sampled, b.sampled);
}

TEST(Audit, EmptyLogFails) {
  const auto rep = privacy_audit(MessageLog{}, 56, bus15_setup().names);
  EXPECT_FALSE(rep.passed);
  ASSERT_FALSE(rep.violations.empty());
  EXPECT_NE(rep.violations[0].find("empty"), std::string::npos);
}

TEST(Audit, InjectedPrimalBlockFails) {
  const auto& s = bus15_setup();
  SimulationOptions o;
  o.iterations = 5;
  auto r = simulate(s.problem, s.steps, o);
  MessageLog tampered = r.log;
  tampered.append({MessageKind::BidDelta, 5, s.names[0], kDsoName, s.problem.blocks[1].x0});
  const auto rep = privacy_audit(tampered, 56, s.names);
  EXPECT_FALSE(rep.passed);
  bool named = false;
  for (const auto& v : rep.violations) named |= v.find("payload dimension") != std::string::npos;
  EXPECT_TRUE(named);
}

TEST(Audit, WrongRouteFails) {
  const auto& s = bus15_setup();
  SimulationOptions o;
  o.iterations = 2;
  auto r = simulate(s.problem, s.steps, o);
  MessageLog tampered = r.log;
  tampered.append({MessageKind::DlmpBroadcast, 3, s.names[0], kBroadcast, Vec::Zero(56)});
  tampered.append({MessageKind::BidDelta, 3, s.names[0], s.names[1], Vec::Zero(56)});
  const auto rep = privacy_audit(tampered, 56, s.names);
  EXPECT_FALSE(rep.passed);
  EXPECT_GE(rep.violations.size(), 2u);
}

TEST(Audit, MissingInitialBidFails) {
  const auto& s = bus15_setup();
  SimulationOptions o;
  o.iterations = 1;
  const auto r = simulate(s.problem, s.steps, o);
  MessageLog partial;
  bool skipped = false;
  for (const auto& m : r.log.messages()) {
    if (!skipped && m.kind == MessageKind::InitBid) {
      skipped = true;
      continue;
    }
    partial.append(m);
  }
  EXPECT_FALSE(privacy_audit(partial, 56, s.names).passed);
}

TEST(MessageLog, JsonLines) {
  const auto& s = bus15_setup();
  SimulationOptions o;
  o.iterations = 3;
  const auto r = simulate(s.problem, s.steps, o);
  std::ostringstream plain, full;
  r.log.write_jsonl(plain, false);
  r.log.write_jsonl(full, true);
  std::istringstream a(plain.str()), b(full.str());
  std::string la, lb;
  size_t n = 0;
  while (std::getline(a, la) && std::getline(b, lb)) {
    const auto ja = nlohmann::json::parse(la), jb = nlohmann::json::parse(lb);
    const auto& m = r.log.messages()[n];
    EXPECT_EQ(ja.at("kind"), to_string(m.kind));
    EXPECT_EQ(ja.at("k"), m.k);
    EXPECT_EQ(ja.at("dim"), 56);
    EXPECT_FALSE(ja.contains("payload"));
    EXPECT_EQ(ja.at("digest").get<std::string>().size(), 16u);
    ASSERT_TRUE(jb.contains("payload"));
    EXPECT_EQ(jb.at("payload").get<std::vector<double>>().size(), 56u);
    ++n;
  }
  EXPECT_EQ(n, r.log.messages().size());
}

TEST(MessageLog, DigestDistinguishesPayloads) {
  Vec a = Vec::Zero(4), b = Vec::Zero(4);
  b[2] = 1e-300;
  EXPECT_NE(payload_digest(a), payload_digest(b));
  EXPECT_EQ(payload_digest(a), payload_digest(Vec::Zero(4)));
  for (auto k : {MessageKind::InitBid, MessageKind::DlmpBroadcast, MessageKind::BidDelta})
    EXPECT_EQ(parse_message_kind(to_string(k)), k);
  EXPECT_FALSE(parse_message_kind("Hello").has_value());
}
