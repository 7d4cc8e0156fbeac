#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dlmp/diagnostics.hpp"
#include "dlmp/pd_solver.hpp"
#include "dlmp/problem.hpp"

namespace dlmp {

enum class MessageKind { InitBid, DlmpBroadcast, BidDelta };

std::string to_string(MessageKind kind);
std::optional<MessageKind> parse_message_kind(const std::string& name);

inline const std::string kDsoName = "DSO";
inline const std::string kBroadcast = "*";

struct Message {
  MessageKind kind = MessageKind::InitBid;
  int k = 0;
  std::string sender;
  std::string receiver;  // kBroadcast addresses every aggregator
  Vec payload;
};

/// FNV-1a over the little-endian bytes of the payload.
std::uint64_t payload_digest(const Vec& payload);

class MessageLog {
 public:
  void append(Message m) { messages_.push_back(std::move(m)); }
  const std::vector<Message>& messages() const { return messages_; }
  bool empty() const { return messages_.empty(); }
  std::size_t count(MessageKind kind) const;

  /// One JSON object per line: kind, k, sender, receiver, dim, digest and optionally payload.
  void write_jsonl(std::ostream& out, bool with_payload) const;

 private:
  std::vector<Message> messages_;
};

/// In-process transport: every posted message is logged, then queued for its receiver.
class Mailboxes {
 public:
  Mailboxes(MessageLog& log, std::vector<std::string> aggregators);
  void post(Message m);
  std::optional<Message> receive(const std::string& who);

 private:
  MessageLog* log_;
  std::vector<std::string> aggregators_;
  std::map<std::string, std::deque<Message>> boxes_;
};

/// The operator: owns x0, the DLMPs y and the bid accumulator gamma.
class DsoAgent {
 public:
  DsoAgent(const Block& block, Metric metric, double sigma, int aggregators);

  void initialize(const std::vector<Vec>& bids);
  /// x0^{k+1} from the prevailing y^k.
  ProxResult primal_step(double tolerance);
  /// y^{k+1} and gamma^{k+1} from the received bid delta; commits x0^{k+1}.
  void dual_step(const Vec& bid_delta);

  const Vec& x() const { return x_; }
  const Vec& y() const { return y_; }
  const Vec& gamma() const { return gamma_; }

 private:
  const Block* block_;
  std::unique_ptr<BlockProx> prox_;
  Metric metric_;
  double sigma_;
  int p_;
  Vec x_, next_, y_, gamma_;
};

/// One load aggregator: private block data, sees only DLMP broadcasts.
class LaAgent {
 public:
  LaAgent(std::string name, const Block& block, Metric metric);

  const std::string& name() const { return name_; }
  Vec initial_bid() const;
  void observe(const Vec& dlmp) { y_ = dlmp; }
  /// Prox step against the last observed DLMPs; returns A_a (x_a^{k+1} - x_a^k).
  Vec step(double tolerance, int& misses);
  const Vec& x() const { return x_; }

 private:
  std::string name_;
  const Block* block_;
  std::unique_ptr<BlockProx> prox_;
  Metric metric_;
  Vec x_, y_;
};

struct SimulationOptions {
  int iterations = 2000;
  std::uint64_t seed = 1;
  InnerTolerance inner;
  bool allow_invalid = false;
  int kkt_interval = 0;
  int snapshot_interval = 0;
  int drift_window = 50;
  bool keep_history = false;
};

struct SimulationResult {
  BlockVec x;
  BlockVec mean;
  Vec y;
  Vec gamma;
  MessageLog log;
  ConvergenceTrace trace;
  double gamma_consistency = 0.0;  // max_k |gamma^k - sigma(sum_a A_a x_a^k - b_a)|_inf
  int inner_misses = 0;
  double last_kkt = std::numeric_limits<double>::quiet_NaN();
  std::vector<BlockVec> x_history;
  std::vector<Vec> y_history;
  std::vector<int> sampled;  // aggregator block drawn at each iteration
};

/// Agent-level run: block 0 of `problem` is the operator, blocks 1..p the aggregators. `steps`
/// must be built for the ppdlmp sampling.
SimulationResult simulate(const BlockProblem& problem, const StepSizes& steps, const SimulationOptions& options);

struct EquivalenceReport {
  double primal = 0.0;
  double dual = 0.0;
  double max() const { return std::max(primal, dual); }
};

/// Runs the agent simulation and the generic solver with the same draws and compares iterates.
EquivalenceReport equivalence_harness(const BlockProblem& problem, const StepSizes& steps, int iterations,
                                      std::uint64_t seed, InnerTolerance inner = {1e-12, 1e-12});

struct AuditReport {
  bool passed = false;
  std::vector<std::string> violations;
  std::map<std::string, std::size_t> counts;
};

/// Checks that every message is a dual-space vector travelling on an allowed route and that the
/// message counts match the protocol.
AuditReport privacy_audit(const MessageLog& log, int dual_dimension, const std::vector<std::string>& aggregators);

}  // namespace dlmp
