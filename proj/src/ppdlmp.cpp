#include "dlmp/ppdlmp.hpp"

#include <algorithm>
#include <cstring>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dlmp {

std::string to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::InitBid:
      return "InitBid";
    case MessageKind::DlmpBroadcast:
      return "DlmpBroadcast";
    case MessageKind::BidDelta:
      return "BidDelta";
  }
  return "?";
}

std::optional<MessageKind> parse_message_kind(const std::string& name) {
  for (auto k : {MessageKind::InitBid, MessageKind::DlmpBroadcast, MessageKind::BidDelta})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

std::uint64_t payload_digest(const Vec& payload) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Eigen::Index i = 0; i < payload.size(); ++i) {
    unsigned char bytes[sizeof(double)];
    const double v = payload[i];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::size_t MessageLog::count(MessageKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(messages_.begin(), messages_.end(), [&](const Message& m) { return m.kind == kind; }));
}

void MessageLog::write_jsonl(std::ostream& out, bool with_payload) const {
  for (const auto& m : messages_) {
    std::ostringstream digest;
    digest << std::hex << std::setw(16) << std::setfill('0') << payload_digest(m.payload);
    nlohmann::ordered_json j{{"kind", to_string(m.kind)}, {"k", m.k},           {"sender", m.sender},
                             {"receiver", m.receiver},    {"dim", m.payload.size()}, {"digest", digest.str()}};
    if (with_payload) j["payload"] = std::vector<double>(m.payload.data(), m.payload.data() + m.payload.size());
    out << j.dump() << '\n';
  }
}

Mailboxes::Mailboxes(MessageLog& log, std::vector<std::string> aggregators)
    : log_(&log), aggregators_(std::move(aggregators)) {}

void Mailboxes::post(Message m) {
  if (m.receiver == kBroadcast) {
    for (const auto& a : aggregators_) boxes_[a].push_back(m);
  } else {
    boxes_[m.receiver].push_back(m);
  }
  log_->append(std::move(m));
}

std::optional<Message> Mailboxes::receive(const std::string& who) {
  auto& box = boxes_[who];
  if (box.empty()) return std::nullopt;
  Message m = std::move(box.front());
  box.pop_front();
  return m;
}

DsoAgent::DsoAgent(const Block& block, Metric metric, double sigma, int aggregators)
    : block_(&block),
      prox_(block.prox->clone()),
      metric_(std::move(metric)),
      sigma_(sigma),
      p_(aggregators),
      x_(block.x0.size() ? block.x0 : Vec::Zero(block.dim)) {}

void DsoAgent::initialize(const std::vector<Vec>& bids) {
  gamma_ = Vec::Zero(block_->A.rows());
  for (const auto& d : bids) gamma_ += sigma_ * d;
  y_ = gamma_ + sigma_ * (block_->A * x_ - block_->b);
}

ProxResult DsoAgent::primal_step(double tolerance) {
  const Vec g = block_->cost->gradient(x_) + block_->A.transpose() * y_;
  ProxResult r = prox_->solve(x_, g, metric_, tolerance);
  next_ = r.x;
  return r;
}

void DsoAgent::dual_step(const Vec& bid_delta) {
  y_ += sigma_ * (block_->A * (2.0 * next_ - x_) - block_->b) + gamma_ + sigma_ * (p_ + 1) * bid_delta;
  gamma_ += sigma_ * bid_delta;
  x_ = std::move(next_);
}

LaAgent::LaAgent(std::string name, const Block& block, Metric metric)
    : name_(std::move(name)),
      block_(&block),
      prox_(block.prox->clone()),
      metric_(std::move(metric)),
      x_(block.x0.size() ? block.x0 : Vec::Zero(block.dim)) {}

Vec LaAgent::initial_bid() const { return block_->A * x_ - block_->b; }

Vec LaAgent::step(double tolerance, int& misses) {
  const Vec g = block_->cost->gradient(x_) + block_->A.transpose() * y_;
  ProxResult r = prox_->solve(x_, g, metric_, tolerance);
  if (!r.converged) ++misses;
  Vec delta = block_->A * (r.x - x_);
  x_ = std::move(r.x);
  return delta;
}

SimulationResult simulate(const BlockProblem& problem, const StepSizes& steps, const SimulationOptions& options) {
  const int nb = problem.num_blocks();
  if (nb < 2) throw std::invalid_argument("simulate: at least one aggregator required");
  if (!steps.valid && !options.allow_invalid)
    throw std::invalid_argument("simulate: step-size condition violated (margin " + std::to_string(steps.margin) +
                                ")");
  const int p = nb - 1;
  const SamplingScheme sampling = make_sampling("ppdlmp", nb);
  SimulationResult out;

  std::vector<std::string> names;
  for (int a = 1; a < nb; ++a) names.push_back(problem.blocks[static_cast<size_t>(a)].name);
  Mailboxes mail(out.log, names);

  DsoAgent dso(problem.blocks[0], steps.T[0], steps.sigma, p);
  std::vector<LaAgent> las;
  for (int a = 1; a < nb; ++a)
    las.emplace_back(names[static_cast<size_t>(a - 1)], problem.blocks[static_cast<size_t>(a)],
                     steps.T[static_cast<size_t>(a)].scaled(static_cast<double>(p)));

  for (const auto& la : las) mail.post({MessageKind::InitBid, 0, la.name(), kDsoName, la.initial_bid()});
  std::vector<Vec> bids;
  while (auto m = mail.receive(kDsoName)) bids.push_back(m->payload);
  dso.initialize(bids);
  mail.post({MessageKind::DlmpBroadcast, 0, kDsoName, kBroadcast, dso.y()});

  auto gather = [&]() {
    BlockVec x;
    x.push_back(dso.x());
    for (const auto& la : las) x.push_back(la.x());
    return x;
  };
  auto check_gamma = [&](const BlockVec& x) {
    Vec bids_now = Vec::Zero(problem.rows());
    for (int a = 1; a < nb; ++a) {
      const auto& blk = problem.blocks[static_cast<size_t>(a)];
      bids_now += blk.A * x[static_cast<size_t>(a)] - blk.b;
    }
    out.gamma_consistency =
        std::max(out.gamma_consistency, (dso.gamma() - steps.sigma * bids_now).lpNorm<Eigen::Infinity>());
  };

  TraceRecorder rec(problem, steps.diagonal, options.kkt_interval, options.snapshot_interval, options.drift_window);
  BlockVec x = gather();
  BlockVec mean = x;
  auto observe = [&](int k) {
    const double kkt = rec.record(k, x, mean, dso.y(), k == options.iterations);
    if (!std::isnan(kkt)) out.last_kkt = kkt;
    if (options.keep_history) {
      out.x_history.push_back(x);
      out.y_history.push_back(dso.y());
    }
    check_gamma(x);
  };
  observe(0);

  for (int k = 0; k < options.iterations; ++k) {
    for (auto& la : las)
      while (auto m = mail.receive(la.name()))
        if (m->kind == MessageKind::DlmpBroadcast) la.observe(m->payload);

    const double tol = options.inner.at(k);
    if (!dso.primal_step(tol).converged) ++out.inner_misses;
    const auto& I = sampling.draw(options.seed, static_cast<std::uint64_t>(k));
    const int a = I.back();
    out.sampled.push_back(a);
    auto& agent = las[static_cast<size_t>(a - 1)];
    mail.post({MessageKind::BidDelta, k, agent.name(), kDsoName, agent.step(tol, out.inner_misses)});

    auto delta = mail.receive(kDsoName);
    dso.dual_step(delta->payload);
    mail.post({MessageKind::DlmpBroadcast, k + 1, kDsoName, kBroadcast, dso.y()});

    x = gather();
    for (size_t i = 0; i < x.size(); ++i) mean[i] += (x[i] - mean[i]) / static_cast<double>(k + 1);
    observe(k + 1);
  }
  out.x = std::move(x);
  out.mean = std::move(mean);
  out.y = dso.y();
  out.gamma = dso.gamma();
  out.trace = std::move(rec.trace());
  return out;
}

EquivalenceReport equivalence_harness(const BlockProblem& problem, const StepSizes& steps, int iterations,
                                      std::uint64_t seed, InnerTolerance inner) {
  SimulationOptions so;
  so.iterations = iterations;
  so.seed = seed;
  so.inner = inner;
  so.keep_history = true;
  so.allow_invalid = true;
  const auto sim = simulate(problem, steps, so);

  SolverOptions go;
  go.iterations = iterations;
  go.seed = seed;
  go.inner = inner;
  go.keep_history = true;
  go.allow_invalid = true;
  const auto gen = run(problem, make_sampling("ppdlmp", problem.num_blocks()), steps, go);

  EquivalenceReport rep;
  for (size_t k = 0; k < sim.x_history.size() && k < gen.x_history.size(); ++k) {
    for (size_t i = 0; i < sim.x_history[k].size(); ++i)
      rep.primal = std::max(rep.primal, (sim.x_history[k][i] - gen.x_history[k][i]).lpNorm<Eigen::Infinity>());
    rep.dual = std::max(rep.dual, (sim.y_history[k] - gen.y_history[k]).lpNorm<Eigen::Infinity>());
  }
  return rep;
}

AuditReport privacy_audit(const MessageLog& log, int dual_dimension, const std::vector<std::string>& aggregators) {
  AuditReport rep;
  const std::set<std::string> las(aggregators.begin(), aggregators.end());
  if (log.empty()) rep.violations.push_back("message log is empty: initialization messages are missing");
  std::map<std::string, int> init_bids;
  for (size_t i = 0; i < log.messages().size(); ++i) {
    const Message& m = log.messages()[i];
    const std::string who = "message #" + std::to_string(i) + " (" + to_string(m.kind) + ", k=" +
                            std::to_string(m.k) + ", " + m.sender + " -> " + m.receiver + ")";
    ++rep.counts[to_string(m.kind)];
    if (m.payload.size() != dual_dimension)
      rep.violations.push_back(who + ": payload dimension " + std::to_string(m.payload.size()) +
                               " is not the dual dimension " + std::to_string(dual_dimension));
    if (!m.payload.allFinite()) rep.violations.push_back(who + ": payload has non-finite entries");
    switch (m.kind) {
      case MessageKind::InitBid:
        if (!las.count(m.sender) || m.receiver != kDsoName)
          rep.violations.push_back(who + ": bids must travel from an aggregator to the operator");
        ++init_bids[m.sender];
        break;
      case MessageKind::BidDelta:
        if (!las.count(m.sender) || m.receiver != kDsoName)
          rep.violations.push_back(who + ": bids must travel from an aggregator to the operator");
        break;
      case MessageKind::DlmpBroadcast:
        if (m.sender != kDsoName || m.receiver != kBroadcast)
          rep.violations.push_back(who + ": prices must be broadcast by the operator");
        break;
    }
  }
  for (const auto& a : aggregators)
    if (init_bids[a] != 1)
      rep.violations.push_back(a + " sent " + std::to_string(init_bids[a]) + " initial bids instead of 1");
  const auto deltas = log.count(MessageKind::BidDelta);
  const auto casts = log.count(MessageKind::DlmpBroadcast);
  if (casts != deltas + 1)
    rep.violations.push_back(std::to_string(casts) + " price broadcasts for " + std::to_string(deltas) +
                             " bid deltas (expected one more broadcast than deltas)");
  rep.passed = rep.violations.empty();
  return rep;
}

}  // namespace dlmp
