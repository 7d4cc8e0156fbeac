#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dlmp {

/// Raised when an instance document is malformed or violates a network invariant.
class InstanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A bus together with the line connecting it to its parent.
///
/// Line data (`r`, `x`, `s_max`, shunt terms) describe the branch (n, parent(n)) and are
/// ignored for the root. All quantities are per-unit; voltage bounds are on the squared
/// magnitude.
struct Bus {
  int id = 0;
  std::optional<int> parent;
  double r = 0.0;
  double x = 0.0;
  double s_max = 0.0;
  double b_shunt = 0.0;
  double g_shunt = 0.0;
  double v_min = 0.0;
  double v_max = 0.0;

  bool operator==(const Bus&) const = default;
};

/// Flexible consumption and production offered at one bus.
struct FlexibilityProfile {
  int bus = 0;
  std::vector<double> p_min;     // consumption lower bound per period
  std::vector<double> p_max;     // consumption upper bound per period
  double energy = 0.0;           // sum_t consumption >= energy
  double tau_c = 0.0;            // reactive / active ratio of consumption
  std::vector<double> prod_max;  // production cap per period
  std::vector<double> rho_min;   // production reactive ratio bounds per period
  std::vector<double> rho_max;

  bool operator==(const FlexibilityProfile&) const = default;

  static FlexibilityProfile zero(int bus, int horizon);
};

/// Root generation cost c_t(p) = linear * p + quadratic * p^2 for one period.
struct PeriodCost {
  double linear = 0.0;
  double quadratic = 0.0;

  bool operator==(const PeriodCost&) const = default;
};

struct NetworkInstance {
  std::string name;
  std::vector<Bus> buses;
  std::vector<FlexibilityProfile> profiles;
  int horizon = 1;
  double v0 = 1.0;
  double k_loss = 0.0;
  std::vector<PeriodCost> cost;
  std::map<int, int> aggregator_of;  // non-root bus id -> aggregator id

  bool operator==(const NetworkInstance&) const = default;

  const Bus& bus(int id) const;
  const Bus& root() const;
  /// Profile of a bus; an all-zero profile is synthesised for buses without one.
  FlexibilityProfile profile(int bus_id) const;
};

struct AncestorMap {
  std::map<int, int> parent;                 // every non-root bus
  std::map<int, std::vector<int>> children;  // only buses with at least one child
};

/// Dense indexing of the tree used by the assembly layer.
///
/// Non-root buses are numbered 0..N-1 in ascending id order. `parent_index` is -1 for
/// buses attached directly to the root.
struct Topology {
  int root_id = 0;
  std::vector<int> bus_ids;
  std::map<int, int> index_of;
  std::vector<int> parent_index;
  std::vector<std::vector<int>> children;  // children by dense index
  std::vector<int> root_children;

  int size() const { return static_cast<int>(bus_ids.size()); }
};

/// Aggregators in ascending id order with their managed buses (dense indices, ascending).
struct AggregatorPartition {
  std::vector<int> ids;
  std::vector<std::vector<int>> buses;

  int size() const { return static_cast<int>(ids.size()); }
};

/// Checks every invariant; throws InstanceError naming the offending bus.
void validate(const NetworkInstance& instance);

AncestorMap ancestor_map(const NetworkInstance& instance);
Topology build_topology(const NetworkInstance& instance);
AggregatorPartition aggregator_partition(const NetworkInstance& instance, const Topology& topo);

/// Parses the JSON instance document. Missing `aggregator_of` means one aggregator per bus.
NetworkInstance load_instance(const std::string& json_text);
NetworkInstance load_instance_file(const std::string& path);
std::string serialize_instance(const NetworkInstance& instance);

/// Random radial instance with buses 0..buses-1 (root 0), flexible load at every bus and
/// production at roughly a third of them. Deterministic in `seed`.
NetworkInstance random_instance(int buses, int horizon, std::uint64_t seed);

/// Data that the tabular layout does not carry.
struct TableExtras {
  std::map<int, int> parent_of;  // non-root bus -> parent
  int root_id = 0;
  int horizon = 2;
  double v0 = 1.0;
  double v_min = 0.81;
  double v_max = 1.21;
  double k_loss = 0.0;
  std::vector<PeriodCost> cost;
  // bus -> (production cap, rho_min, rho_max) per period
  struct Production {
    std::vector<double> cap, rho_min, rho_max;
  };
  std::map<int, Production> production;
  std::map<int, int> aggregator_of;
};

/// Imports rows laid out as `n, S, R*1e3, X*1e3, B*1e3, Pmin, Pmax, E, tau_c` where Pmin and
/// Pmax are bracketed per-period lists such as "[0.593, 0.256]". A header line is skipped.
NetworkInstance import_table_csv(const std::string& csv_text, const TableExtras& extras);

}  // namespace dlmp
