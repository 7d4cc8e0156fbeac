#include "dlmp/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dlmp {

using nlohmann::json;

namespace {

std::string bus_label(int id) { return "bus " + std::to_string(id); }

void require(bool ok, const std::string& what) {
  if (!ok) throw InstanceError(what);
}

bool finite(double v) { return std::isfinite(v); }

std::vector<double> read_series(const json& j, const char* key, int horizon, int bus) {
  if (!j.contains(key)) return std::vector<double>(static_cast<size_t>(horizon), 0.0);
  const auto& arr = j.at(key);
  require(arr.is_array(), bus_label(bus) + ": '" + key + "' must be an array");
  std::vector<double> out;
  for (const auto& v : arr) {
    require(v.is_number(), bus_label(bus) + ": '" + key + "' must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

double read_number(const json& j, const char* key, double fallback, const std::string& ctx) {
  if (!j.contains(key)) return fallback;
  require(j.at(key).is_number(), ctx + ": '" + key + "' must be a number");
  return j.at(key).get<double>();
}

}  // namespace

FlexibilityProfile FlexibilityProfile::zero(int bus, int horizon) {
  const auto n = static_cast<size_t>(horizon);
  FlexibilityProfile p;
  p.bus = bus;
  p.p_min.assign(n, 0.0);
  p.p_max.assign(n, 0.0);
  p.prod_max.assign(n, 0.0);
  p.rho_min.assign(n, 0.0);
  p.rho_max.assign(n, 0.0);
  return p;
}

const Bus& NetworkInstance::bus(int id) const {
  for (const auto& b : buses)
    if (b.id == id) return b;
  throw InstanceError("unknown " + bus_label(id));
}

const Bus& NetworkInstance::root() const {
  for (const auto& b : buses)
    if (!b.parent) return b;
  throw InstanceError("instance has no root bus");
}

FlexibilityProfile NetworkInstance::profile(int bus_id) const {
  for (const auto& p : profiles)
    if (p.bus == bus_id) return p;
  return FlexibilityProfile::zero(bus_id, horizon);
}

void validate(const NetworkInstance& inst) {
  require(inst.horizon >= 1, "horizon T must be at least 1");
  require(!inst.buses.empty(), "instance has no buses");
  require(finite(inst.v0) && inst.v0 > 0.0, "root voltage v0 must be positive");
  require(finite(inst.k_loss) && inst.k_loss >= 0.0, "k_loss must be non-negative");
  require(static_cast<int>(inst.cost.size()) == inst.horizon,
          "cost must list one entry per period");
  for (const auto& c : inst.cost)
    require(finite(c.linear) && finite(c.quadratic) && c.quadratic >= 0.0,
            "root cost must be convex with finite coefficients");

  std::set<int> ids;
  int roots = 0;
  for (const auto& b : inst.buses) {
    require(ids.insert(b.id).second, "duplicate " + bus_label(b.id));
    if (!b.parent) ++roots;
  }
  require(roots == 1, "exactly one bus must have no parent, found " + std::to_string(roots));

  for (const auto& b : inst.buses) {
    if (!b.parent) continue;
    const auto who = bus_label(b.id);
    require(ids.count(*b.parent) == 1, who + ": parent " + std::to_string(*b.parent) + " does not exist");
    require(finite(b.r) && b.r >= 0.0, who + ": resistance must be non-negative");
    require(finite(b.x) && b.x >= 0.0, who + ": reactance must be non-negative");
    require(finite(b.s_max) && b.s_max > 0.0, who + ": flow limit must be positive");
    require(finite(b.b_shunt) && finite(b.g_shunt), who + ": shunt terms must be finite");
    require(finite(b.v_min) && finite(b.v_max) && b.v_min > 0.0 && b.v_min <= b.v_max,
            who + ": voltage bounds must satisfy 0 < v_min <= v_max");
  }

  // Acyclic: walking parents from any bus must reach the root within |buses| steps.
  std::map<int, int> parent;
  for (const auto& b : inst.buses)
    if (b.parent) parent[b.id] = *b.parent;
  for (const auto& b : inst.buses) {
    int cur = b.id;
    size_t steps = 0;
    while (parent.count(cur)) {
      cur = parent[cur];
      require(++steps <= inst.buses.size(), bus_label(b.id) + ": parent relation contains a cycle");
    }
  }

  const auto T = static_cast<size_t>(inst.horizon);
  std::set<int> profiled;
  for (const auto& p : inst.profiles) {
    const auto who = bus_label(p.bus);
    require(ids.count(p.bus) == 1, who + ": profile refers to an unknown bus");
    require(parent.count(p.bus) == 1, who + ": the root cannot carry a flexibility profile");
    require(profiled.insert(p.bus).second, who + ": duplicate flexibility profile");
    require(p.p_min.size() == T && p.p_max.size() == T && p.prod_max.size() == T &&
                p.rho_min.size() == T && p.rho_max.size() == T,
            who + ": every per-period series must have T entries");
    require(finite(p.energy) && finite(p.tau_c), who + ": energy and tau_c must be finite");
    double cap = 0.0;
    for (size_t t = 0; t < T; ++t) {
      require(finite(p.p_min[t]) && finite(p.p_max[t]) && p.p_min[t] <= p.p_max[t],
              who + ": consumption bounds violated at t=" + std::to_string(t));
      require(finite(p.prod_max[t]) && p.prod_max[t] >= 0.0,
              who + ": production cap must be non-negative at t=" + std::to_string(t));
      require(finite(p.rho_min[t]) && finite(p.rho_max[t]) && p.rho_min[t] <= p.rho_max[t],
              who + ": production reactive ratio bounds violated at t=" + std::to_string(t));
      cap += p.p_max[t];
    }
    if (p.energy > cap + 1e-12) {
      std::ostringstream os;
      os << who << ": energy demand E=" << p.energy << " exceeds the total consumption cap " << cap;
      throw InstanceError(os.str());
    }
  }

  if (!inst.aggregator_of.empty()) {
    for (const auto& [bus, agg] : inst.aggregator_of) {
      require(parent.count(bus) == 1,
              bus_label(bus) + ": aggregator partition must cover non-root buses only");
      (void)agg;
    }
    for (const auto& [bus, par] : parent) {
      (void)par;
      require(inst.aggregator_of.count(bus) == 1,
              bus_label(bus) + ": not assigned to any aggregator");
    }
  }
}

AncestorMap ancestor_map(const NetworkInstance& inst) {
  AncestorMap out;
  for (const auto& b : inst.buses) {
    if (!b.parent) continue;
    out.parent[b.id] = *b.parent;
    out.children[*b.parent].push_back(b.id);
  }
  for (auto& [id, kids] : out.children) std::sort(kids.begin(), kids.end());
  return out;
}

Topology build_topology(const NetworkInstance& inst) {
  Topology topo;
  topo.root_id = inst.root().id;
  for (const auto& b : inst.buses)
    if (b.parent) topo.bus_ids.push_back(b.id);
  std::sort(topo.bus_ids.begin(), topo.bus_ids.end());
  for (int k = 0; k < topo.size(); ++k) topo.index_of[topo.bus_ids[static_cast<size_t>(k)]] = k;
  topo.parent_index.assign(topo.bus_ids.size(), -1);
  topo.children.assign(topo.bus_ids.size(), {});
  for (int k = 0; k < topo.size(); ++k) {
    const int par = *inst.bus(topo.bus_ids[static_cast<size_t>(k)]).parent;
    if (par == topo.root_id) {
      topo.root_children.push_back(k);
    } else {
      const int pk = topo.index_of.at(par);
      topo.parent_index[static_cast<size_t>(k)] = pk;
      topo.children[static_cast<size_t>(pk)].push_back(k);
    }
  }
  return topo;
}

AggregatorPartition aggregator_partition(const NetworkInstance& inst, const Topology& topo) {
  std::map<int, std::vector<int>> groups;
  for (int k = 0; k < topo.size(); ++k) {
    const int bus = topo.bus_ids[static_cast<size_t>(k)];
    const auto it = inst.aggregator_of.find(bus);
    const int agg = it == inst.aggregator_of.end() ? bus : it->second;
    groups[agg].push_back(k);
  }
  AggregatorPartition part;
  for (auto& [id, buses] : groups) {
    part.ids.push_back(id);
    part.buses.push_back(std::move(buses));
  }
  return part;
}

NetworkInstance load_instance(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InstanceError(std::string("instance is not valid JSON: ") + e.what());
  }
  require(doc.is_object(), "instance document must be a JSON object");
  require(doc.contains("buses") && doc.at("buses").is_array(), "instance needs a 'buses' array");
  require(doc.contains("T") && doc.at("T").is_number_integer(), "instance needs an integer 'T'");

  NetworkInstance inst;
  inst.name = doc.value("name", std::string{});
  inst.horizon = doc.at("T").get<int>();
  require(inst.horizon >= 1, "horizon T must be at least 1");
  inst.v0 = read_number(doc, "v0", 1.0, "instance");
  inst.k_loss = read_number(doc, "k_loss", 0.0, "instance");

  if (doc.contains("cost")) {
    require(doc.at("cost").is_array(), "'cost' must be an array of {linear, quadratic}");
    for (const auto& c : doc.at("cost")) {
      require(c.is_object(), "'cost' entries must be objects");
      inst.cost.push_back({read_number(c, "linear", 0.0, "cost"), read_number(c, "quadratic", 0.0, "cost")});
    }
  } else {
    inst.cost.assign(static_cast<size_t>(inst.horizon), PeriodCost{});
  }

  for (const auto& jb : doc.at("buses")) {
    require(jb.is_object() && jb.contains("id") && jb.at("id").is_number_integer(),
            "every bus needs an integer 'id'");
    Bus b;
    b.id = jb.at("id").get<int>();
    const auto ctx = bus_label(b.id);
    if (jb.contains("parent") && !jb.at("parent").is_null()) {
      require(jb.at("parent").is_number_integer(), ctx + ": 'parent' must be an integer");
      b.parent = jb.at("parent").get<int>();
    }
    b.r = read_number(jb, "R", 0.0, ctx);
    b.x = read_number(jb, "X", 0.0, ctx);
    b.s_max = read_number(jb, "S", 0.0, ctx);
    b.b_shunt = read_number(jb, "B", 0.0, ctx);
    b.g_shunt = read_number(jb, "G", 0.0, ctx);
    b.v_min = read_number(jb, "v_min", 0.0, ctx);
    b.v_max = read_number(jb, "v_max", 0.0, ctx);
    inst.buses.push_back(b);
  }

  if (doc.contains("profiles")) {
    require(doc.at("profiles").is_array(), "'profiles' must be an array");
    for (const auto& jp : doc.at("profiles")) {
      require(jp.is_object() && jp.contains("bus") && jp.at("bus").is_number_integer(),
              "every profile needs an integer 'bus'");
      FlexibilityProfile p;
      p.bus = jp.at("bus").get<int>();
      const auto ctx = bus_label(p.bus);
      p.p_min = read_series(jp, "p_min", inst.horizon, p.bus);
      p.p_max = read_series(jp, "p_max", inst.horizon, p.bus);
      p.energy = read_number(jp, "E", 0.0, ctx);
      p.tau_c = read_number(jp, "tau_c", 0.0, ctx);
      p.prod_max = read_series(jp, "prod_max", inst.horizon, p.bus);
      p.rho_min = read_series(jp, "rho_min", inst.horizon, p.bus);
      p.rho_max = read_series(jp, "rho_max", inst.horizon, p.bus);
      inst.profiles.push_back(std::move(p));
    }
  }

  if (doc.contains("aggregator_of")) {
    require(doc.at("aggregator_of").is_object(), "'aggregator_of' must map bus ids to aggregator ids");
    for (const auto& [key, val] : doc.at("aggregator_of").items()) {
      require(val.is_number_integer(), "aggregator ids must be integers");
      int bus = 0;
      try {
        bus = std::stoi(key);
      } catch (const std::exception&) {
        throw InstanceError("'aggregator_of' key '" + key + "' is not a bus id");
      }
      inst.aggregator_of[bus] = val.get<int>();
    }
  }

  validate(inst);
  return inst;
}

NetworkInstance load_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InstanceError("cannot open instance file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_instance(ss.str());
}

std::string serialize_instance(const NetworkInstance& inst) {
  json doc;
  doc["name"] = inst.name;
  doc["T"] = inst.horizon;
  doc["v0"] = inst.v0;
  doc["k_loss"] = inst.k_loss;
  doc["cost"] = json::array();
  for (const auto& c : inst.cost) doc["cost"].push_back({{"linear", c.linear}, {"quadratic", c.quadratic}});
  doc["buses"] = json::array();
  for (const auto& b : inst.buses) {
    json jb{{"id", b.id}};
    if (b.parent) {
      jb["parent"] = *b.parent;
      jb["R"] = b.r;
      jb["X"] = b.x;
      jb["S"] = b.s_max;
      jb["B"] = b.b_shunt;
      jb["G"] = b.g_shunt;
      jb["v_min"] = b.v_min;
      jb["v_max"] = b.v_max;
    } else {
      // The root's line fields are ignored by the model but kept for identity round-trips.
      if (b.r != 0.0) jb["R"] = b.r;
      if (b.x != 0.0) jb["X"] = b.x;
      if (b.s_max != 0.0) jb["S"] = b.s_max;
      if (b.b_shunt != 0.0) jb["B"] = b.b_shunt;
      if (b.g_shunt != 0.0) jb["G"] = b.g_shunt;
      if (b.v_min != 0.0) jb["v_min"] = b.v_min;
      if (b.v_max != 0.0) jb["v_max"] = b.v_max;
    }
    doc["buses"].push_back(jb);
  }
  doc["profiles"] = json::array();
  for (const auto& p : inst.profiles) {
    doc["profiles"].push_back({{"bus", p.bus},
                               {"p_min", p.p_min},
                               {"p_max", p.p_max},
                               {"E", p.energy},
                               {"tau_c", p.tau_c},
                               {"prod_max", p.prod_max},
                               {"rho_min", p.rho_min},
                               {"rho_max", p.rho_max}});
  }
  if (!inst.aggregator_of.empty()) {
    json agg = json::object();
    for (const auto& [bus, a] : inst.aggregator_of) agg[std::to_string(bus)] = a;
    doc["aggregator_of"] = agg;
  }
  return doc.dump(2);
}

namespace {

// Splits one CSV line honouring double quotes.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  int depth = 0;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == '[') {
      ++depth;
      cur.push_back(ch);
    } else if (ch == ']') {
      --depth;
      cur.push_back(ch);
    } else if (ch == ',' && !quoted && depth == 0) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    s = b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  }
  return out;
}

double parse_double(const std::string& s, int row) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InstanceError("table row " + std::to_string(row) + ": '" + s + "' is not a number");
  }
}

std::vector<double> parse_list(const std::string& s, int row) {
  if (s.size() < 2 || s.front() != '[' || s.back() != ']')
    throw InstanceError("table row " + std::to_string(row) + ": expected a bracketed list, got '" + s + "'");
  std::vector<double> out;
  std::stringstream ss(s.substr(1, s.size() - 2));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(parse_double(item.substr(b, e - b + 1), row));
  }
  return out;
}

}  // namespace

NetworkInstance import_table_csv(const std::string& csv_text, const TableExtras& extras) {
  NetworkInstance inst;
  inst.horizon = extras.horizon;
  inst.v0 = extras.v0;
  inst.k_loss = extras.k_loss;
  inst.cost = extras.cost.empty() ? std::vector<PeriodCost>(static_cast<size_t>(extras.horizon))
                                  : extras.cost;
  inst.aggregator_of = extras.aggregator_of;
  Bus root;
  root.id = extras.root_id;
  inst.buses.push_back(root);

  std::stringstream in(csv_text);
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_csv_line(line);
    if (row == 1 && !cells.empty()) {
      // Header detection: the first cell of a data row is a bus number.
      bool numeric = !cells[0].empty() &&
                     std::all_of(cells[0].begin(), cells[0].end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
      if (!numeric) continue;
    }
    if (cells.size() != 9)
      throw InstanceError("table row " + std::to_string(row) + ": expected 9 columns, got " +
                          std::to_string(cells.size()));
    const int id = static_cast<int>(parse_double(cells[0], row));
    const auto par = extras.parent_of.find(id);
    if (par == extras.parent_of.end()) throw InstanceError(bus_label(id) + ": no parent given for table row");
    Bus b;
    b.id = id;
    b.parent = par->second;
    b.s_max = parse_double(cells[1], row);
    // Scaled columns are shifted textually so the per-unit value is the correctly rounded decimal.
    b.r = parse_double(cells[2] + "e-3", row);
    b.x = parse_double(cells[3] + "e-3", row);
    b.b_shunt = parse_double(cells[4] + "e-3", row);
    b.v_min = extras.v_min;
    b.v_max = extras.v_max;
    inst.buses.push_back(b);

    FlexibilityProfile p = FlexibilityProfile::zero(id, extras.horizon);
    p.p_min = parse_list(cells[5], row);
    p.p_max = parse_list(cells[6], row);
    p.energy = parse_double(cells[7], row);
    p.tau_c = parse_double(cells[8], row);
    if (const auto prod = extras.production.find(id); prod != extras.production.end()) {
      p.prod_max = prod->second.cap;
      p.rho_min = prod->second.rho_min;
      p.rho_max = prod->second.rho_max;
    }
    inst.profiles.push_back(std::move(p));
  }
  validate(inst);
  return inst;
}

NetworkInstance random_instance(int buses, int horizon, std::uint64_t seed) {
  if (buses < 2 || horizon < 1) throw InstanceError("random instance: need at least two buses and one period");
  std::mt19937_64 rng(seed);
  auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  NetworkInstance inst;
  inst.name = "random" + std::to_string(buses) + "-" + std::to_string(seed);
  inst.horizon = horizon;
  inst.v0 = 1.0;
  inst.k_loss = 0.001;
  for (int t = 0; t < horizon; ++t) inst.cost.push_back({uni(0.5, 2.0), uni(0.0, 1.0)});
  inst.buses.push_back(Bus{});
  for (int n = 1; n < buses; ++n) {
    Bus b;
    b.id = n;
    b.parent = std::uniform_int_distribution<int>(0, n - 1)(rng);
    b.r = uni(0.005, 0.05);
    b.x = uni(0.005, 0.08);
    b.s_max = uni(0.4, 1.0);
    b.b_shunt = uni(0.0, 0.002);
    b.v_min = 0.81;
    b.v_max = 1.21;
    inst.buses.push_back(b);

    FlexibilityProfile p = FlexibilityProfile::zero(n, horizon);
    double lo = 0.0, hi = 0.0;
    for (int t = 0; t < horizon; ++t) {
      p.p_min[t] = uni(0.0, 0.05);
      p.p_max[t] = p.p_min[t] + uni(0.02, 0.15);
      lo += p.p_min[t];
      hi += p.p_max[t];
    }
    p.energy = lo + uni(0.2, 0.8) * (hi - lo);
    p.tau_c = uni(0.0, 0.4);
    if (uni(0.0, 1.0) < 0.34)
      for (int t = 0; t < horizon; ++t) {
        p.prod_max[t] = uni(0.0, 0.1);
        p.rho_min[t] = -uni(0.0, 0.3);
        p.rho_max[t] = uni(0.0, 0.3);
      }
    inst.profiles.push_back(std::move(p));
  }
  validate(inst);
  return inst;
}

}  // namespace dlmp
