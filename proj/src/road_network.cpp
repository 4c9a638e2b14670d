#include "citylight/road_network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "citylight/rng.hpp"

namespace citylight {

using nlohmann::json;

std::optional<Turn> turn_between(int in_approach, int out_approach) {
  const int d = ((out_approach - in_approach - 1) % 4 + 4) % 4;
  if (d == 3) return std::nullopt;
  return static_cast<Turn>(d);
}

PhaseId::PhaseId(int value) : value_(value) {
  if (value < 1 || value > kNumPhases) {
    throw std::out_of_range("phase id must be in 1..8, got " + std::to_string(value));
  }
}

namespace {

PhaseMovements make_phase(int a, int b, bool two_roads) {
  auto group = [](int slot) {
    const int start = downstream_group_start(slot);
    return std::array<int, 3>{start, start + 1, start + 2};
  };
  return PhaseMovements{{a, b}, {group(a), group(b)}, two_roads};
}

const std::array<PhaseMovements, kNumPhases> kPhaseTable = {
    make_phase(0, 6, true),   // N/S left
    make_phase(1, 7, true),   // N/S through
    make_phase(3, 9, true),   // E/W left
    make_phase(4, 10, true),  // E/W through
    make_phase(0, 1, false),  // North
    make_phase(3, 4, false),  // East
    make_phase(6, 7, false),  // South
    make_phase(9, 10, false), // West
};

}  // namespace

const PhaseMovements& phase_movements(PhaseId phase) { return kPhaseTable[phase.index()]; }

std::vector<PhaseId> phases_with_slot(int slot) {
  std::vector<PhaseId> out;
  for (int p = 0; p < kNumPhases; ++p) {
    const auto& up = kPhaseTable[p].upstream_slots;
    if (up[0] == slot || up[1] == slot) out.push_back(PhaseId::from_index(p));
  }
  return out;
}

PhaseMask Intersection::valid_phases() const {
  PhaseMask mask;
  for (int p = 0; p < kNumPhases; ++p) {
    const auto& up = kPhaseTable[p].upstream_slots;
    mask[p] = has_slot(up[0]) || has_slot(up[1]);
  }
  return mask;
}

RoadNetwork::RoadNetwork(std::vector<Lane> lanes, std::vector<Road> roads, std::vector<Intersection> intersections)
    : lanes_(std::move(lanes)), roads_(std::move(roads)), intersections_(std::move(intersections)) {
  validate_and_link();
}

void RoadNetwork::validate_and_link() {
  auto fail = [](const std::string& msg) { throw ValidationError(msg); };

  for (int i = 0; i < static_cast<int>(lanes_.size()); ++i) {
    const Lane& l = lanes_[i];
    if (!(l.length >= kMinLaneLength)) fail("lane '" + l.id + "': length must be >= 30 m");
    if (!(l.speed_limit > 0.0)) fail("lane '" + l.id + "': speed_limit must be > 0");
    if (l.capacity < 1) fail("lane '" + l.id + "': capacity must be >= 1");
    if (!lane_ids_.emplace(l.id, i).second) fail("duplicate lane id '" + l.id + "'");
  }
  for (int i = 0; i < static_cast<int>(intersections_.size()); ++i) {
    if (!intersection_ids_.emplace(intersections_[i].id, i).second) {
      fail("duplicate intersection id '" + intersections_[i].id + "'");
    }
  }

  links_.assign(lanes_.size(), LaneLinks{});
  const int n_inter = static_cast<int>(intersections_.size());
  for (int r = 0; r < static_cast<int>(roads_.size()); ++r) {
    const Road& road = roads_[r];
    if (!road_ids_.emplace(road.id, r).second) fail("duplicate road id '" + road.id + "'");
    if (road.from < -1 || road.from >= n_inter || road.to < -1 || road.to >= n_inter) {
      fail("road '" + road.id + "': endpoint out of range");
    }
    if (road.from == -1 && road.to == -1) fail("road '" + road.id + "' touches no intersection");
    for (int t = 0; t < 3; ++t) {
      const int li = road.lanes[t];
      if (li < 0 || li >= static_cast<int>(lanes_.size())) fail("road '" + road.id + "': dangling lane reference");
      if (links_[li].road != -1) fail("lane '" + lanes_[li].id + "' belongs to more than one road");
      links_[li].road = r;
      links_[li].turn_index = t;
      const Lane& first = lanes_[road.lanes[0]];
      if (lanes_[li].length != first.length || lanes_[li].speed_limit != first.speed_limit) {
        fail("road '" + road.id + "': lanes must share length and speed_limit");
      }
    }
  }

  for (int i = 0; i < n_inter; ++i) {
    const Intersection& node = intersections_[i];
    for (int slot = 0; slot < kNumSlots; ++slot) {
      const int li = node.lane_table[slot];
      if (li != kNoLane && (li < 0 || li >= static_cast<int>(lanes_.size()))) {
        fail("intersection '" + node.id + "': dangling lane reference in slot " + std::to_string(slot));
      }
    }
    for (int triple = 0; triple < 8; ++triple) {
      const int base = 3 * triple;
      const bool incoming = triple < 4;
      int present = 0;
      for (int t = 0; t < 3; ++t) present += node.lane_table[base + t] != kNoLane;
      if (present == 0) continue;
      const std::string where = "intersection '" + node.id + "' slots " + std::to_string(base) + ".." +
                                std::to_string(base + 2);
      if (present != 3) fail(where + ": an approach is either complete or entirely -1");
      const int r = links_[node.lane_table[base]].road;
      if (r < 0) fail(where + ": lane belongs to no road");
      for (int t = 0; t < 3; ++t) {
        if (roads_[r].lanes[t] != node.lane_table[base + t]) fail(where + ": slots must list one road's lanes in order");
      }
      if (incoming ? roads_[r].to != i : roads_[r].from != i) {
        fail(where + ": road '" + roads_[r].id + "' does not " + (incoming ? "end" : "start") + " here");
      }
      for (int t = 0; t < 3; ++t) {
        LaneLinks& ln = links_[node.lane_table[base + t]];
        if (incoming) {
          if (ln.upstream_of != -1) fail(where + ": lane used twice");
          ln.upstream_of = i;
          ln.upstream_slot = base + t;
        } else {
          if (ln.downstream_of != -1) fail(where + ": lane used twice");
          ln.downstream_of = i;
          ln.downstream_slot = base + t;
        }
      }
    }
  }

  for (int li = 0; li < static_cast<int>(lanes_.size()); ++li) {
    if (links_[li].road == -1) fail("lane '" + lanes_[li].id + "' belongs to no road");
  }
  for (const Road& road : roads_) {
    if (road.to != -1 && links_[road.lanes[0]].upstream_of != road.to) {
      fail("road '" + road.id + "' is missing from its end intersection's lane table");
    }
    if (road.from != -1 && links_[road.lanes[0]].downstream_of != road.from) {
      fail("road '" + road.id + "' is missing from its start intersection's lane table");
    }
  }
}

std::optional<int> RoadNetwork::find_lane(const std::string& id) const {
  auto it = lane_ids_.find(id);
  return it == lane_ids_.end() ? std::nullopt : std::optional<int>(it->second);
}

std::optional<int> RoadNetwork::find_road(const std::string& id) const {
  auto it = road_ids_.find(id);
  return it == road_ids_.end() ? std::nullopt : std::optional<int>(it->second);
}

std::optional<int> RoadNetwork::find_intersection(const std::string& id) const {
  auto it = intersection_ids_.find(id);
  return it == intersection_ids_.end() ? std::nullopt : std::optional<int>(it->second);
}

int RoadNetwork::incoming_approach(int road) const {
  return links_.at(roads_.at(road).lanes[0]).upstream_slot / 3;
}

int RoadNetwork::outgoing_approach(int road) const {
  return (links_.at(roads_.at(road).lanes[0]).downstream_slot - 12) / 3;
}

std::optional<Turn> RoadNetwork::movement(int road_a, int road_b) const {
  const Road& a = roads_.at(road_a);
  const Road& b = roads_.at(road_b);
  if (a.to == -1 || a.to != b.from) return std::nullopt;
  return turn_between(incoming_approach(road_a), outgoing_approach(road_b));
}

bool operator==(const RoadNetwork& a, const RoadNetwork& b) {
  auto lane_eq = [](const Lane& x, const Lane& y) {
    return x.id == y.id && x.length == y.length && x.speed_limit == y.speed_limit && x.capacity == y.capacity;
  };
  auto road_eq = [](const Road& x, const Road& y) {
    return x.id == y.id && x.from == y.from && x.to == y.to && x.lanes == y.lanes;
  };
  auto node_eq = [](const Intersection& x, const Intersection& y) {
    return x.id == y.id && x.lane_table == y.lane_table && x.signalized == y.signalized;
  };
  return std::equal(a.lanes_.begin(), a.lanes_.end(), b.lanes_.begin(), b.lanes_.end(), lane_eq) &&
         std::equal(a.roads_.begin(), a.roads_.end(), b.roads_.begin(), b.roads_.end(), road_eq) &&
         std::equal(a.intersections_.begin(), a.intersections_.end(), b.intersections_.begin(),
                    b.intersections_.end(), node_eq);
}

// ---------------------------------------------------------------------------
// JSON

json to_json(const RoadNetwork& net) {
  json lanes = json::array();
  for (const Lane& l : net.lanes()) lanes.push_back({{"id", l.id}, {"length", l.length}, {"speed_limit", l.speed_limit}});

  auto endpoint = [&](int idx) -> json {
    if (idx < 0) return nullptr;
    return net.intersection(idx).id;
  };
  json roads = json::array();
  for (const Road& r : net.roads()) {
    json ids = json::array();
    for (int li : r.lanes) ids.push_back(net.lane(li).id);
    roads.push_back({{"id", r.id}, {"from", endpoint(r.from)}, {"to", endpoint(r.to)}, {"lanes", ids}});
  }

  json nodes = json::array();
  for (const Intersection& node : net.intersections()) {
    json table = json::array();
    for (int li : node.lane_table) {
      if (li == kNoLane) {
        table.push_back(-1);
      } else {
        table.push_back(net.lane(li).id);
      }
    }
    nodes.push_back({{"id", node.id}, {"signalized", node.signalized}, {"lane_table", table}});
  }
  return {{"lanes", lanes}, {"roads", roads}, {"intersections", nodes}};
}

namespace {

const json& require(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.is_object() || !obj.contains(key)) throw ParseError(ctx + ": missing key '" + key + "'");
  return obj.at(key);
}

template <typename T>
T get_as(const json& obj, const char* key, const std::string& ctx) {
  try {
    return require(obj, key, ctx).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(ctx + ": bad value for '" + key + "': " + e.what());
  }
}

json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_file(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << doc.dump(2) << '\n';
}

}  // namespace

RoadNetwork network_from_json(const json& doc, double jam_spacing) {
  if (!doc.is_object()) throw ParseError("network: top level must be an object");
  std::vector<Lane> lanes;
  std::unordered_map<std::string, int> lane_ids;
  for (const json& l : require(doc, "lanes", "network")) {
    Lane lane;
    lane.id = get_as<std::string>(l, "id", "lane");
    const std::string ctx = "lane '" + lane.id + "'";
    lane.length = get_as<double>(l, "length", ctx);
    lane.speed_limit = get_as<double>(l, "speed_limit", ctx);
    lane.capacity = lane.length > 0 ? static_cast<int>(std::floor(lane.length / jam_spacing)) : 0;
    lane_ids.emplace(lane.id, static_cast<int>(lanes.size()));
    lanes.push_back(std::move(lane));
  }

  std::unordered_map<std::string, int> node_ids;
  const json& node_docs = require(doc, "intersections", "network");
  for (const json& n : node_docs) {
    node_ids.emplace(get_as<std::string>(n, "id", "intersection"), static_cast<int>(node_ids.size()));
  }

  auto lane_ref = [&](const json& v, const std::string& ctx) {
    if (v.is_number_integer() && v.get<int>() == -1) return kNoLane;
    if (!v.is_string()) throw ParseError(ctx + ": lane reference must be a lane id or -1");
    auto it = lane_ids.find(v.get<std::string>());
    if (it == lane_ids.end()) throw ValidationError(ctx + ": dangling lane reference '" + v.get<std::string>() + "'");
    return it->second;
  };
  auto node_ref = [&](const json& v, const std::string& ctx) {
    if (v.is_null()) return -1;
    if (!v.is_string()) throw ParseError(ctx + ": endpoint must be an intersection id or null");
    auto it = node_ids.find(v.get<std::string>());
    if (it == node_ids.end()) throw ValidationError(ctx + ": unknown intersection '" + v.get<std::string>() + "'");
    return it->second;
  };

  std::vector<Road> roads;
  for (const json& r : require(doc, "roads", "network")) {
    Road road;
    road.id = get_as<std::string>(r, "id", "road");
    const std::string ctx = "road '" + road.id + "'";
    road.from = node_ref(require(r, "from", ctx), ctx);
    road.to = node_ref(require(r, "to", ctx), ctx);
    const json& ls = require(r, "lanes", ctx);
    if (!ls.is_array() || ls.size() != 3) throw ValidationError(ctx + ": a road has exactly 3 lanes");
    for (int t = 0; t < 3; ++t) {
      road.lanes[t] = lane_ref(ls[t], ctx);
      if (road.lanes[t] == kNoLane) throw ValidationError(ctx + ": lanes cannot be -1");
    }
    roads.push_back(std::move(road));
  }

  std::vector<Intersection> nodes;
  for (const json& n : node_docs) {
    Intersection node;
    node.id = n.at("id").get<std::string>();
    const std::string ctx = "intersection '" + node.id + "'";
    node.signalized = n.contains("signalized") ? get_as<bool>(n, "signalized", ctx) : true;
    const json& table = require(n, "lane_table", ctx);
    if (!table.is_array() || table.size() != kNumSlots) {
      throw ValidationError(ctx + ": lane_table must have exactly 24 entries");
    }
    for (int s = 0; s < kNumSlots; ++s) node.lane_table[s] = lane_ref(table[s], ctx);
    nodes.push_back(std::move(node));
  }
  return RoadNetwork(std::move(lanes), std::move(roads), std::move(nodes));
}

RoadNetwork load_network(const std::filesystem::path& path, double jam_spacing) {
  return network_from_json(parse_file(path), jam_spacing);
}

void save_network(const RoadNetwork& net, const std::filesystem::path& path) { write_file(path, to_json(net)); }

std::vector<int> FlowSpec::spawn_times() const {
  std::vector<int> out;
  for (int t = start_time; t <= end_time; t += interval) out.push_back(t);
  return out;
}

void validate_route(const std::vector<int>& route, const RoadNetwork& net) {
  if (route.empty()) throw ValidationError("route is empty");
  for (std::size_t i = 0; i + 1 < route.size(); ++i) {
    if (!net.movement(route[i], route[i + 1])) {
      throw ValidationError("route is disconnected between '" + net.road(route[i]).id + "' and '" +
                            net.road(route[i + 1]).id + "'");
    }
  }
}

json flows_to_json(const std::vector<FlowSpec>& flows, const RoadNetwork& net) {
  json out = json::array();
  for (const FlowSpec& f : flows) {
    json route = json::array();
    for (int r : f.route) route.push_back(net.road(r).id);
    out.push_back({{"route", route}, {"start_time", f.start_time}, {"end_time", f.end_time}, {"interval", f.interval}});
  }
  return out;
}

std::vector<FlowSpec> flows_from_json(const json& doc, const RoadNetwork& net) {
  if (!doc.is_array()) throw ParseError("flows: top level must be a list");
  std::vector<FlowSpec> flows;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string ctx = "flow #" + std::to_string(i);
    const json& f = doc[i];
    FlowSpec spec;
    for (const json& rid : require(f, "route", ctx)) {
      if (!rid.is_string()) throw ParseError(ctx + ": route entries must be road ids");
      auto r = net.find_road(rid.get<std::string>());
      if (!r) throw ValidationError(ctx + ": route references unknown road '" + rid.get<std::string>() + "'");
      spec.route.push_back(*r);
    }
    spec.start_time = get_as<int>(f, "start_time", ctx);
    spec.end_time = get_as<int>(f, "end_time", ctx);
    spec.interval = get_as<int>(f, "interval", ctx);
    if (spec.start_time > spec.end_time) throw ValidationError(ctx + ": start_time > end_time");
    if (spec.interval < 1) throw ValidationError(ctx + ": interval must be >= 1");
    try {
      validate_route(spec.route, net);
    } catch (const ValidationError& e) {
      throw ValidationError(ctx + ": " + e.what());
    }
    flows.push_back(std::move(spec));
  }
  return flows;
}

std::vector<FlowSpec> load_flows(const std::filesystem::path& path, const RoadNetwork& net) {
  return flows_from_json(parse_file(path), net);
}

void save_flows(const std::vector<FlowSpec>& flows, const RoadNetwork& net, const std::filesystem::path& path) {
  write_file(path, flows_to_json(flows, net));
}

// ---------------------------------------------------------------------------
// Grid generator

namespace {

constexpr int kDr[4] = {-1, 0, 1, 0};
constexpr int kDc[4] = {0, 1, 0, -1};
constexpr const char* kSide[4] = {"N", "E", "S", "W"};

}  // namespace

GridScenario gen_grid(int rows, int cols, double lane_length, const GridDemand& demand) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("gen_grid: rows and cols must be >= 1");
  if (lane_length < kMinLaneLength) throw std::invalid_argument("gen_grid: lane_length must be >= 30 m");
  if (demand.vehicles_per_hour < 0.0 || demand.flows_per_entry < 1 || demand.horizon < 1) {
    throw std::invalid_argument("gen_grid: bad demand spec");
  }

  auto node_index = [cols](int r, int c) { return r * cols + c; };
  auto inside = [rows, cols](int r, int c) { return r >= 0 && r < rows && c >= 0 && c < cols; };
  auto node_name = [](int r, int c) { return "i_" + std::to_string(r) + "_" + std::to_string(c); };

  std::vector<Lane> lanes;
  std::vector<Road> roads;
  std::vector<Intersection> nodes(rows * cols);
  const int capacity = static_cast<int>(std::floor(lane_length / kDefaultJamSpacing));

  auto add_road = [&](const std::string& id, int from, int to) {
    Road road{id, from, to, {}};
    for (int t = 0; t < 3; ++t) {
      road.lanes[t] = static_cast<int>(lanes.size());
      lanes.push_back(Lane{id + "_" + std::to_string(t), lane_length, demand.speed_limit, capacity});
    }
    roads.push_back(road);
    return static_cast<int>(roads.size()) - 1;
  };

  // in_road[node][approach], out_road[node][approach]
  std::vector<std::array<int, 4>> in_road(rows * cols), out_road(rows * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      nodes[node_index(r, c)].id = node_name(r, c);
      nodes[node_index(r, c)].lane_table.fill(kNoLane);
    }
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int self = node_index(r, c);
      for (int a = 0; a < 4; ++a) {
        const int nr = r + kDr[a], nc = c + kDc[a];
        if (inside(nr, nc)) {
          out_road[self][a] = add_road("road_" + node_name(r, c) + "_" + node_name(nr, nc), self, node_index(nr, nc));
        } else {
          out_road[self][a] = add_road("out_" + node_name(r, c) + "_" + kSide[a], self, -1);
          in_road[self][a] = add_road("in_" + node_name(r, c) + "_" + kSide[a], -1, self);
        }
      }
    }
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int self = node_index(r, c);
      for (int a = 0; a < 4; ++a) {
        const int nr = r + kDr[a], nc = c + kDc[a];
        // The road arriving from the neighbour on side a is the neighbour's
        // outgoing road on the opposite side.
        if (inside(nr, nc)) in_road[self][a] = out_road[node_index(nr, nc)][(a + 2) % 4];
        for (int t = 0; t < 3; ++t) {
          nodes[self].lane_table[3 * a + t] = roads[in_road[self][a]].lanes[t];
          nodes[self].lane_table[12 + 3 * a + t] = roads[out_road[self][a]].lanes[t];
        }
      }
    }
  }

  GridScenario scenario{RoadNetwork(std::move(lanes), std::move(roads), std::move(nodes)), {}};

  Rng rng = make_rng(demand.seed, "scenario");
  auto route_from = [&](int r, int c, int entry_side) {
    std::vector<int> route{in_road[node_index(r, c)][entry_side]};
    const int heading = (entry_side + 2) % 4;
    // Count intersections on the straight line so the turn point is uniform.
    int span = 0;
    for (int rr = r, cc = c; inside(rr, cc); rr += kDr[heading], cc += kDc[heading]) ++span;
    std::optional<Turn> turn;
    int turn_at = -1;
    const double u = uniform01(rng);
    if (u >= demand.through_share) {
      turn = (u - demand.through_share) < (1.0 - demand.through_share) / 2 ? Turn::Left : Turn::Right;
      turn_at = uniform_index(rng, span);
    }
    int in_side = entry_side;
    for (int step = 0;; ++step) {
      const Turn t = step == turn_at ? *turn : Turn::Through;
      const int out_side = exit_approach(in_side, t);
      route.push_back(out_road[node_index(r, c)][out_side]);
      r += kDr[out_side];
      c += kDc[out_side];
      if (!inside(r, c)) break;
      in_side = (out_side + 2) % 4;
    }
    return route;
  };

  const double per_flow_rate = demand.vehicles_per_hour / demand.flows_per_entry;
  if (per_flow_rate > 0.0) {
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        for (int a = 0; a < 4; ++a) {
          if (inside(r + kDr[a], c + kDc[a])) continue;
          for (int f = 0; f < demand.flows_per_entry; ++f) {
            FlowSpec spec;
            spec.route = route_from(r, c, a);
            // Jitter each flow's headway by +-25% so entries are not in lockstep.
            const double base = 3600.0 / per_flow_rate;
            spec.interval = std::max(1, static_cast<int>(std::lround(base * (0.75 + 0.5 * uniform01(rng)))));
            spec.start_time = uniform_index(rng, spec.interval);
            spec.end_time = demand.horizon - 1;
            if (spec.start_time <= spec.end_time) scenario.flows.push_back(std::move(spec));
          }
        }
      }
    }
  }
  for (const FlowSpec& f : scenario.flows) validate_route(f.route, scenario.network);
  return scenario;
}

}  // namespace citylight
