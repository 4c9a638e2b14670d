#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

namespace citylight {

inline constexpr int kNumSlots = 24;
inline constexpr int kNumUpstreamSlots = 12;
inline constexpr int kNumPhases = 8;
inline constexpr int kNoLane = -1;
inline constexpr double kDefaultJamSpacing = 7.5;
inline constexpr double kMinLaneLength = 30.0;

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Approaches in slot order. Upstream slot = 3 * approach + turn,
// downstream slot = 12 + 3 * approach + lane.
enum class Approach : int { North = 0, East = 1, South = 2, West = 3 };
enum class Turn : int { Left = 0, Through = 1, Right = 2 };

constexpr bool is_upstream_slot(int slot) { return slot >= 0 && slot < kNumUpstreamSlots; }
constexpr bool is_right_turn_slot(int slot) { return is_upstream_slot(slot) && slot % 3 == 2; }

// Right-hand traffic: left turns rotate one approach clockwise
// (N-in left exits East), through crosses, right exits counter-clockwise.
constexpr int exit_approach(int in_approach, Turn turn) {
  return (in_approach + 1 + static_cast<int>(turn)) % 4;
}

// Downstream triple (first slot) fed by an upstream slot.
constexpr int downstream_group_start(int upstream_slot) {
  return 12 + 3 * exit_approach(upstream_slot / 3, static_cast<Turn>(upstream_slot % 3));
}

// Turn taken when entering from `in_approach` and leaving by `out_approach`.
// Returns nullopt for a U-turn.
std::optional<Turn> turn_between(int in_approach, int out_approach);

class PhaseId {
 public:
  explicit PhaseId(int value);
  static PhaseId from_index(int index) { return PhaseId(index + 1); }

  int value() const { return value_; }
  int index() const { return value_ - 1; }

  friend bool operator==(PhaseId, PhaseId) = default;
  friend auto operator<=>(PhaseId, PhaseId) = default;

 private:
  int value_;
};

struct PhaseMovements {
  std::array<int, 2> upstream_slots;
  std::array<std::array<int, 3>, 2> downstream_groups;
  bool serves_two_roads;
};

// Pure, identical across intersections.
const PhaseMovements& phase_movements(PhaseId phase);

// Phases whose upstream slots include `slot` (empty for right turns).
std::vector<PhaseId> phases_with_slot(int slot);

using PhaseMask = std::bitset<kNumPhases>;
using SlotMask = std::bitset<kNumUpstreamSlots>;

struct Lane {
  std::string id;
  double length = 0.0;
  double speed_limit = 0.0;
  int capacity = 0;
};

// A road is exactly three lanes ordered (left, through, right).
struct Road {
  std::string id;
  int from = -1;  // intersection index, -1 for the network boundary
  int to = -1;
  std::array<int, 3> lanes{};
};

struct Intersection {
  std::string id;
  std::array<int, kNumSlots> lane_table{};
  bool signalized = true;

  bool has_slot(int slot) const { return lane_table[slot] != kNoLane; }
  bool has_approach(int approach) const { return has_slot(3 * approach) || has_slot(12 + 3 * approach); }
  PhaseMask valid_phases() const;
};

// Where a lane sits relative to the intersections at its two ends.
struct LaneLinks {
  int road = -1;
  int turn_index = 0;           // position inside the road's lane triple
  int upstream_of = -1;         // intersection this lane feeds, or -1
  int upstream_slot = kNoLane;  // slot in that intersection's table
  int downstream_of = -1;       // intersection this lane leaves, or -1
  int downstream_slot = kNoLane;
};

class RoadNetwork {
 public:
  RoadNetwork() = default;
  RoadNetwork(std::vector<Lane> lanes, std::vector<Road> roads, std::vector<Intersection> intersections);

  const std::vector<Lane>& lanes() const { return lanes_; }
  const std::vector<Road>& roads() const { return roads_; }
  const std::vector<Intersection>& intersections() const { return intersections_; }

  const Lane& lane(int index) const { return lanes_.at(index); }
  const Road& road(int index) const { return roads_.at(index); }
  const Intersection& intersection(int index) const { return intersections_.at(index); }
  const LaneLinks& links(int lane_index) const { return links_.at(lane_index); }

  std::optional<int> find_lane(const std::string& id) const;
  std::optional<int> find_road(const std::string& id) const;
  std::optional<int> find_intersection(const std::string& id) const;

  // Approach index of `road` at intersection `at` (incoming or outgoing).
  int incoming_approach(int road) const;
  int outgoing_approach(int road) const;

  // Turn made at road(a).to when continuing onto road(b); nullopt when
  // the pair is not a legal movement.
  std::optional<Turn> movement(int road_a, int road_b) const;

  friend bool operator==(const RoadNetwork&, const RoadNetwork&);

 private:
  void validate_and_link();

  std::vector<Lane> lanes_;
  std::vector<Road> roads_;
  std::vector<Intersection> intersections_;
  std::vector<LaneLinks> links_;
  std::unordered_map<std::string, int> lane_ids_;
  std::unordered_map<std::string, int> road_ids_;
  std::unordered_map<std::string, int> intersection_ids_;
};

nlohmann::json to_json(const RoadNetwork& net);
RoadNetwork network_from_json(const nlohmann::json& doc, double jam_spacing = kDefaultJamSpacing);
RoadNetwork load_network(const std::filesystem::path& path, double jam_spacing = kDefaultJamSpacing);
void save_network(const RoadNetwork& net, const std::filesystem::path& path);

struct FlowSpec {
  std::vector<int> route;  // road indices
  int start_time = 0;
  int end_time = 0;
  int interval = 1;

  std::vector<int> spawn_times() const;
};

nlohmann::json flows_to_json(const std::vector<FlowSpec>& flows, const RoadNetwork& net);
std::vector<FlowSpec> flows_from_json(const nlohmann::json& doc, const RoadNetwork& net);
std::vector<FlowSpec> load_flows(const std::filesystem::path& path, const RoadNetwork& net);
void save_flows(const std::vector<FlowSpec>& flows, const RoadNetwork& net, const std::filesystem::path& path);

// Throws ValidationError unless `route` is a connected sequence of legal movements.
void validate_route(const std::vector<int>& route, const RoadNetwork& net);

struct GridDemand {
  double vehicles_per_hour = 300.0;  // per boundary entry
  int horizon = 3600;
  int flows_per_entry = 3;
  double through_share = 0.6;        // remainder split between left/right turners
  double speed_limit = 13.89;
  std::uint64_t seed = 1;
};

struct GridScenario {
  RoadNetwork network;
  std::vector<FlowSpec> flows;
};

GridScenario gen_grid(int rows, int cols, double lane_length, const GridDemand& demand);

}  // namespace citylight
