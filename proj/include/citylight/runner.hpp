#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "citylight/agents.hpp"
#include "citylight/control.hpp"
#include "citylight/dqn.hpp"
#include "citylight/rewards.hpp"
#include "citylight/traffic_sim.hpp"

namespace citylight {

struct Scenario {
  std::shared_ptr<const RoadNetwork> network;
  std::vector<FlowSpec> flows;
  SimParams sim;

  std::uint64_t hash() const;  // over the serialized network and flows
};

// Desk-scale benchmark: 4x4 grid of 300 m roads with seeded demand.
inline constexpr int kDeskRows = 4;
inline constexpr int kDeskCols = 4;
inline constexpr double kDeskLaneLength = 300.0;
inline constexpr int kDeskHorizon = 3600;
GridDemand desk_demand(std::uint64_t seed, int horizon = kDeskHorizon);
Scenario desk_scenario(std::uint64_t seed, int horizon = kDeskHorizon);
Scenario grid_scenario(int rows, int cols, double lane_length, const GridDemand& demand);

struct EpisodeOptions {
  TriggerPolicy policy;
  int horizon = kDeskHorizon;
  int action_period = kActionPeriod;
  // Keep simulating after the delay threshold is crossed. Served still
  // reports the count at termination.
  bool run_past_threshold = false;

  // Called at each action boundary for every intersection outside all-red,
  // before the agent is consulted.
  std::function<void(const SimWorld&, int intersection, const ControllerState&, const ZoneStats& stats60)> on_boundary;
  // Called after every tick with the controller states that governed it.
  std::function<void(const SimWorld&, std::span<const ControllerState>)> on_tick;
  std::ostream* metrics_csv = nullptr;   // t,served,delay_index
  std::ostream* trace_csv = nullptr;     // t,intersection,layer,round,phase
  std::ostream* features_csv = nullptr;  // t,intersection,f0..f153
};

struct EpisodeResult {
  EpisodeMetrics metrics;
  std::int64_t decisions = 0;
  std::int64_t switches = 0;
  double mean_decision_us = 0.0;
  double max_decision_us = 0.0;
  int end_time = 0;
};

EpisodeResult run_episode(const Scenario& scenario, Agent& agent, const EpisodeOptions& options);

nlohmann::json summary_json(const EpisodeResult& r);

// ---------------------------------------------------------------------------
// Training

struct TrainOptions {
  RewardKind reward = RewardKind::TwinDQ;
  TriggerKind trigger = TriggerKind::TP3;
  bool absolute_downstream = false;
  int episodes = 40;
  int horizon = kDeskHorizon;
  // Keep simulating past the delay threshold so every episode yields a full
  // horizon of transitions. When false, termination closes open transitions.
  bool run_past_threshold = true;
  std::function<Scenario(int episode)> scenario_for_episode;
  // Every validate_every episodes the greedy policy runs on validation_runs
  // held-out scenarios; the network with the best mean served count is kept.
  // Without a validation source the final network is returned.
  int validate_every = 5;
  int validation_runs = 2;
  std::function<Scenario(int run)> validation_scenario;
};

struct TrainCurveRow {
  int episode = 0;
  std::int64_t served = 0;
  double delay = 1.0;
  int terminated_at = -1;  // -1 when the episode reached its horizon
  double mean_loss = 0.0;
  double epsilon = 0.0;
};

struct TrainResult {
  QNetwork net;
  std::vector<TrainCurveRow> curve;
  std::uint64_t cfg_hash = 0;
  int best_episode = -1;  // episode whose network was kept; -1 for the final one
  double best_validation = 0.0;
};

TrainResult train_dqn(const TrainConfig& cfg, const TrainOptions& options, std::ostream* curve_csv = nullptr);

// ---------------------------------------------------------------------------
// Comparison

struct AgentRow {
  std::string agent;
  std::int64_t served = 0;
  double final_delay = 1.0;
  std::optional<int> terminated_at;
  std::vector<MetricsSample> series;
  double mean_decision_us = 0.0;
  double max_decision_us = 0.0;
};

struct ComparisonReport {
  std::uint64_t scenario_hash = 0;
  std::vector<AgentRow> rows;
};

ComparisonReport compare(const Scenario& scenario, std::span<Agent* const> agents, const EpisodeOptions& options);
void write_report(const ComparisonReport& report, const std::filesystem::path& dir);

// "served/delay" cells, rewards by rows and trigger policies by columns.
struct SweepCell {
  RewardKind reward;
  TriggerKind trigger;
  double served = 0.0;  // mean over seeds
  double delay = 0.0;
};

std::vector<SweepCell> sweep(std::span<const std::pair<RewardKind, QNetwork>> models,
                             std::span<const Scenario> scenarios, int horizon);
std::string sweep_table_markdown(std::span<const SweepCell> cells);

// ---------------------------------------------------------------------------
// Run configuration

struct GridSpec {
  int rows = kDeskRows;
  int cols = kDeskCols;
  double lane_length = kDeskLaneLength;
  double vehicles_per_hour = 0.0;  // 0 keeps the desk default
};

struct RunConfig {
  std::string network_path;  // empty: generate a grid from `grid`
  std::string flows_path;
  GridSpec grid;
  std::vector<std::string> agents{"fixed_time", "max_pressure"};
  std::vector<std::string> models;  // checkpoints for the dqn agents
  RewardKind reward = RewardKind::TwinDQ;
  TriggerKind trigger = TriggerKind::TP3;
  int green_max = 30;
  bool literal_downstream_equality = false;
  bool absolute_downstream = false;
  int horizon = kDeskHorizon;
  std::uint64_t seed = 1;
  int fixed_period = 30;
  RuleParams rule;
  std::string output_dir = "runs/latest";
};

nlohmann::json to_json(const RunConfig& cfg);
// Missing keys keep their defaults; unknown keys and bad values throw
// ValidationError naming the key.
RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

Scenario make_scenario(const RunConfig& cfg);
TriggerPolicy make_policy(const RunConfig& cfg);
// fixed_time | max_pressure | rule | dqn_single | dqn_ensemble | dqn_hybrid
std::unique_ptr<Agent> make_agent(const std::string& name, const RunConfig& cfg);

}  // namespace citylight
