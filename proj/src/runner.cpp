#include "citylight/runner.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "citylight/features.hpp"
#include "citylight/rng.hpp"

namespace citylight {

std::uint64_t Scenario::hash() const {
  const std::string doc = to_json(*network).dump() + flows_to_json(flows, *network).dump();
  return fnv1a64(doc);
}

GridDemand desk_demand(std::uint64_t seed, int horizon) {
  GridDemand d;
  d.vehicles_per_hour = 380.0;
  d.flows_per_entry = 3;
  d.through_share = 0.6;
  d.horizon = horizon;
  d.seed = seed;
  return d;
}

Scenario grid_scenario(int rows, int cols, double lane_length, const GridDemand& demand) {
  GridScenario g = gen_grid(rows, cols, lane_length, demand);
  return Scenario{std::make_shared<const RoadNetwork>(std::move(g.network)), std::move(g.flows), SimParams{}};
}

Scenario desk_scenario(std::uint64_t seed, int horizon) {
  return grid_scenario(kDeskRows, kDeskCols, kDeskLaneLength, desk_demand(seed, horizon));
}

namespace {

struct Signals {
  std::vector<ControllerState> states;
  std::vector<PhaseMask> valid;
  std::vector<SlotMask> permitted;

  explicit Signals(const RoadNetwork& net) {
    for (const Intersection& node : net.intersections()) {
      valid.push_back(node.valid_phases());
      states.push_back(ControllerState{initial_phase(valid.back()), 0, 0, std::nullopt});
    }
    permitted.resize(states.size());
  }

  void refresh_permitted() {
    for (std::size_t i = 0; i < states.size(); ++i) permitted[i] = permitted_slots(states[i]);
  }

  void tick_all() {
    for (ControllerState& cs : states) cs = tick(cs);
  }
};

}  // namespace

EpisodeResult run_episode(const Scenario& scenario, Agent& agent, const EpisodeOptions& options) {
  SimWorld world(scenario.network, scenario.flows, scenario.sim);
  const RoadNetwork& net = world.network();
  Signals signals(net);
  EpisodeResult result;
  double latency_sum = 0.0;

  if (options.metrics_csv) *options.metrics_csv << "t,served,delay_index\n";
  if (options.trace_csv) *options.trace_csv << "t,intersection,layer,round,phase\n";
  if (options.features_csv) {
    *options.features_csv << "t,intersection";
    for (int f = 0; f < kStateDim; ++f) *options.features_csv << ",f" << f;
    *options.features_csv << '\n';
  }

  while (world.clock() < options.horizon) {
    const int t = world.clock();
    if (t % options.action_period == 0) {
      for (int i = 0; i < static_cast<int>(net.intersections().size()); ++i) {
        ControllerState& cs = signals.states[i];
        if (!net.intersection(i).signalized || cs.all_red_remaining > 0) continue;
        const ZoneStats stats60 = zone_stats(world, i, options.policy.k_trigger);
        if (options.on_boundary) options.on_boundary(world, i, cs, stats60);
        if (agent.uses_triggers() && !should_trigger(cs, stats60, options.policy)) continue;

        if (options.features_csv) {
          const StateVector s = build_state(world, i, cs.current_phase, cs.green_elapsed);
          *options.features_csv << t << ',' << net.intersection(i).id;
          for (double v : s) *options.features_csv << ',' << v;
          *options.features_csv << '\n';
        }
        const auto start = std::chrono::steady_clock::now();
        const PhaseId phase = agent.decide(DecisionContext{world, i, cs, signals.valid[i]});
        const double us = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
        latency_sum += us;
        result.max_decision_us = std::max(result.max_decision_us, us);
        ++result.decisions;
        if (phase != cs.current_phase) ++result.switches;
        if (options.trace_csv) {
          const auto rule = agent.last_rule_decision();
          *options.trace_csv << t << ',' << net.intersection(i).id << ',' << (rule ? rule->layer : 0) << ','
                             << (rule ? rule->round : 0) << ',' << phase.value() << '\n';
        }
        cs = request_phase(cs, phase, signals.valid[i]);
      }
    }
    signals.refresh_permitted();
    world.step(signals.permitted);
    if (options.on_tick) options.on_tick(world, signals.states);
    signals.tick_all();

    if (world.clock() % kMetricsPeriod == 0) {
      evaluate_metrics(world, result.metrics);
      const MetricsSample& s = result.metrics.samples.back();
      if (options.metrics_csv) *options.metrics_csv << s.t << ',' << s.served << ',' << s.delay_index << '\n';
      if (result.metrics.terminated_at && !options.run_past_threshold) break;
    }
  }
  // The score stays the count at termination even when the run continued.
  result.metrics.served = result.metrics.terminated_at
                              ? result.metrics.samples[*result.metrics.terminated_at / kMetricsPeriod - 1].served
                              : world.served_count();
  result.end_time = world.clock();
  if (result.decisions > 0) result.mean_decision_us = latency_sum / static_cast<double>(result.decisions);
  return result;
}

nlohmann::json summary_json(const EpisodeResult& r) {
  nlohmann::json j;
  j["served"] = r.metrics.served;
  j["terminated_at"] = r.metrics.terminated_at ? nlohmann::json(*r.metrics.terminated_at) : nlohmann::json(nullptr);
  j["final_delay_index"] = r.metrics.samples.empty() ? 1.0 : r.metrics.samples.back().delay_index;
  j["end_time"] = r.end_time;
  j["decisions"] = r.decisions;
  j["switches"] = r.switches;
  return j;
}

// ---------------------------------------------------------------------------

TrainResult train_dqn(const TrainConfig& cfg, const TrainOptions& options, std::ostream* curve_csv) {
  if (!options.scenario_for_episode) throw std::invalid_argument("train_dqn: no scenario source");
  DqnLearner learner(cfg);
  TriggerPolicy policy;
  policy.kind = options.trigger;
  policy.green_max = cfg.green_sec;

  struct Pending {
    StateVector state;
    int action;
    ZoneStats stats;
  };

  if (options.validation_scenario && (options.validate_every < 1 || options.validation_runs < 1)) {
    throw std::invalid_argument("train_dqn: validation cadence and runs must be positive");
  }
  std::vector<Scenario> validation;
  if (options.validation_scenario) {
    for (int k = 0; k < options.validation_runs; ++k) validation.push_back(options.validation_scenario(k));
  }
  auto validate = [&](const QNetwork& net) {
    DqnAgent agent({net});
    EpisodeOptions o;
    o.policy = policy;
    o.horizon = options.horizon;
    double sum = 0.0;
    for (const Scenario& s : validation) sum += static_cast<double>(run_episode(s, agent, o).metrics.served);
    return sum / static_cast<double>(validation.size());
  };

  TrainResult result;
  std::optional<QNetwork> best;
  if (curve_csv) *curve_csv << "episode,served,delay,terminated_at,mean_loss,epsilon\n";
  for (int ep = 0; ep < options.episodes; ++ep) {
    const Scenario scenario = options.scenario_for_episode(ep);
    SimWorld world(scenario.network, scenario.flows, scenario.sim);
    const RoadNetwork& net = world.network();
    const int n = static_cast<int>(net.intersections().size());
    Signals signals(net);
    std::vector<std::optional<Pending>> pending(n);
    EpisodeMetrics metrics;
    double loss_sum = 0.0;
    int loss_count = 0;

    auto close_transition = [&](int i, const StateVector& next, const ZoneStats& stats, bool terminal) {
      if (!pending[i]) return;
      Experience e;
      e.state = pending[i]->state;
      e.action = pending[i]->action;
      e.reward = cfg.reward_scale *
                 compute_reward(options.reward, RewardSnapshot{pending[i]->stats, stats}, options.absolute_downstream);
      e.next_state = next;
      e.mask = signals.valid[i];
      e.terminal = terminal;
      learner.remember(std::move(e));
    };

    while (world.clock() < options.horizon) {
      const int t = world.clock();
      if (t % kActionPeriod == 0) {
        bool decided = false;
        for (int i = 0; i < n; ++i) {
          ControllerState& cs = signals.states[i];
          if (!net.intersection(i).signalized || cs.all_red_remaining > 0) continue;
          const ZoneStats stats60 = zone_stats(world, i, policy.k_trigger);
          if (!should_trigger(cs, stats60, policy)) continue;
          const StateVector s = build_state(world, i, cs.current_phase, cs.green_elapsed);
          const ZoneStats stats = zone_stats(world, i, kRewardDistance);
          close_transition(i, s, stats, false);
          const PhaseId phase = act(learner.online(), s, signals.valid[i], learner.epsilon(), learner.rng());
          pending[i] = Pending{s, phase.index(), stats};
          cs = request_phase(cs, phase, signals.valid[i]);
          decided = true;
        }
        if (decided) {
          if (auto r = learner.update()) {
            loss_sum += r->q_loss + cfg.reward_head_weight * r->r_loss;
            ++loss_count;
          }
        }
      }
      signals.refresh_permitted();
      world.step(signals.permitted);
      signals.tick_all();
      if (world.clock() % kMetricsPeriod == 0) {
        evaluate_metrics(world, metrics);
        if (metrics.terminated_at && !options.run_past_threshold) {
          // Scoring ends here: close every open transition as terminal.
          for (int i = 0; i < n; ++i) {
            if (!pending[i]) continue;
            const ControllerState& cs = signals.states[i];
            close_transition(i, build_state(world, i, cs.current_phase, cs.green_elapsed),
                             zone_stats(world, i, kRewardDistance), true);
          }
          break;
        }
      }
    }

    TrainCurveRow row;
    row.episode = ep;
    if (metrics.terminated_at) {
      const MetricsSample& at = metrics.samples[*metrics.terminated_at / kMetricsPeriod - 1];
      row.served = at.served;
      row.delay = at.delay_index;
      row.terminated_at = *metrics.terminated_at;
    } else {
      row.served = world.served_count();
      row.delay = metrics.samples.empty() ? 1.0 : metrics.samples.back().delay_index;
    }
    row.mean_loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
    row.epsilon = learner.epsilon();
    result.curve.push_back(row);
    if (curve_csv) {
      *curve_csv << row.episode << ',' << row.served << ',' << row.delay << ',' << row.terminated_at << ','
                 << row.mean_loss << ',' << row.epsilon << '\n'
                 << std::flush;
    }
    learner.end_episode();
    const bool last = ep + 1 == options.episodes;
    if (!validation.empty() && ((ep + 1) % options.validate_every == 0 || last)) {
      const double score = validate(learner.online());
      if (!best || score >= result.best_validation) {
        best = learner.online();
        result.best_validation = score;
        result.best_episode = ep;
      }
    }
  }
  result.net = best ? *best : learner.online();
  result.cfg_hash = config_hash(cfg);
  return result;
}

// ---------------------------------------------------------------------------

ComparisonReport compare(const Scenario& scenario, std::span<Agent* const> agents, const EpisodeOptions& options) {
  if (agents.size() < 2) throw std::invalid_argument("compare: at least two agents required");
  ComparisonReport report;
  report.scenario_hash = scenario.hash();
  for (Agent* agent : agents) {
    const EpisodeResult r = run_episode(scenario, *agent, options);
    AgentRow row;
    row.agent = agent->name();
    row.served = r.metrics.served;
    row.final_delay = r.metrics.samples.empty() ? 1.0 : r.metrics.samples.back().delay_index;
    row.terminated_at = r.metrics.terminated_at;
    row.series = r.metrics.samples;
    row.mean_decision_us = r.mean_decision_us;
    row.max_decision_us = r.max_decision_us;
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_report(const ComparisonReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(dir / "comparison.csv");
    csv << "agent,served,final_delay,terminated_at,mean_decision_us,max_decision_us\n";
    for (const AgentRow& r : report.rows) {
      csv << r.agent << ',' << r.served << ',' << r.final_delay << ','
          << (r.terminated_at ? std::to_string(*r.terminated_at) : "") << ',' << r.mean_decision_us << ','
          << r.max_decision_us << '\n';
    }
  }
  {
    std::ofstream csv(dir / "metrics.csv");
    csv << "agent,t,served,delay_index\n";
    for (const AgentRow& r : report.rows) {
      for (const MetricsSample& s : r.series) csv << r.agent << ',' << s.t << ',' << s.served << ',' << s.delay_index << '\n';
    }
  }
  std::ofstream md(dir / "report.md");
  md << "# Agent comparison\n\nScenario hash: `" << std::hex << report.scenario_hash << std::dec << "`\n\n";
  md << "| Agent | Served/Delay | Terminated at | Mean decision (us) |\n|---|---|---|---|\n";
  for (const AgentRow& r : report.rows) {
    md << "| " << r.agent << " | " << r.served << '/' << std::fixed << std::setprecision(3) << r.final_delay << " | "
       << (r.terminated_at ? std::to_string(*r.terminated_at) : "-") << " | " << std::setprecision(1)
       << r.mean_decision_us << " |\n";
  }
}

std::vector<SweepCell> sweep(std::span<const std::pair<RewardKind, QNetwork>> models,
                             std::span<const Scenario> scenarios, int horizon) {
  constexpr TriggerKind kPolicies[3] = {TriggerKind::TP1, TriggerKind::TP2, TriggerKind::TP3};
  const int n_models = static_cast<int>(models.size());
  const int n_seeds = static_cast<int>(scenarios.size());
  if (n_seeds == 0) throw std::invalid_argument("sweep: no scenarios");
  const int n_tasks = n_models * 3 * n_seeds;
  std::vector<EpisodeResult> results(n_tasks);

  // One world per task; tasks share nothing mutable.
#pragma omp parallel for schedule(dynamic)
  for (int task = 0; task < n_tasks; ++task) {
    const int m = task / (3 * n_seeds);
    const int p = (task / n_seeds) % 3;
    const int s = task % n_seeds;
    DqnAgent agent({models[m].second});
    EpisodeOptions opts;
    opts.policy.kind = kPolicies[p];
    opts.horizon = horizon;
    results[task] = run_episode(scenarios[s], agent, opts);
  }

  std::vector<SweepCell> cells;
  for (int m = 0; m < n_models; ++m) {
    for (int p = 0; p < 3; ++p) {
      SweepCell cell{models[m].first, kPolicies[p], 0.0, 0.0};
      for (int s = 0; s < n_seeds; ++s) {
        const EpisodeResult& r = results[(m * 3 + p) * n_seeds + s];
        cell.served += static_cast<double>(r.metrics.served) / n_seeds;
        cell.delay += (r.metrics.samples.empty() ? 1.0 : r.metrics.samples.back().delay_index) / n_seeds;
      }
      cells.push_back(cell);
    }
  }
  return cells;
}

std::string sweep_table_markdown(std::span<const SweepCell> cells) {
  std::ostringstream md;
  md << "| Rewards | TP1 | TP2 | TP3 |\n|---|---|---|---|\n";
  for (std::size_t i = 0; i + 2 < cells.size(); i += 3) {
    md << "| " << to_string(cells[i].reward);
    for (int p = 0; p < 3; ++p) {
      md << " | " << std::fixed << std::setprecision(1) << cells[i + p].served << '/' << std::setprecision(3)
         << cells[i + p].delay;
    }
    md << " |\n";
  }
  return md.str();
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json rule{{"k_up", cfg.rule.k_up},
                      {"mu", cfg.rule.mu},
                      {"c_block_start", cfg.rule.c_block_start},
                      {"c_block_end", cfg.rule.c_block_end},
                      {"c_balance_start", cfg.rule.c_balance_start},
                      {"c_balance_end", cfg.rule.c_balance_end},
                      {"schedule_seconds", cfg.rule.schedule_seconds},
                      {"c_speed", cfg.rule.c_speed}};
  return {{"network", cfg.network_path},
          {"flows", cfg.flows_path},
          {"grid",
           {{"rows", cfg.grid.rows},
            {"cols", cfg.grid.cols},
            {"lane_length", cfg.grid.lane_length},
            {"vehicles_per_hour", cfg.grid.vehicles_per_hour}}},
          {"agents", cfg.agents},
          {"models", cfg.models},
          {"reward", std::string(to_string(cfg.reward))},
          {"trigger_policy", std::string(to_string(cfg.trigger))},
          {"green_max", cfg.green_max},
          {"literal_downstream_equality", cfg.literal_downstream_equality},
          {"absolute_downstream", cfg.absolute_downstream},
          {"horizon", cfg.horizon},
          {"seed", cfg.seed},
          {"fixed_period", cfg.fixed_period},
          {"rule", rule},
          {"output_dir", cfg.output_dir}};
}

namespace {

template <typename T>
void read_key(const nlohmann::json& obj, const std::string& prefix, const char* key, T& field) {
  if (!obj.contains(key)) return;
  try {
    obj.at(key).get_to(field);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config key '" + prefix + key + "': " + e.what());
  }
}

void reject_unknown(const nlohmann::json& obj, const std::string& prefix, std::initializer_list<const char*> known) {
  if (!obj.is_object()) throw ValidationError("config '" + prefix + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    const bool ok = std::any_of(known.begin(), known.end(), [&](const char* k) { return key == k; });
    if (!ok) throw ValidationError("unknown config key '" + prefix + key + "'");
  }
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& doc) {
  reject_unknown(doc, "",
                 {"network", "flows", "grid", "agents", "models", "reward", "trigger_policy", "green_max",
                  "literal_downstream_equality", "absolute_downstream", "horizon", "seed", "fixed_period", "rule",
                  "output_dir", "all_red", "action_period"});
  RunConfig c;
  read_key(doc, "", "network", c.network_path);
  read_key(doc, "", "flows", c.flows_path);
  if (doc.contains("grid")) {
    const auto& g = doc.at("grid");
    reject_unknown(g, "grid.", {"rows", "cols", "lane_length", "vehicles_per_hour"});
    read_key(g, "grid.", "rows", c.grid.rows);
    read_key(g, "grid.", "cols", c.grid.cols);
    read_key(g, "grid.", "lane_length", c.grid.lane_length);
    read_key(g, "grid.", "vehicles_per_hour", c.grid.vehicles_per_hour);
  }
  read_key(doc, "", "agents", c.agents);
  read_key(doc, "", "models", c.models);
  std::string name;
  if (doc.contains("reward")) {
    read_key(doc, "", "reward", name);
    try {
      c.reward = parse_reward(name);
    } catch (const std::exception& e) {
      throw ValidationError(std::string("config key 'reward': ") + e.what());
    }
  }
  if (doc.contains("trigger_policy")) {
    read_key(doc, "", "trigger_policy", name);
    try {
      c.trigger = parse_trigger(name);
    } catch (const std::exception& e) {
      throw ValidationError(std::string("config key 'trigger_policy': ") + e.what());
    }
  }
  int fixed_value = 0;
  read_key(doc, "", "all_red", fixed_value = kAllRedSeconds);
  if (fixed_value != kAllRedSeconds) throw ValidationError("config key 'all_red': only 5 is supported");
  read_key(doc, "", "action_period", fixed_value = kActionPeriod);
  if (fixed_value != kActionPeriod) throw ValidationError("config key 'action_period': only 10 is supported");
  read_key(doc, "", "green_max", c.green_max);
  read_key(doc, "", "literal_downstream_equality", c.literal_downstream_equality);
  read_key(doc, "", "absolute_downstream", c.absolute_downstream);
  read_key(doc, "", "horizon", c.horizon);
  read_key(doc, "", "seed", c.seed);
  read_key(doc, "", "fixed_period", c.fixed_period);
  read_key(doc, "", "output_dir", c.output_dir);
  if (doc.contains("rule")) {
    const auto& r = doc.at("rule");
    reject_unknown(r, "rule.",
                   {"k_up", "mu", "c_block_start", "c_block_end", "c_balance_start", "c_balance_end",
                    "schedule_seconds", "c_speed"});
    read_key(r, "rule.", "k_up", c.rule.k_up);
    read_key(r, "rule.", "mu", c.rule.mu);
    read_key(r, "rule.", "c_block_start", c.rule.c_block_start);
    read_key(r, "rule.", "c_block_end", c.rule.c_block_end);
    read_key(r, "rule.", "c_balance_start", c.rule.c_balance_start);
    read_key(r, "rule.", "c_balance_end", c.rule.c_balance_end);
    read_key(r, "rule.", "schedule_seconds", c.rule.schedule_seconds);
    read_key(r, "rule.", "c_speed", c.rule.c_speed);
  }
  if (c.horizon <= 0) throw ValidationError("config key 'horizon': must be > 0");
  if (c.green_max <= 0) throw ValidationError("config key 'green_max': must be > 0");
  if (c.fixed_period <= 0) throw ValidationError("config key 'fixed_period': must be > 0");
  if (c.grid.rows < 1 || c.grid.cols < 1) throw ValidationError("config key 'grid': rows and cols must be >= 1");
  if (c.flows_path.empty() != c.network_path.empty()) {
    throw ValidationError("config keys 'network' and 'flows' must be given together");
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config '" + path.string() + "': " + e.what());
  }
  try {
    return run_config_from_json(doc);
  } catch (const ValidationError& e) {
    throw ValidationError("config '" + path.string() + "': " + e.what());
  }
}

Scenario make_scenario(const RunConfig& cfg) {
  if (!cfg.network_path.empty()) {
    auto net = std::make_shared<const RoadNetwork>(load_network(cfg.network_path));
    auto flows = load_flows(cfg.flows_path, *net);
    return Scenario{std::move(net), std::move(flows), SimParams{}};
  }
  GridDemand demand = desk_demand(cfg.seed, cfg.horizon);
  if (cfg.grid.vehicles_per_hour > 0.0) demand.vehicles_per_hour = cfg.grid.vehicles_per_hour;
  return grid_scenario(cfg.grid.rows, cfg.grid.cols, cfg.grid.lane_length, demand);
}

TriggerPolicy make_policy(const RunConfig& cfg) {
  TriggerPolicy p;
  p.kind = cfg.trigger;
  p.green_max = cfg.green_max;
  p.literal_downstream_equality = cfg.literal_downstream_equality;
  return p;
}

std::unique_ptr<Agent> make_agent(const std::string& name, const RunConfig& cfg) {
  if (name == "fixed_time") return std::make_unique<FixedTimeAgent>(cfg.fixed_period);
  if (name == "max_pressure") return std::make_unique<MaxPressureAgent>();
  if (name == "rule") return std::make_unique<RuleAgent>(cfg.rule);
  if (name == "dqn_single" || name == "dqn_ensemble" || name == "dqn_hybrid") {
    if (cfg.models.empty()) throw ValidationError("agent '" + name + "' needs at least one model checkpoint");
    std::vector<QNetwork> nets;
    const std::size_t n = name == "dqn_single" ? 1 : cfg.models.size();
    for (std::size_t i = 0; i < n; ++i) nets.push_back(load_checkpoint(cfg.models[i]));
    return std::make_unique<DqnAgent>(std::move(nets), name == "dqn_hybrid", cfg.rule);
  }
  throw ValidationError("unknown agent '" + name + "'");
}

}  // namespace citylight
