#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "citylight/runner.hpp"

namespace fs = std::filesystem;
using namespace citylight;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

// Options shared by the scenario-running subcommands. Flags override the
// config file, which overrides defaults.
struct Common {
  std::string config_path;
  std::string network, flows, out, agents, ensemble, reward, policy;
  std::uint64_t seed = 0;
  int horizon = 0;
  double vph = 0.0;

  void attach(CLI::App* app, bool with_out = true) {
    app->add_option("--config", config_path, "JSON run config");
    app->add_option("--network", network, "network JSON (requires --flows)");
    app->add_option("--flows", flows, "flows JSON");
    app->add_option("--seed", seed, "scenario seed");
    app->add_option("--horizon", horizon, "episode length in seconds");
    app->add_option("--vph", vph, "grid demand per boundary entry (vehicles/hour)");
    if (with_out) app->add_option("--out", out, "output directory");
    app->add_option("--ensemble", ensemble, "comma-separated model checkpoints");
    app->add_option("--reward", reward, "delay|queue|dq|mp|mp_dq|twin_dq");
    app->add_option("--policy", policy, "tp1|tp2|tp3");
  }

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (!network.empty()) cfg.network_path = network;
    if (!flows.empty()) cfg.flows_path = flows;
    if (cfg.network_path.empty() != cfg.flows_path.empty()) {
      throw ValidationError("--network and --flows must be given together");
    }
    if (seed != 0) cfg.seed = seed;
    if (horizon > 0) cfg.horizon = horizon;
    if (vph > 0.0) cfg.grid.vehicles_per_hour = vph;
    if (!out.empty()) cfg.output_dir = out;
    if (!agents.empty()) cfg.agents = split_list(agents);
    if (!ensemble.empty()) cfg.models = split_list(ensemble);
    if (!reward.empty()) cfg.reward = parse_reward(reward);
    if (!policy.empty()) cfg.trigger = parse_trigger(policy);
    return cfg;
  }
};

int cmd_gen_network(int rows, int cols, double length, double vph, std::uint64_t seed, int horizon,
                    const std::string& out) {
  GridDemand demand = desk_demand(seed, horizon);
  if (vph > 0.0) demand.vehicles_per_hour = vph;
  const GridScenario g = gen_grid(rows, cols, length, demand);
  fs::create_directories(out);
  save_network(g.network, fs::path(out) / "network.json");
  save_flows(g.flows, g.network, fs::path(out) / "flows.json");
  std::cout << "wrote " << g.network.intersections().size() << " intersections, " << g.flows.size()
            << " flows to " << out << '\n';
  return 0;
}

int cmd_run(const RunConfig& cfg, bool dump_features, bool trace) {
  if (cfg.agents.empty()) throw ValidationError("run needs an agent");
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  write_json(dir / "config.json", to_json(cfg));
  const Scenario scenario = make_scenario(cfg);
  auto agent = make_agent(cfg.agents.front(), cfg);

  EpisodeOptions opts;
  opts.policy = make_policy(cfg);
  opts.horizon = cfg.horizon;
  std::ofstream metrics = open_out(dir / "metrics.csv");
  opts.metrics_csv = &metrics;
  std::ofstream features, trace_out;
  if (dump_features) {
    features = open_out(dir / "features.csv");
    opts.features_csv = &features;
  }
  if (trace) {
    trace_out = open_out(dir / "trace.csv");
    opts.trace_csv = &trace_out;
  }
  const EpisodeResult r = run_episode(scenario, *agent, opts);
  nlohmann::json summary = summary_json(r);
  summary["agent"] = agent->name();
  summary["scenario_hash"] = scenario.hash();
  write_json(dir / "summary.json", summary);
  {
    std::ofstream md = open_out(dir / "report.md");
    md << "# Run\n\n| Agent | Served/Delay | Terminated at |\n|---|---|---|\n| " << agent->name() << " | "
       << summary["served"] << '/' << summary["final_delay_index"] << " | "
       << (r.metrics.terminated_at ? std::to_string(*r.metrics.terminated_at) : "-") << " |\n";
  }
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& train_config, int episodes, const std::string& model_out,
              const std::string& curve) {
  TrainConfig tc = train_config.empty() ? TrainConfig{} : [&] {
    std::ifstream in(train_config);
    if (!in) throw ValidationError("cannot open train config '" + train_config + "'");
    return train_config_from_json(nlohmann::json::parse(in));
  }();
  tc.seed = cfg.seed;
  tc.validate();

  TrainOptions opts;
  opts.reward = cfg.reward;
  opts.trigger = cfg.trigger;
  opts.absolute_downstream = cfg.absolute_downstream;
  opts.episodes = episodes;
  opts.horizon = cfg.horizon;
  opts.scenario_for_episode = [&](int ep) {
    RunConfig c = cfg;
    if (c.network_path.empty()) c.seed = derive_seed(cfg.seed, "scenario" + std::to_string(ep));
    return make_scenario(c);
  };
  opts.validation_scenario = [&](int k) {
    RunConfig c = cfg;
    if (c.network_path.empty()) c.seed = derive_seed(cfg.seed, "validation" + std::to_string(k));
    return make_scenario(c);
  };
  std::ofstream curve_out;
  if (!curve.empty()) curve_out = open_out(curve);
  const TrainResult r = train_dqn(tc, opts, curve.empty() ? nullptr : &curve_out);
  save_checkpoint(r.net, r.cfg_hash, model_out);
  const TrainCurveRow& last = r.curve.back();
  std::cout << "trained " << episodes << " episodes; last served " << last.served << ", delay " << last.delay
            << "; kept episode " << r.best_episode << " (validation served " << r.best_validation << "); wrote "
            << model_out << '\n';
  return 0;
}

int cmd_compare(const RunConfig& cfg) {
  const Scenario scenario = make_scenario(cfg);
  std::vector<std::unique_ptr<Agent>> owned;
  std::vector<Agent*> agents;
  for (const std::string& name : cfg.agents) {
    owned.push_back(make_agent(name, cfg));
    agents.push_back(owned.back().get());
  }
  if (agents.size() < 2) throw ValidationError("compare needs at least two agents");
  EpisodeOptions opts;
  opts.policy = make_policy(cfg);
  opts.horizon = cfg.horizon;
  const ComparisonReport report = compare(scenario, agents, opts);
  fs::create_directories(cfg.output_dir);
  write_json(fs::path(cfg.output_dir) / "config.json", to_json(cfg));
  write_report(report, cfg.output_dir);
  nlohmann::json summary;
  summary["scenario_hash"] = report.scenario_hash;
  for (const AgentRow& row : report.rows) {
    summary["agents"][row.agent] = {{"served", row.served},
                                    {"final_delay_index", row.final_delay},
                                    {"terminated_at", row.terminated_at ? nlohmann::json(*row.terminated_at)
                                                                        : nlohmann::json(nullptr)}};
    std::cout << row.agent << ": " << row.served << '/' << row.final_delay << '\n';
  }
  write_json(fs::path(cfg.output_dir) / "summary.json", summary);
  return 0;
}

// --models dq=a.ckpt,mp_dq=b.ckpt,twin_dq=c.ckpt
int cmd_sweep(const RunConfig& cfg, const std::string& models, int seeds) {
  std::vector<std::pair<RewardKind, QNetwork>> nets;
  for (const std::string& item : split_list(models)) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("--models entries must look like reward=path");
    nets.emplace_back(parse_reward(item.substr(0, eq)), load_checkpoint(item.substr(eq + 1)));
  }
  if (nets.empty()) throw ValidationError("sweep needs --models");
  std::vector<Scenario> scenarios;
  for (int s = 0; s < seeds; ++s) {
    RunConfig c = cfg;
    c.seed = cfg.seed + static_cast<std::uint64_t>(s);
    scenarios.push_back(make_scenario(c));
  }
  const auto cells = sweep(nets, scenarios, cfg.horizon);
  fs::create_directories(cfg.output_dir);
  write_json(fs::path(cfg.output_dir) / "config.json", to_json(cfg));
  {
    std::ofstream csv = open_out(fs::path(cfg.output_dir) / "metrics.csv");
    csv << "reward,policy,served,delay\n";
    for (const SweepCell& c : cells) {
      csv << to_string(c.reward) << ',' << to_string(c.trigger) << ',' << c.served << ',' << c.delay << '\n';
    }
  }
  const std::string table = sweep_table_markdown(cells);
  std::ofstream md = open_out(fs::path(cfg.output_dir) / "report.md");
  md << "# Reward x trigger sweep\n\n" << table;
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"citylight: traffic signal control experiments"};
  app.require_subcommand(1);

  int rows = kDeskRows, cols = kDeskCols, gen_horizon = kDeskHorizon;
  double length = kDeskLaneLength, gen_vph = 0.0;
  std::uint64_t gen_seed = 1;
  std::string gen_out = "scenario";
  auto* gen = app.add_subcommand("gen-network", "write a grid network and seeded flows");
  gen->add_option("--rows", rows);
  gen->add_option("--cols", cols);
  gen->add_option("--length", length, "lane length in meters");
  gen->add_option("--vph", gen_vph, "demand per boundary entry (vehicles/hour)");
  gen->add_option("--horizon", gen_horizon);
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out, "output directory");

  Common run_opts;
  std::string run_agent;
  bool dump_features = false, trace = false;
  auto* run = app.add_subcommand("run", "run one agent for one episode");
  run_opts.attach(run);
  run->add_option("--agent", run_agent, "fixed_time|max_pressure|rule|dqn_single|dqn_ensemble|dqn_hybrid");
  run->add_flag("--dump-features", dump_features, "write the 154-column state CSV");
  run->add_flag("--trace", trace, "write the per-decision trace CSV");

  Common train_opts;
  int episodes = 40;
  std::string model_out = "model.ckpt", curve, train_config;
  auto* train = app.add_subcommand("train", "train a DQN agent");
  train_opts.attach(train, false);
  train->add_option("--episodes", episodes);
  train->add_option("--out", model_out, "checkpoint path");
  train->add_option("--curve", curve, "training curve CSV");
  train->add_option("--train-config", train_config, "JSON TrainConfig overrides");
  bool absolute_downstream = false;
  train->add_flag("--absolute-downstream", absolute_downstream, "penalize downstream change in both directions");

  Common cmp_opts;
  auto* cmp = app.add_subcommand("compare", "run several agents on one scenario");
  cmp_opts.attach(cmp);
  cmp->add_option("--agents", cmp_opts.agents, "comma-separated agent names");

  Common sweep_opts;
  std::string sweep_models;
  int sweep_seeds = 5;
  auto* sw = app.add_subcommand("sweep", "reward x trigger-policy matrix");
  sweep_opts.attach(sw);
  sw->add_option("--models", sweep_models, "reward=checkpoint,...")->required();
  sw->add_option("--seeds", sweep_seeds);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen_network(rows, cols, length, gen_vph, gen_seed, gen_horizon, gen_out);
    if (*run) {
      RunConfig cfg = run_opts.resolve();
      if (!run_agent.empty()) cfg.agents = {run_agent};
      return cmd_run(cfg, dump_features, trace);
    }
    if (*train) {
      RunConfig cfg = train_opts.resolve();
      if (train_opts.policy.empty() && train_opts.config_path.empty()) cfg.trigger = TriggerKind::TP3;
      cfg.absolute_downstream = cfg.absolute_downstream || absolute_downstream;
      return cmd_train(cfg, train_config, episodes, model_out, curve);
    }
    if (*cmp) return cmd_compare(cmp_opts.resolve());
    if (*sw) return cmd_sweep(sweep_opts.resolve(), sweep_models, sweep_seeds);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
