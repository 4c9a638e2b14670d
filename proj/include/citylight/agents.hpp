#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "citylight/control.hpp"
#include "citylight/dqn.hpp"
#include "citylight/rule_agent.hpp"
#include "citylight/traffic_sim.hpp"

namespace citylight {

struct DecisionContext {
  const SimWorld& world;
  int intersection;
  const ControllerState& controller;
  PhaseMask valid;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string name() const = 0;
  // Agents that ignore the trigger policy are consulted at every action boundary.
  virtual bool uses_triggers() const { return true; }
  virtual PhaseId decide(const DecisionContext& ctx) = 0;
  // Layer of the rule cascade behind the last decision, when one was consulted.
  virtual std::optional<RuleDecision> last_rule_decision() const { return std::nullopt; }
};

// Cycles phases 1..4 (skipping invalid ones), switching once the current
// green has lasted `period` seconds.
class FixedTimeAgent : public Agent {
 public:
  explicit FixedTimeAgent(int period = 30) : period_(period) {}
  std::string name() const override { return "fixed_time"; }
  bool uses_triggers() const override { return false; }
  PhaseId decide(const DecisionContext& ctx) override;

 private:
  int period_;
};

// Greedy argmax of vehicle-count pressure at k = 100, ties to the lowest id.
class MaxPressureAgent : public Agent {
 public:
  explicit MaxPressureAgent(double k = 100.0) : k_(k) {}
  std::string name() const override { return "max_pressure"; }
  PhaseId decide(const DecisionContext& ctx) override;

 private:
  double k_;
};

class RuleAgent : public Agent {
 public:
  explicit RuleAgent(RuleParams params = {}) : params_(params) {}
  std::string name() const override { return "rule"; }
  PhaseId decide(const DecisionContext& ctx) override;
  std::optional<RuleDecision> last_rule_decision() const override { return last_; }

 private:
  RuleParams params_;
  std::optional<RuleDecision> last_;
};

// Greedy over the mean Q of one or more networks. With `hybrid`, the rule
// agent's blocked-lane layer overrides the networks whenever it fires.
class DqnAgent : public Agent {
 public:
  DqnAgent(std::vector<QNetwork> nets, bool hybrid = false, RuleParams params = {});
  std::string name() const override;
  PhaseId decide(const DecisionContext& ctx) override;
  std::optional<RuleDecision> last_rule_decision() const override { return last_; }
  std::int64_t overrides() const { return overrides_; }

 private:
  std::vector<QNetwork> nets_;
  bool hybrid_;
  RuleParams params_;
  std::optional<RuleDecision> last_;
  std::int64_t overrides_ = 0;
};

}  // namespace citylight
