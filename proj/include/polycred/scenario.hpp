#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "polycred/mechanisms.hpp"
#include "polycred/polymatroid.hpp"

namespace polycred {

// Three-tier edge workload: agents submit tasks that travel
// sensor -> edge -> cloud. Tier capacities are totals, split evenly over the
// tier's nodes.
struct ScenarioConfig {
    int n_agents = 40;
    std::vector<double> tier_capacities{200, 300, 500};
    std::vector<int> tier_nodes{4, 2, 1};
    std::vector<double> tier_latencies_ms{5, 15, 50};
    std::vector<double> deadlines_ms{100, 150, 200};
    double value_decay_per_ms = 0.005;
    double latency_jitter_ms = 25.0;  // mean of the exponential queueing delay
    double arrival_rate = 2.0;        // Poisson tasks per agent per round
    double value_lo = 1.0;            // base task value ~ Unif[lo, hi]
    double value_hi = 11.0;
    double task_units = 3.0;          // capacity units one task needs
    int rounds = 100;
    std::vector<std::uint64_t> seeds{17, 42, 101, 2024, 31337};
    TopologyClass topology = TopologyClass::tree;

    // Throws ConfigError on any invalid field.
    void validate() const;
    // Support of a realized bid: [0, hi].
    Prior bid_support() const;
};

inline constexpr int kScenarioSchemaVersion = 1;

nlohmann::ordered_json to_json(const ScenarioConfig& c);
// Flat object; unknown keys and a wrong schema_version are config errors.
ScenarioConfig scenario_from_json(const nlohmann::json& j);

struct Task {
    double base_value = 0.0;
    double deadline_ms = 0.0;
    double latency_ms = 0.0;
    double realized_value = 0.0;
};

struct RoundProfile {
    std::uint64_t seed = 0;
    int round = 0;
    std::vector<std::vector<Task>> tasks;  // per agent
    BidProfile bids;                       // highest realized value per agent
    std::vector<double> demand_units;      // live tasks * task_units
};

// base * exp(-decay * latency) when the deadline is met, else 0.
double realized_value(double base, double latency_ms, double deadline_ms, double decay_per_ms);

// Independent stream per (seed, round, agent); stable when other streams are
// added.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t round, std::uint64_t agent);

RoundProfile generate_round(const ScenarioConfig& c, std::uint64_t seed, int round);

// Tier network for one round: each agent's private leaf carries its demand.
//   tree:    agent -> sensor (a mod S) -> its edge node -> cloud
//   sp:      agent -> zone entry -> either sensor of the zone -> zone edge -> cloud
//   general: agent multi-homed to two sensors drawn from the round stream
CapacityDag scenario_network(const ScenarioConfig& c, const RoundProfile& r, TopologyClass cls);

}  // namespace polycred
