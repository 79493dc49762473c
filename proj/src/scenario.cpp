#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "polycred/errors.hpp"
#include "polycred/scenario.hpp"

namespace polycred {

void ScenarioConfig::validate() const {
    auto positive = [](double x) { return x > 0 && std::isfinite(x); };
    if (n_agents < 2) throw ConfigError("n_agents must be >= 2");
    if (tier_capacities.size() != 3 || tier_nodes.size() != 3 || tier_latencies_ms.size() != 3)
        throw ConfigError("exactly three tiers are supported");
    for (double c : tier_capacities)
        if (!positive(c)) throw ConfigError("tier capacities must be positive");
    for (double l : tier_latencies_ms)
        if (!positive(l)) throw ConfigError("tier latencies must be positive");
    if (tier_nodes[0] < 1 || tier_nodes[1] < 1 || tier_nodes[2] != 1)
        throw ConfigError("tier_nodes must be (S >= 1, E >= 1, 1)");
    if (tier_nodes[0] % tier_nodes[1] != 0) throw ConfigError("sensor count must be a multiple of edge count");
    if (deadlines_ms.empty()) throw ConfigError("deadlines_ms must be non-empty");
    for (double d : deadlines_ms)
        if (!positive(d)) throw ConfigError("deadlines must be positive");
    if (!(value_decay_per_ms >= 0) || !std::isfinite(value_decay_per_ms))
        throw ConfigError("value_decay_per_ms must be >= 0");
    if (!(latency_jitter_ms >= 0) || !std::isfinite(latency_jitter_ms))
        throw ConfigError("latency_jitter_ms must be >= 0");
    if (!positive(arrival_rate)) throw ConfigError("arrival_rate must be positive");
    if (!(value_lo > 0) || !(value_hi > value_lo) || !std::isfinite(value_hi))
        throw ConfigError("need 0 < value_lo < value_hi");
    if (!positive(task_units)) throw ConfigError("task_units must be positive");
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (seeds.empty()) throw ConfigError("seeds must be non-empty");
}

Prior ScenarioConfig::bid_support() const { return Prior{0.0, value_hi}; }

nlohmann::ordered_json to_json(const ScenarioConfig& c) {
    nlohmann::ordered_json j;
    j["schema_version"] = kScenarioSchemaVersion;
    j["n_agents"] = c.n_agents;
    j["tier_capacities"] = c.tier_capacities;
    j["tier_nodes"] = c.tier_nodes;
    j["tier_latencies_ms"] = c.tier_latencies_ms;
    j["deadlines_ms"] = c.deadlines_ms;
    j["value_decay_per_ms"] = c.value_decay_per_ms;
    j["latency_jitter_ms"] = c.latency_jitter_ms;
    j["arrival_rate"] = c.arrival_rate;
    j["value_lo"] = c.value_lo;
    j["value_hi"] = c.value_hi;
    j["task_units"] = c.task_units;
    j["rounds"] = c.rounds;
    j["seeds"] = c.seeds;
    j["topology"] = to_string(c.topology);
    return j;
}

ScenarioConfig scenario_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("scenario config must be a JSON object");
    ScenarioConfig c;
    try {
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string& k = it.key();
            const auto& v = it.value();
            if (k == "schema_version") {
                if (v.get<int>() != kScenarioSchemaVersion) throw ConfigError("unsupported schema_version");
            } else if (k == "n_agents") c.n_agents = v.get<int>();
            else if (k == "tier_capacities") c.tier_capacities = v.get<std::vector<double>>();
            else if (k == "tier_nodes") c.tier_nodes = v.get<std::vector<int>>();
            else if (k == "tier_latencies_ms") c.tier_latencies_ms = v.get<std::vector<double>>();
            else if (k == "deadlines_ms") c.deadlines_ms = v.get<std::vector<double>>();
            else if (k == "value_decay_per_ms") c.value_decay_per_ms = v.get<double>();
            else if (k == "latency_jitter_ms") c.latency_jitter_ms = v.get<double>();
            else if (k == "arrival_rate") c.arrival_rate = v.get<double>();
            else if (k == "value_lo") c.value_lo = v.get<double>();
            else if (k == "value_hi") c.value_hi = v.get<double>();
            else if (k == "task_units") c.task_units = v.get<double>();
            else if (k == "rounds") c.rounds = v.get<int>();
            else if (k == "seeds") c.seeds = v.get<std::vector<std::uint64_t>>();
            else if (k == "topology") c.topology = topology_class_from_string(v.get<std::string>());
            else throw ConfigError("unknown config key: " + k);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    c.validate();
    return c;
}

double realized_value(double base, double latency_ms, double deadline_ms, double decay_per_ms) {
    if (latency_ms > deadline_ms) return 0.0;
    return base * std::exp(-decay_per_ms * latency_ms);
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Stream id of the per-round topology draw; disjoint from agent ids.
constexpr std::uint64_t kNetworkStream = ~std::uint64_t{0};

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t round, std::uint64_t agent) {
    return splitmix(splitmix(splitmix(seed) ^ round) ^ agent);
}

RoundProfile generate_round(const ScenarioConfig& c, std::uint64_t seed, int round) {
    c.validate();
    RoundProfile r;
    r.seed = seed;
    r.round = round;
    r.tasks.resize(c.n_agents);
    r.bids.assign(c.n_agents, 0.0);
    r.demand_units.assign(c.n_agents, 0.0);
    const double path_latency = c.tier_latencies_ms[0] + c.tier_latencies_ms[1] + c.tier_latencies_ms[2];
    for (int a = 0; a < c.n_agents; ++a) {
        std::mt19937_64 rng(stream_seed(seed, round, a));
        std::poisson_distribution<int> count(c.arrival_rate);
        std::uniform_real_distribution<double> base(c.value_lo, c.value_hi);
        std::uniform_int_distribution<std::size_t> deadline(0, c.deadlines_ms.size() - 1);
        std::exponential_distribution<double> jitter(c.latency_jitter_ms > 0 ? 1.0 / c.latency_jitter_ms : 1.0);
        const int k = count(rng);
        int live = 0;
        for (int t = 0; t < k; ++t) {
            Task task;
            task.base_value = base(rng);
            task.deadline_ms = c.deadlines_ms[deadline(rng)];
            task.latency_ms = path_latency + (c.latency_jitter_ms > 0 ? jitter(rng) : 0.0);
            task.realized_value =
                realized_value(task.base_value, task.latency_ms, task.deadline_ms, c.value_decay_per_ms);
            if (task.realized_value > 0) ++live;
            r.bids[a] = std::max(r.bids[a], task.realized_value);
            r.tasks[a].push_back(task);
        }
        r.demand_units[a] = live * c.task_units;
    }
    return r;
}

CapacityDag scenario_network(const ScenarioConfig& c, const RoundProfile& r, TopologyClass cls) {
    c.validate();
    const int S = c.tier_nodes[0], E = c.tier_nodes[1];
    const int per_zone = S / E;
    CapacityDag d;
    d.cls = cls;
    auto node = [&](double cap) {
        d.cap.push_back(cap);
        return d.num_nodes() - 1;
    };
    const int cloud = node(c.tier_capacities[2]);
    d.sink = cloud;
    std::vector<int> edge(E), sensor(S);
    for (int e = 0; e < E; ++e) {
        edge[e] = node(c.tier_capacities[1] / E);
        d.edges.emplace_back(edge[e], cloud);
    }
    for (int s = 0; s < S; ++s) {
        sensor[s] = node(c.tier_capacities[0] / S);
        d.edges.emplace_back(sensor[s], edge[s / per_zone]);
    }
    const int n = static_cast<int>(r.demand_units.size());
    switch (cls) {
        case TopologyClass::tree:
            for (int a = 0; a < n; ++a) {
                int leaf = node(r.demand_units[a]);
                d.edges.emplace_back(leaf, sensor[a % S]);
                d.leaves.push_back(leaf);
            }
            break;
        case TopologyClass::sp: {
            std::vector<int> zone(E);
            for (int e = 0; e < E; ++e) {
                zone[e] = node(kInf);
                for (int s = e * per_zone; s < (e + 1) * per_zone; ++s) d.edges.emplace_back(zone[e], sensor[s]);
            }
            for (int a = 0; a < n; ++a) {
                int leaf = node(r.demand_units[a]);
                d.edges.emplace_back(leaf, zone[a % E]);
                d.leaves.push_back(leaf);
            }
            break;
        }
        case TopologyClass::general: {
            std::mt19937_64 rng(stream_seed(r.seed, r.round, kNetworkStream));
            std::uniform_int_distribution<int> pick(0, S - 1);
            for (int a = 0; a < n; ++a) {
                int leaf = node(r.demand_units[a]);
                int s1 = pick(rng), s2 = pick(rng);
                while (S > 1 && s2 == s1) s2 = pick(rng);
                d.edges.emplace_back(leaf, sensor[s1]);
                if (s2 != s1) d.edges.emplace_back(leaf, sensor[s2]);
                d.leaves.push_back(leaf);
            }
            break;
        }
        default: throw ConfigError("scenario networks are tree, sp or general");
    }
    d.validate();
    return d;
}

}  // namespace polycred
