#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "polycred/metrics.hpp"
#include "polycred/scenario.hpp"

namespace polycred {

enum class AdversaryKind { truthful, ghost, inflator, perturbation };
enum class CredibilityDevice { none, broadcast };

std::string to_string(AdversaryKind k);
std::string to_string(CredibilityDevice d);

struct Condition {
    std::string name;
    TopologyClass topology = TopologyClass::tree;
    MechanismKind mechanism = MechanismKind::vcg;
    double post_level = 0.0;  // posted price as a fraction of the top realizable value
    AdversaryKind adversary = AdversaryKind::truthful;
    CredibilityDevice device = CredibilityDevice::none;
};

struct AdversaryParams {
    double ghost_scale = 1.1;    // phantom bid over the top real bid
    // Capacity the phantom's own leaf absorbs. 0: the operator searches
    // attachment points and sizes (ghost_grid even fractions of what the
    // attachment can carry on its own, then refined) for the most revenue
    // under VCG and replays that phantom under every mechanism.
    double ghost_units = 0.0;
    int ghost_grid = 8;
    double inflator_markup = 0.25;
    double fine_multiple = 8.0;  // detected: pay the gain back plus this multiple
    double clock_step = 0.02;    // clinching clock
    int search_budget = 200;     // safety checker
};

nlohmann::ordered_json to_json(const AdversaryParams& a);

struct ExperimentSpec {
    std::string id;  // exp1 | exp2 | exp3 | r5
    std::vector<Condition> conditions;
    AdversaryParams adversary;
    bool certify = false;  // run the safety checker on every deviated round
};

// Canonical specs. exp3 runs on the class witnesses with bids drawn from
// the symmetric uniform prior.
ExperimentSpec experiment_spec(const std::string& id, const ScenarioConfig& config);

struct RoundRecord {
    int round = 0;
    std::uint64_t seed = 0;
    std::string condition;
    RoundMetrics honest;
    RoundMetrics deviated;
    double surplus = 0.0;      // deviated minus honest revenue
    double net_surplus = 0.0;  // after any penalty
    bool deviated_round = false;
    bool detected = false;
    int certified_agents = -1;  // -1: checker not run
    int agents = 0;
    double predicted = 0.0;     // exp3: delta * gamma
};

struct ConditionReport {
    Condition condition;
    ConcReport conc;
    bool conc_defined = true;
    double mean_surplus = 0.0;
    double mean_net_surplus = 0.0;
    double positive_surplus_rate = 0.0;
    double detection_rate = 0.0;  // over deviated rounds
    double certified_rate = -1.0;  // rounds whose every agent was certified safe
    double utility_cliffs_delta = 0.0;  // honest vs deviated agent utilities
    double max_predicted_error = 0.0;   // exp3
    int deviated_rounds = 0;
};

struct ExperimentReport {
    std::string id;
    ScenarioConfig config;
    AdversaryParams adversary;
    std::vector<ConditionReport> conditions;
    std::vector<RoundRecord> rounds;
};

nlohmann::ordered_json to_json(const ExperimentReport& r);
std::string rounds_csv(const ExperimentReport& r);
// SHA-256 of the serialized summary.
std::string report_digest(const ExperimentReport& r);

// Conditions x seeds run on up to `jobs` threads; the result does not
// depend on `jobs`.
ExperimentReport run_experiment(const ExperimentSpec& spec, const ScenarioConfig& config, int jobs = 1);

}  // namespace polycred
