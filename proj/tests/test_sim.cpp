#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "polycred/errors.hpp"
#include "polycred/sim.hpp"

using namespace polycred;

namespace {

ScenarioConfig small(int rounds = 4) {
    ScenarioConfig c;
    c.rounds = rounds;
    c.seeds = {17, 42};
    return c;
}

const ConditionReport& find(const ExperimentReport& r, const std::string& name) {
    for (const auto& c : r.conditions)
        if (c.condition.name == name) return c;
    throw std::runtime_error("no condition " + name);
}

}  // namespace

// ---- workload ---------------------------------------------------------------

TEST(Workload, RealizedValue) {
    EXPECT_DOUBLE_EQ(realized_value(7.5, 120, 150, 0.0), 7.5);
    EXPECT_DOUBLE_EQ(realized_value(7.5, 151, 150, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(realized_value(7.5, 150, 150, 0.0), 7.5);
    EXPECT_NEAR(realized_value(10, 100, 200, 0.005), 10 * std::exp(-0.5), 1e-12);
    EXPECT_DOUBLE_EQ(realized_value(10, 250, 200, 0.005), 0.0);
}

TEST(Workload, ZeroDecayKeepsBaseValues) {
    ScenarioConfig c;
    c.value_decay_per_ms = 0.0;
    c.latency_jitter_ms = 0.0;  // path latency 70 ms meets every deadline
    RoundProfile r = generate_round(c, 5, 0);
    for (const auto& tasks : r.tasks)
        for (const auto& t : tasks) {
            EXPECT_EQ(t.realized_value, t.base_value);
            EXPECT_GE(t.base_value, c.value_lo);
            EXPECT_LT(t.base_value, c.value_hi);
        }
}

TEST(Workload, DeadlineCutoff) {
    ScenarioConfig c;
    c.deadlines_ms = {60};  // below the 70 ms path latency
    RoundProfile r = generate_round(c, 5, 3);
    for (double b : r.bids) EXPECT_EQ(b, 0.0);
    for (double d : r.demand_units) EXPECT_EQ(d, 0.0);
}

TEST(Workload, BidsAndDemandFollowTasks) {
    ScenarioConfig c;
    for (int round = 0; round < 20; ++round) {
        RoundProfile r = generate_round(c, 101, round);
        ASSERT_EQ(r.bids.size(), 40u);
        for (int a = 0; a < 40; ++a) {
            double best = 0;
            int live = 0;
            for (const auto& t : r.tasks[a]) {
                best = std::max(best, t.realized_value);
                live += t.realized_value > 0;
                const double expect = t.latency_ms <= t.deadline_ms
                                          ? t.base_value * std::exp(-c.value_decay_per_ms * t.latency_ms)
                                          : 0.0;
                EXPECT_NEAR(t.realized_value, expect, 1e-12);
                EXPECT_GE(t.latency_ms, 70.0);
                EXPECT_TRUE(t.deadline_ms == 100 || t.deadline_ms == 150 || t.deadline_ms == 200);
            }
            EXPECT_EQ(r.bids[a], best);
            EXPECT_EQ(r.demand_units[a], live * c.task_units);
        }
    }
}

TEST(Workload, Deterministic) {
    ScenarioConfig c;
    RoundProfile a = generate_round(c, 2024, 7), b = generate_round(c, 2024, 7);
    EXPECT_EQ(a.bids, b.bids);
    EXPECT_EQ(a.demand_units, b.demand_units);
    RoundProfile other = generate_round(c, 2024, 8);
    EXPECT_NE(a.bids, other.bids);
}

TEST(Workload, AgentStreamsIgnoreTheAgentCount) {
    ScenarioConfig c, more;
    more.n_agents = 60;
    RoundProfile a = generate_round(c, 42, 3), b = generate_round(more, 42, 3);
    for (int k = 0; k < 40; ++k) EXPECT_EQ(a.bids[k], b.bids[k]);
}

TEST(Workload, PoissonArrivals) {
    ScenarioConfig c;
    double tasks = 0;
    int agents = 0;
    for (int round = 0; round < 200; ++round) {
        RoundProfile r = generate_round(c, 31337, round);
        for (const auto& t : r.tasks) tasks += t.size(), ++agents;
    }
    const double mean = tasks / agents;
    // 8000 Poisson(2) draws: standard error 0.016.
    EXPECT_NEAR(mean, c.arrival_rate, 0.08);
}

TEST(Workload, StreamSeedsDistinct) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t s : {1, 2})
        for (std::uint64_t r = 0; r < 20; ++r)
            for (std::uint64_t a = 0; a < 20; ++a) seen.insert(stream_seed(s, r, a));
    EXPECT_EQ(seen.size(), 800u);
    EXPECT_EQ(stream_seed(1, 2, 3), stream_seed(1, 2, 3));
    EXPECT_NE(stream_seed(1, 2, 3), stream_seed(1, 3, 2));
}

// ---- networks ---------------------------------------------------------------

TEST(Network, ClassesAndEvaluators) {
    ScenarioConfig c;
    RoundProfile r = generate_round(c, 17, 0);
    auto tree = scenario_network(c, r, TopologyClass::tree);
    EXPECT_TRUE(tree.is_in_tree());
    EXPECT_EQ(make_oracle(tree)->evaluator(), "tree_cut");
    auto sp = scenario_network(c, r, TopologyClass::sp);
    EXPECT_FALSE(sp.is_in_tree());
    EXPECT_EQ(make_oracle(sp)->evaluator(), "sp_compositional");
    auto gen = scenario_network(c, r, TopologyClass::general);
    EXPECT_EQ(make_oracle(gen)->evaluator(), "maxflow");
    for (const auto* d : {&tree, &sp, &gen}) {
        ASSERT_EQ(d->num_agents(), 40);
        for (int a = 0; a < 40; ++a) EXPECT_EQ(d->cap[d->leaves[a]], r.demand_units[a]);
    }
    EXPECT_THROW(scenario_network(c, r, TopologyClass::series), ConfigError);
}

TEST(Network, TierCapacitiesBind) {
    ScenarioConfig c;
    RoundProfile r = generate_round(c, 17, 0);
    Subset everyone(40);
    for (int a = 0; a < 40; ++a) everyone[a] = a;
    double demand = 0;
    for (double d : r.demand_units) demand += d;
    for (auto cls : {TopologyClass::tree, TopologyClass::sp, TopologyClass::general}) {
        auto dag = scenario_network(c, r, cls);
        const double f = make_oracle(dag)->rank(everyone);
        EXPECT_LE(f, 200.0 + 1e-9);
        EXPECT_LE(f, demand + 1e-9);
        EXPECT_NEAR(f, dag_maxflow(dag, everyone), 1e-9);
    }
}

TEST(Network, SensorOfEachTreeAgent) {
    ScenarioConfig c;
    c.n_agents = 8;
    RoundProfile r = generate_round(c, 3, 1);
    auto d = scenario_network(c, r, TopologyClass::tree);
    // Agents a and a + 4 share a sensor of capacity 50.
    auto f = make_oracle(d);
    for (int a = 0; a < 4; ++a) {
        const double da = r.demand_units[a], db = r.demand_units[a + 4];
        EXPECT_NEAR(f->rank({a, a + 4}), std::min(50.0, da + db), 1e-9);
    }
}

// ---- config ---------------------------------------------------------------

TEST(Config, JsonRoundTrip) {
    ScenarioConfig c;
    c.n_agents = 12;
    c.seeds = {1, 2, 3};
    c.topology = TopologyClass::sp;
    c.task_units = 2.5;
    auto j = to_json(c);
    ScenarioConfig back = scenario_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(to_json(back).dump(), j.dump());
}

TEST(Config, PartialDocumentKeepsDefaults) {
    auto c = scenario_from_json(nlohmann::json::parse(R"({"schema_version": 1, "rounds": 7})"));
    EXPECT_EQ(c.rounds, 7);
    EXPECT_EQ(c.n_agents, 40);
}

TEST(Config, Errors) {
    auto bad = [](const char* s) { return scenario_from_json(nlohmann::json::parse(s)); };
    EXPECT_THROW(bad(R"({"schema_version": 1, "colour": 3})"), ConfigError);
    EXPECT_THROW(bad(R"({"schema_version": 2})"), ConfigError);
    EXPECT_THROW(bad(R"({"rounds": "many"})"), ConfigError);
    EXPECT_THROW(bad(R"({"seeds": []})"), ConfigError);
    EXPECT_THROW(bad(R"({"n_agents": 1})"), ConfigError);
    EXPECT_THROW(bad(R"({"value_lo": 0})"), ConfigError);
    EXPECT_THROW(bad(R"({"tier_capacities": [1, 2]})"), ConfigError);
    EXPECT_THROW(bad(R"({"topology": "ring"})"), ConfigError);
    EXPECT_THROW(bad(R"([1, 2])"), ConfigError);
}

// ---- experiments ------------------------------------------------------------

TEST(Spec, Shapes) {
    ScenarioConfig c;
    auto r5 = experiment_spec("r5", c);
    EXPECT_EQ(r5.conditions.size(), 39u);
    std::set<std::string> names;
    for (const auto& x : r5.conditions) names.insert(x.name);
    EXPECT_EQ(names.size(), 39u);
    EXPECT_TRUE(names.count("tree/vcg/ghost"));
    EXPECT_TRUE(names.count("general/posted_price@0.5/inflator"));
    auto e2 = experiment_spec("exp2", c);
    ASSERT_EQ(e2.conditions.size(), 1u);
    EXPECT_EQ(e2.conditions[0].device, CredibilityDevice::broadcast);
    for (const auto& x : experiment_spec("exp3", c).conditions) EXPECT_EQ(x.mechanism, MechanismKind::myerson);
    EXPECT_TRUE(experiment_spec("exp1", c).certify);
    EXPECT_THROW(experiment_spec("exp9", c), ConfigError);
}

TEST(Experiment, Exp1GhostProfitsAndIsCertified) {
    ScenarioConfig c = small();
    auto rep = run_experiment(experiment_spec("exp1", c), c);
    ASSERT_EQ(rep.conditions.size(), 1u);
    const auto& cr = rep.conditions[0];
    EXPECT_EQ(rep.rounds.size(), 8u);
    EXPECT_GT(cr.positive_surplus_rate, 0.5);
    EXPECT_GT(cr.conc.conc_op, 0.0);
    EXPECT_GT(cr.conc.conc_w, 0.0);
    for (const auto& r : rep.rounds)
        if (r.deviated_round) {
            EXPECT_EQ(r.certified_agents, r.agents);
            // The phantom never raises welfare.
            EXPECT_LE(r.deviated.welfare, r.honest.welfare + 1e-9);
        }
    EXPECT_NEAR(cr.conc.conc_ag, cr.conc.conc_op + cr.conc.conc_w * cr.conc.base_welfare / cr.conc.base_payments,
                1e-9);
}

TEST(Experiment, Exp2BroadcastDetectsAndPenalizes) {
    ScenarioConfig c = small();
    auto spec = experiment_spec("exp2", c);
    auto rep = run_experiment(spec, c);
    const auto& cr = rep.conditions[0];
    ASSERT_GT(cr.deviated_rounds, 0);
    EXPECT_EQ(cr.detection_rate, 1.0);
    EXPECT_LT(cr.mean_net_surplus, 0.0);
    for (const auto& r : rep.rounds) {
        if (!r.detected) continue;
        EXPECT_NEAR(r.net_surplus, r.surplus - (1 + spec.adversary.fine_multiple) * std::max(0.0, r.surplus), 1e-9);
    }
}

TEST(Experiment, Exp3PerturbationMatchesPrediction) {
    ScenarioConfig c = small(10);
    auto rep = run_experiment(experiment_spec("exp3", c), c);
    ASSERT_EQ(rep.conditions.size(), 3u);
    for (const auto& cr : rep.conditions) {
        EXPECT_LE(cr.max_predicted_error, 1e-9) << cr.condition.name;
        EXPECT_GT(cr.deviated_rounds, 0);
    }
    for (const auto& r : rep.rounds)
        if (r.deviated_round) {
            EXPECT_GT(r.surplus, 0.0);
            EXPECT_NEAR(r.surplus, r.predicted, 1e-9);
            // Pure transfer.
            EXPECT_NEAR(r.deviated.welfare, r.honest.welfare, 1e-9);
        }
}

TEST(Experiment, R5Invariants) {
    ScenarioConfig c = small(2);
    c.seeds = {17};
    auto rep = run_experiment(experiment_spec("r5", c), c);
    ASSERT_EQ(rep.conditions.size(), 39u);
    for (const auto& cr : rep.conditions) {
        if (cr.condition.adversary == AdversaryKind::truthful) {
            EXPECT_EQ(cr.conc.concabs_op, 0.0) << cr.condition.name;
            continue;
        }
        EXPECT_GE(cr.conc.conc_ag, cr.conc.conc_op - 1e-12) << cr.condition.name;
    }
    // Phantoms are chosen once per network and replayed under every
    // mechanism; VCG and first price share the allocator, so deviated
    // welfare matches round by round.
    for (const char* t : {"tree", "sp", "general"}) {
        std::vector<double> v, fp;
        for (const auto& r : rep.rounds) {
            if (r.condition == std::string(t) + "/vcg/ghost") v.push_back(r.deviated.welfare);
            if (r.condition == std::string(t) + "/first_price/ghost") fp.push_back(r.deviated.welfare);
        }
        ASSERT_EQ(v.size(), 2u);
        ASSERT_EQ(v.size(), fp.size());
        for (std::size_t k = 0; k < v.size(); ++k) EXPECT_NEAR(v[k], fp[k], 1e-9) << t;
    }
    EXPECT_EQ(find(rep, "tree/vcg/truthful").deviated_rounds, 0);
}

TEST(Experiment, DeterministicAcrossJobs) {
    ScenarioConfig c = small(3);
    auto spec = experiment_spec("exp1", c);
    auto a = run_experiment(spec, c, 1), b = run_experiment(spec, c, 2), again = run_experiment(spec, c, 1);
    EXPECT_EQ(report_digest(a), report_digest(b));
    EXPECT_EQ(report_digest(a), report_digest(again));
    EXPECT_EQ(rounds_csv(a), rounds_csv(b));
    c.seeds = {17, 43};
    EXPECT_NE(report_digest(a), report_digest(run_experiment(experiment_spec("exp1", c), c)));
}

TEST(Experiment, Outputs) {
    ScenarioConfig c = small(2);
    auto rep = run_experiment(experiment_spec("exp2", c), c);
    auto csv = rounds_csv(rep);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "round,seed,condition,rev_honest,rev_dev,welfare_honest,welfare_dev,detected");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
    auto j = to_json(rep);
    EXPECT_EQ(j["experiment"], "exp2");
    EXPECT_EQ(j["conditions"][0]["mechanism"], "clinching");
    EXPECT_EQ(report_digest(rep).size(), 64u);
}

TEST(Experiment, InvalidConfigRejected) {
    ScenarioConfig c;
    c.seeds.clear();
    EXPECT_THROW(run_experiment(experiment_spec("exp1", ScenarioConfig{}), c), ConfigError);
}
