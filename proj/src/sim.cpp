#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "polycred/credibility.hpp"
#include "polycred/digest.hpp"
#include "polycred/errors.hpp"
#include "polycred/format.hpp"
#include "polycred/parallel.hpp"
#include "polycred/sim.hpp"

namespace polycred {

std::string to_string(AdversaryKind k) {
    switch (k) {
        case AdversaryKind::truthful: return "truthful";
        case AdversaryKind::ghost: return "ghost";
        case AdversaryKind::inflator: return "inflator";
        case AdversaryKind::perturbation: return "perturbation";
    }
    return "truthful";
}

std::string to_string(CredibilityDevice d) { return d == CredibilityDevice::broadcast ? "broadcast" : "none"; }

nlohmann::ordered_json to_json(const AdversaryParams& a) {
    nlohmann::ordered_json j;
    j["ghost_scale"] = a.ghost_scale;
    j["ghost_units"] = a.ghost_units;
    j["ghost_grid"] = a.ghost_grid;
    j["inflator_markup"] = a.inflator_markup;
    j["fine_multiple"] = a.fine_multiple;
    j["clock_step"] = a.clock_step;
    j["search_budget"] = a.search_budget;
    return j;
}

namespace {

Condition make_condition(TopologyClass t, MechanismKind m, AdversaryKind a, double level = 0.0,
                         CredibilityDevice d = CredibilityDevice::none) {
    Condition c;
    c.topology = t;
    c.mechanism = m;
    c.adversary = a;
    c.post_level = level;
    c.device = d;
    std::ostringstream name;
    name << to_string(t) << '/' << (d == CredibilityDevice::broadcast ? "clinching" : to_string(m));
    if (m == MechanismKind::posted_price) name << '@' << format_float(level, 3);
    name << '/' << to_string(a);
    c.name = name.str();
    return c;
}

// Highest realized value any task can reach.
double top_value(const ScenarioConfig& c) {
    const double latency = c.tier_latencies_ms[0] + c.tier_latencies_ms[1] + c.tier_latencies_ms[2];
    return c.value_hi * std::exp(-c.value_decay_per_ms * latency);
}

}  // namespace

ExperimentSpec experiment_spec(const std::string& id, const ScenarioConfig& config) {
    ExperimentSpec s;
    s.id = id;
    const auto topo = config.topology;
    if (id == "exp1") {
        s.conditions.push_back(make_condition(topo, MechanismKind::vcg, AdversaryKind::ghost));
        s.certify = true;
    } else if (id == "exp2") {
        s.conditions.push_back(make_condition(topo, MechanismKind::vcg, AdversaryKind::ghost, 0.0,
                                              CredibilityDevice::broadcast));
    } else if (id == "exp3") {
        for (auto t : {TopologyClass::tree, TopologyClass::sp, TopologyClass::general})
            s.conditions.push_back(make_condition(t, MechanismKind::myerson, AdversaryKind::perturbation));
    } else if (id == "r5") {
        for (auto t : {TopologyClass::tree, TopologyClass::sp, TopologyClass::general}) {
            for (auto m : {MechanismKind::vcg, MechanismKind::first_price})
                for (auto a : {AdversaryKind::truthful, AdversaryKind::ghost})
                    s.conditions.push_back(make_condition(t, m, a));
            for (double level : {0.2, 0.5, 0.8})
                for (auto a : {AdversaryKind::truthful, AdversaryKind::ghost, AdversaryKind::inflator})
                    s.conditions.push_back(make_condition(t, MechanismKind::posted_price, a, level));
        }
    } else {
        throw ConfigError("unknown experiment: " + id + " (exp1, exp2, exp3, r5)");
    }
    return s;
}

namespace {

struct Instance {
    OraclePtr f;
    BidProfile bids;
};

// exp3 draws fresh bids from the uniform prior on the class witness.
Instance prior_witness(TopologyClass t, const ScenarioConfig& c, std::uint64_t seed, int round) {
    TopologyParams p;
    p.seed = stream_seed(seed, round, 0xB0B);
    switch (t) {
        case TopologyClass::tree: p.beta = 2, p.h = 3; break;
        case TopologyClass::sp: p.n = 8, p.h = 2; break;
        default: p.n = 6; break;
    }
    Instance in;
    in.f = make_oracle(generate_topology(t, p));
    std::mt19937_64 rng(stream_seed(seed, round, 0xB1D));
    std::uniform_real_distribution<double> u(c.value_lo, c.value_hi);
    in.bids.resize(in.f->size());
    for (auto& b : in.bids) b = u(rng);
    return in;
}

struct Phantom {
    int target = -1;
    double units = 0.0;
};

// One candidate per distinct attachment (leaf out-edges), represented by its
// highest bidder; sizes up to the largest capacity the leaf feeds.
std::optional<Phantom> choose_phantom(const BidProfile& bids, const OraclePtr& f, const AdversaryParams& adv) {
    const double top = *std::max_element(bids.begin(), bids.end());
    if (!(top > 0)) return std::nullopt;
    if (adv.ghost_units > 0) {
        int leader = static_cast<int>(std::max_element(bids.begin(), bids.end()) - bids.begin());
        return Phantom{leader, adv.ghost_units};
    }
    const CapacityDag* d = f->dag();
    if (!d) throw ConfigError("phantom search needs a network instance");
    std::map<std::vector<int>, int> reps;
    for (int a = 0; a < f->size(); ++a) {
        if (!(bids[a] > 0)) continue;
        std::vector<int> out;
        for (auto [u, v] : d->edges)
            if (u == d->leaves[a]) out.push_back(v);
        std::sort(out.begin(), out.end());
        auto [it, fresh] = reps.try_emplace(out, a);
        if (!fresh && bids[a] > bids[it->second]) it->second = a;
    }
    Mechanism vcg;
    std::optional<Phantom> best;
    double best_gain = kTol;
    auto probe = [&](int a, double g) {
        auto r = apply_deviation(DeviationStrategy::ghost_at(adv.ghost_scale * top, a, g), bids, vcg, f);
        if (r.operator_surplus > best_gain) best_gain = r.operator_surplus, best = Phantom{a, g};
    };
    // Coarse grid over what the attachment can carry on its own, then halve
    // the step twice around the best point.
    double step = 0.0;
    for (const auto& [out, a] : reps) {
        const int phantom = f->size();
        const double reach = with_entrant(*f, a, std::numeric_limits<double>::infinity())->rank({phantom});
        const double h = reach / adv.ghost_grid;
        const auto before = best;
        for (int k = 1; k <= adv.ghost_grid; ++k) probe(a, h * k);
        if (best && (!before || best->units != before->units || best->target != before->target)) step = h;
    }
    for (int pass = 0; best && pass < 2; ++pass) {
        step /= 2;
        const Phantom centre = *best;
        for (double g : {centre.units - step, centre.units + step})
            if (g > 0) probe(centre.target, g);
    }
    return best;
}

struct TaskResult {
    std::vector<RoundRecord> rounds;
    std::vector<double> honest_utility, deviated_utility;
    double max_predicted_error = 0.0;
};

void add_utilities(std::vector<double>& out, const MarketOutcome& o, const BidProfile& values) {
    for (std::size_t k = 0; k < values.size(); ++k) out.push_back(values[k] * o.alloc[k] - o.pay[k]);
}

// Phantom choices per round for one (topology, seed); every ghost condition
// on that network replays the same phantom.
using PhantomPlan = std::vector<std::optional<Phantom>>;

PhantomPlan plan_phantoms(TopologyClass t, const ScenarioConfig& config, std::uint64_t seed,
                          const AdversaryParams& adv) {
    PhantomPlan plan(config.rounds);
    for (int round = 0; round < config.rounds; ++round) {
        RoundProfile r = generate_round(config, seed, round);
        plan[round] = choose_phantom(r.bids, make_oracle(scenario_network(config, r, t)), adv);
    }
    return plan;
}

TaskResult run_task(const ExperimentSpec& spec, const Condition& cond, const ScenarioConfig& config,
                    std::uint64_t seed, const PhantomPlan* plan) {
    const AdversaryParams& adv = spec.adversary;
    TaskResult res;
    for (int round = 0; round < config.rounds; ++round) {
        Instance in;
        if (cond.adversary == AdversaryKind::perturbation) {
            in = prior_witness(cond.topology, config, seed, round);
        } else {
            RoundProfile r = generate_round(config, seed, round);
            in.f = make_oracle(scenario_network(config, r, cond.topology));
            in.bids = r.bids;
        }
        const BidProfile& bids = in.bids;
        const int n = static_cast<int>(bids.size());
        const double top = *std::max_element(bids.begin(), bids.end());
        RoundRecord rec;
        rec.round = round;
        rec.seed = seed;
        rec.condition = cond.name;
        rec.agents = n;
        MarketOutcome honest, deviated;

        if (cond.device == CredibilityDevice::broadcast) {
            honest = clinching_with_broadcast(bids, *in.f, adv.clock_step).outcome;
            deviated = honest;
            if (const auto& ph = (*plan)[round]) {
                auto run = ghost_clinching(bids, in.f, adv.ghost_scale * top, ph->target, adv.clock_step, ph->units);
                deviated = run.outcome;
                rec.deviated_round = true;
                rec.detected = !verify_transcript(run.transcript, commitment_root(*in.f)).consistent();
            }
        } else {
            Mechanism m;
            m.kind = cond.mechanism;
            if (m.kind == MechanismKind::myerson) m.priors.assign(n, Prior{config.value_lo, config.value_hi});
            if (m.kind == MechanismKind::posted_price) {
                m.post_price = cond.post_level * top_value(config);
                m.seed = stream_seed(seed, round, 0x9057);
            }
            std::optional<DeviationStrategy> strat;
            double predicted = 0.0;
            switch (cond.adversary) {
                case AdversaryKind::truthful: break;
                case AdversaryKind::ghost:
                    if (const auto& ph = (*plan)[round])
                        strat = DeviationStrategy::ghost_at(adv.ghost_scale * top, ph->target, ph->units);
                    break;
                case AdversaryKind::inflator: strat = DeviationStrategy::inflate(adv.inflator_markup); break;
                case AdversaryKind::perturbation:
                    try {
                        Perturbation p = construct_perturbation(bids, *in.f, m.rule());
                        strat = p.strategy();
                        predicted = p.increment;
                    } catch (const NoWindowError&) {
                    } catch (const NoDeviationError&) {
                    }
                    break;
            }
            if (strat) {
                DeviationResult d = apply_deviation(*strat, bids, m, in.f);
                if (spec.certify) {
                    certify(d, bids, m, in.f, config.bid_support(), adv.search_budget);
                    rec.certified_agents = 0;
                    for (const auto& v : d.safety) rec.certified_agents += v.safe ? 1 : 0;
                }
                honest = d.honest;
                deviated = d.deviated;
                rec.deviated_round = true;
                rec.predicted = predicted;
                if (cond.adversary == AdversaryKind::perturbation)
                    res.max_predicted_error =
                        std::max(res.max_predicted_error, std::abs(d.operator_surplus - predicted));
            } else {
                honest = run_mechanism(m, bids, *in.f);
                deviated = honest;
            }
        }

        rec.honest = round_metrics(honest);
        rec.deviated = round_metrics(deviated);
        rec.surplus = rec.deviated.revenue - rec.honest.revenue;
        rec.net_surplus = rec.surplus;
        if (rec.detected) rec.net_surplus -= (1.0 + adv.fine_multiple) * std::max(0.0, rec.surplus);
        add_utilities(res.honest_utility, honest, bids);
        add_utilities(res.deviated_utility, deviated, bids);
        res.rounds.push_back(std::move(rec));
    }
    return res;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentSpec& spec, const ScenarioConfig& config, int jobs) {
    config.validate();
    if (spec.conditions.empty()) throw ConfigError("experiment has no conditions");
    ExperimentReport rep;
    rep.id = spec.id;
    rep.config = config;
    rep.adversary = spec.adversary;
    const std::size_t S = config.seeds.size();
    std::vector<TopologyClass> ghost_topologies;
    for (const auto& c : spec.conditions)
        if (c.adversary == AdversaryKind::ghost &&
            std::find(ghost_topologies.begin(), ghost_topologies.end(), c.topology) == ghost_topologies.end())
            ghost_topologies.push_back(c.topology);
    std::vector<PhantomPlan> plans(ghost_topologies.size() * S);
    parallel_for(plans.size(), jobs, [&](std::size_t k) {
        plans[k] = plan_phantoms(ghost_topologies[k / S], config, config.seeds[k % S], spec.adversary);
    });
    std::vector<TaskResult> tasks(spec.conditions.size() * S);
    parallel_for(tasks.size(), jobs, [&](std::size_t k) {
        const Condition& c = spec.conditions[k / S];
        const PhantomPlan* plan = nullptr;
        auto it = std::find(ghost_topologies.begin(), ghost_topologies.end(), c.topology);
        if (c.adversary == AdversaryKind::ghost) plan = &plans[(it - ghost_topologies.begin()) * S + k % S];
        tasks[k] = run_task(spec, c, config, config.seeds[k % S], plan);
    });

    for (std::size_t c = 0; c < spec.conditions.size(); ++c) {
        ConditionReport cr;
        cr.condition = spec.conditions[c];
        std::vector<RoundMetrics> h, d;
        std::vector<double> hu, du;
        int positive = 0, detected = 0, certified = 0, checked = 0;
        double surplus = 0, net = 0;
        for (std::size_t s = 0; s < S; ++s) {
            const TaskResult& t = tasks[c * S + s];
            hu.insert(hu.end(), t.honest_utility.begin(), t.honest_utility.end());
            du.insert(du.end(), t.deviated_utility.begin(), t.deviated_utility.end());
            cr.max_predicted_error = std::max(cr.max_predicted_error, t.max_predicted_error);
            for (const auto& r : t.rounds) {
                h.push_back(r.honest);
                d.push_back(r.deviated);
                surplus += r.surplus;
                net += r.net_surplus;
                if (r.surplus > 0) ++positive;
                if (r.deviated_round) {
                    ++cr.deviated_rounds;
                    if (r.detected) ++detected;
                }
                if (r.certified_agents >= 0) {
                    ++checked;
                    if (r.certified_agents == r.agents) ++certified;
                }
                rep.rounds.push_back(r);
            }
        }
        const double rounds = static_cast<double>(h.size());
        try {
            cr.conc = conc(h, d);
        } catch (const UndefinedRatioError& e) {
            cr.conc_defined = false;
            cr.conc.concabs_op = e.absolute;
            cr.conc.rounds = static_cast<int>(h.size());
        }
        cr.mean_surplus = surplus / rounds;
        cr.mean_net_surplus = net / rounds;
        cr.positive_surplus_rate = positive / rounds;
        cr.detection_rate = cr.deviated_rounds > 0 ? static_cast<double>(detected) / cr.deviated_rounds : 0.0;
        if (checked > 0) cr.certified_rate = static_cast<double>(certified) / checked;
        cr.utility_cliffs_delta = cliffs_delta(du, hu);
        rep.conditions.push_back(cr);
    }
    return rep;
}

nlohmann::ordered_json to_json(const ExperimentReport& r) {
    nlohmann::ordered_json j;
    j["experiment"] = r.id;
    j["config"] = to_json(r.config);
    j["adversary"] = to_json(r.adversary);
    auto conds = nlohmann::ordered_json::array();
    for (const auto& c : r.conditions) {
        nlohmann::ordered_json x;
        x["condition"] = c.condition.name;
        x["topology"] = to_string(c.condition.topology);
        x["mechanism"] = c.condition.device == CredibilityDevice::broadcast ? "clinching"
                                                                             : to_string(c.condition.mechanism);
        if (c.condition.mechanism == MechanismKind::posted_price) x["post_level"] = c.condition.post_level;
        x["adversary"] = to_string(c.condition.adversary);
        x["device"] = to_string(c.condition.device);
        x["conc"] = to_json(c.conc);
        x["conc_defined"] = c.conc_defined;
        x["mean_surplus"] = c.mean_surplus;
        x["mean_net_surplus"] = c.mean_net_surplus;
        x["positive_surplus_rate"] = c.positive_surplus_rate;
        x["deviated_rounds"] = c.deviated_rounds;
        x["detection_rate"] = c.detection_rate;
        if (c.certified_rate >= 0) x["certified_rate"] = c.certified_rate;
        if (c.condition.adversary == AdversaryKind::perturbation) x["max_predicted_error"] = c.max_predicted_error;
        x["utility_cliffs_delta"] = c.utility_cliffs_delta;
        conds.push_back(x);
    }
    j["conditions"] = conds;
    return rounded(j);
}

std::string rounds_csv(const ExperimentReport& r) {
    std::ostringstream out;
    out << "round,seed,condition,rev_honest,rev_dev,welfare_honest,welfare_dev,detected\n";
    for (const auto& x : r.rounds)
        out << x.round << ',' << x.seed << ',' << x.condition << ',' << format_float(x.honest.revenue) << ','
            << format_float(x.deviated.revenue) << ',' << format_float(x.honest.welfare) << ','
            << format_float(x.deviated.welfare) << ',' << (x.detected ? 1 : 0) << '\n';
    return out.str();
}

std::string report_digest(const ExperimentReport& r) { return sha256_hex(to_json(r).dump()); }

}  // namespace polycred
