#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "polycred/adversary.hpp"
#include "polycred/credibility.hpp"
#include "polycred/mechanisms.hpp"
#include "polycred/metrics.hpp"
#include "polycred/sim.hpp"

using namespace polycred;

namespace {

using Clock = std::chrono::steady_clock;

// Tolerances and budgets.
constexpr double kExact = 1e-9;
constexpr double kQuadratureRel = 1e-6;
constexpr double kClock = 0.01;
constexpr double kConcWLo = 0.05, kConcWHi = 0.20;
constexpr double kPositiveRate = 0.95;
constexpr double kCrossDerivative = 1e-12;
constexpr double kRuntimeRatio = 2.0;
constexpr int kGammaSamples = 500;

struct Outcome {
    bool pass = true;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void criterion(int id, const std::string& name, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    const bool in_time = secs < budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("[%s] %2d %-28s %9.3fs (budget %gs)%s  %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), secs,
                budget_s, in_time ? "" : " OVER BUDGET", o.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::vector<double> random_bids(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(1, 11);
    std::vector<double> b(n);
    for (auto& x : b) x = u(rng);
    return b;
}

const ConditionReport* find(const ExperimentReport& r, const std::string& name) {
    for (const auto& c : r.conditions)
        if (c.condition.name == name) return &c;
    return nullptr;
}

Outcome worked_example() {
    const auto t0 = Clock::now();
    auto f = explicit_oracle(2, {0, 2, 2, 3});
    const BidProfile b{10, 5};
    Perturbation p = construct_perturbation(b, *f, PriorityRule::bid(), kInf, 1.0);
    DeviationResult d = apply_deviation(p.strategy(), b, Mechanism{}, f);
    const double secs = seconds_since(t0);
    const double p1 = d.honest.pay[0], q1 = d.deviated.pay[0];
    const bool ok = std::abs(p1 - 5) <= kExact && std::abs(q1 - 6) <= kExact && std::abs(p.increment - 1) <= kExact &&
                    secs < 1e-3;
    std::ostringstream s;
    s << "p1=" << p1 << " p1'=" << q1 << " increment=" << p.increment << " (" << secs * 1e3 << " ms)";
    return {ok, s.str()};
}

Outcome payment_oracles() {
    std::mt19937_64 rng(2024);
    double worst_at = 0, worst_vcg = 0;
    for (int t = 0; t < 200; ++t) {
        auto f = make_oracle(fx::random_instance(rng, t));
        auto b = random_bids(rng, f->size());
        auto vcg = vcg_outcome(b, *f);
        auto welfare = [&](const std::vector<char>& eligible) {
            auto x = fx::plain_greedy(*f, b, eligible);
            double w = 0;
            for (int k = 0; k < f->size(); ++k) w += b[k] * x[k];
            return w;
        };
        const double full = welfare({});
        for (int i = 0; i < f->size(); ++i) {
            const double xb = fx::alloc_at(*f, b, i, b[i]);
            const double area = fx::quadrature([&](double z) { return fx::alloc_at(*f, b, i, z); }, 0, b[i], 10000);
            worst_at = std::max(worst_at,
                                std::abs(archer_tardos_payment(i, b, *f, PriorityRule::bid()) - (b[i] * xb - area)) / b[i]);
            // Externality: others' best welfare without i minus their welfare with i.
            std::vector<char> without(f->size(), 1);
            without[i] = 0;
            const double others_with = full - b[i] * fx::plain_greedy(*f, b)[i];
            worst_vcg = std::max(worst_vcg, std::abs(vcg.pay[i] - (welfare(without) - others_with)));
        }
    }
    return {worst_at <= kQuadratureRel && worst_vcg <= kExact,
            fmt("max AT err/b_i=%.2e", worst_at) + fmt(" max VCG err=%.2e", worst_vcg)};
}

Outcome greedy_optimality() {
    std::mt19937_64 rng(77);
    double worst = 0;
    for (int t = 0; t < 100; ++t) {
        CapacityDag d = fx::random_instance(rng, t, 4);
        if (d.num_agents() > 5) d.leaves.resize(5);
        auto f = make_oracle(d);
        auto b = random_bids(rng, f->size());
        auto x = edmonds_greedy(b, *f, PriorityRule::bid());
        double w = 0;
        for (int i = 0; i < f->size(); ++i) w += b[i] * x[i];
        worst = std::max(worst, std::abs(w - fx::grid_max(*f, b, 0.25)));
    }
    return {worst <= kExact, fmt("max |greedy - grid| = %.2e", worst)};
}

Outcome clinching_vcg() {
    std::mt19937_64 rng(5150);
    double worst_excess = -kInf;
    int agents = 0;
    for (int t = 0; t < 50; ++t) {
        const int k = 1 + static_cast<int>(rng() % 3), n = 2 + static_cast<int>(rng() % 6);
        std::vector<int> cap(k);
        for (auto& c : cap) c = 1 + static_cast<int>(rng() % 2);
        std::vector<std::vector<int>> elig(n);
        for (auto& e : elig) {
            for (int j = 0; j < k; ++j)
                if (rng() % 2) e.push_back(j);
            if (e.empty()) e.push_back(static_cast<int>(rng() % k));
        }
        auto f = Level1Matroid(cap, elig).oracle();
        auto v = random_bids(rng, n);
        auto c = clinching_auction(v, *f, kClock);
        auto g = vcg_outcome(v, *f);
        for (int i = 0; i < n; ++i, ++agents)
            worst_excess = std::max(worst_excess,
                                    std::abs(c.outcome.pay[i] - g.pay[i]) - c.outcome.alloc[i] * kClock - 1e-12);
    }
    return {worst_excess <= 0, std::to_string(agents) + fmt(" agents, worst slack %.2e", -worst_excess)};
}

Outcome ghost_vcg() {
    ScenarioConfig c;
    auto r = run_experiment(experiment_spec("exp1", c), c);
    const auto& cr = r.conditions.front();
    int certified = 0, deviated = 0;
    for (const auto& rec : r.rounds)
        if (rec.deviated_round) ++deviated, certified += rec.certified_agents == rec.agents;
    const bool ok = cr.positive_surplus_rate >= kPositiveRate && deviated > 0 && certified == deviated &&
                    cr.conc.conc_w >= kConcWLo && cr.conc.conc_w <= kConcWHi;
    std::ostringstream s;
    s << cr.condition.name << " positive=" << cr.positive_surplus_rate << " certified=" << certified << "/"
      << deviated << " conc_w=" << cr.conc.conc_w << " conc_op=" << cr.conc.conc_op;
    return {ok, s.str()};
}

Outcome broadcast_closure() {
    ScenarioConfig c;
    auto r = run_experiment(experiment_spec("exp2", c), c);
    bool ok = true;
    std::ostringstream s;
    for (const auto& cr : r.conditions) {
        ok = ok && cr.deviated_rounds > 0 && cr.detection_rate == 1.0 && cr.mean_net_surplus < 0;
        s << cr.condition.name << " detection=" << cr.detection_rate << " net=" << cr.mean_net_surplus << " ";
    }
    return {ok, s.str()};
}

Outcome myerson_persistence() {
    ScenarioConfig c;
    auto r = run_experiment(experiment_spec("exp3", c), c);
    int bad = 0, deviated = 0;
    double worst = 0;
    for (const auto& rec : r.rounds) {
        if (!rec.deviated_round) continue;
        ++deviated;
        const double err = std::abs(rec.surplus - rec.predicted);
        worst = std::max(worst, err);
        if (!(rec.surplus > 0) || err > kExact) ++bad;
    }
    return {deviated > 0 && bad == 0,
            std::to_string(deviated) + " rounds, " + std::to_string(bad) + fmt(" bad, max |surplus-dg|=%.2e", worst)};
}

Outcome scaling() {
    ScenarioConfig c;
    struct Band {
        TopologyClass cls;
        std::vector<int> grid;
        double lo, hi;
    };
    const std::vector<Band> bands{{TopologyClass::series, {2, 4, 8, 16}, 0.8, 1.2},
                                  {TopologyClass::parallel, {1, 2, 4, 8}, 0.8, 1.2},
                                  {TopologyClass::tree, {1, 2, 3, 4}, 0.8, 1.2},
                                  {TopologyClass::general, {4, 6, 8, 12}, 1.7, 2.3}};
    bool ok = true;
    std::ostringstream s;
    for (const auto& b : bands) {
        ScalingFit fit = scaling_sweep(b.cls, b.grid, c.seeds);
        const bool in = fit.slope >= b.lo && fit.slope <= b.hi;
        ok = ok && in;
        s << to_string(b.cls) << "=" << fmt("%.3f", fit.slope) << (in ? " " : "(out) ");
    }
    return {ok, s.str()};
}

Outcome knife_edge() {
    auto f = explicit_oracle(2, {0, 2, 2, 3});
    auto d = apply_deviation(DeviationStrategy::perturb(0, 1, 1.0), {10, 5}, Mechanism{}, f);
    const double eps = d.deviated.revenue - d.honest.revenue;
    bool ok = eps > 0;
    std::ostringstream s;
    s << "eps=" << eps;
    for (auto [l, surplus] : knife_edge_sweep({0, 0.01, 0.1, 1}, d, *f)) {
        ok = ok && surplus == l * eps;
        s << " s(" << l << ")=" << surplus;
    }
    return {ok, s.str()};
}

Outcome r5() {
    ScenarioConfig c;
    auto r = run_experiment(experiment_spec("r5", c), c);
    std::ostringstream s;
    // VCG vs first-price conc_op under the same phantom, matched seeds.
    double worst_gap = 0;
    for (const char* topo : {"tree", "sp", "general"}) {
        auto* v = find(r, std::string(topo) + "/vcg/ghost");
        auto* p = find(r, std::string(topo) + "/first_price/ghost");
        if (!v || !p) return {false, std::string("missing ghost condition for ") + topo};
        worst_gap = std::max(worst_gap, std::abs(v->conc.conc_op - p->conc.conc_op));
        s << topo << " vcg/fp conc_op " << fmt("%.4g", v->conc.conc_op) << "/" << fmt("%.4g", p->conc.conc_op)
          << "; ";
    }
    const bool invariance = worst_gap <= kExact;
    bool dominance = true;
    for (const auto& cr : r.conditions)
        if (cr.condition.adversary != AdversaryKind::truthful && cr.conc_defined)
            dominance = dominance && cr.conc.conc_ag >= cr.conc.conc_op;

    std::vector<GammaSummary> g;
    for (auto cls : {TopologyClass::tree, TopologyClass::sp, TopologyClass::general})
        g.push_back(gamma_distribution(cls, c, kGammaSamples, c.seeds.front()));
    const double d1 = cliffs_delta(g[1].samples, g[0].samples), d2 = cliffs_delta(g[2].samples, g[1].samples);
    const bool ordering = g[0].mean < g[1].mean && g[1].mean < g[2].mean && d1 > 0 && d2 > 0;
    s << "conc_ag>=conc_op " << (dominance ? "yes" : "no") << "; gamma means " << fmt("%.3g", g[0].mean) << " < "
      << fmt("%.3g", g[1].mean) << " < " << fmt("%.3g", g[2].mean) << " delta " << fmt("%.3f", d1) << ", "
      << fmt("%.3f", d2);
    if (!invariance) s << "; VCG/FP invariance broken by " << fmt("%.3g", worst_gap);
    return {invariance && dominance && ordering, s.str()};
}

Outcome orthogonality() {
    const std::vector<double> lambdas{0.0, 0.01, 0.1, 0.5, 1.0};
    const std::vector<double> ts{0.5, 1, 2, 3, 5};
    const std::vector<int> ks{2, 3, 4, 6, 10};
    const double eps = 2.0, mass = 1.5;
    double worst_identity = 0, worst_cross = 0;
    for (double l : lambdas)
        for (double t : ts)
            for (int k : ks)
                worst_identity = std::max(worst_identity, std::abs(orthogonality_decompose(l, eps, t, k, mass).total -
                                                                   (l * eps + t / k * mass)));
    for (std::size_t a = 0; a + 1 < lambdas.size(); ++a)
        for (std::size_t b = 0; b + 1 < ks.size(); ++b) {
            auto tot = [&](std::size_t x, std::size_t y) {
                return orthogonality_decompose(lambdas[x], eps, 1.0, ks[y], mass).total;
            };
            const double cross = (tot(a + 1, b + 1) - tot(a + 1, b) - tot(a, b + 1) + tot(a, b)) /
                                 ((lambdas[a + 1] - lambdas[a]) * (ks[b + 1] - ks[b]));
            worst_cross = std::max(worst_cross, std::abs(cross));
        }
    return {worst_identity <= kCrossDerivative && worst_cross <= kCrossDerivative,
            fmt("identity err %.2e", worst_identity) + fmt(", cross-derivative %.2e", worst_cross)};
}

Outcome perturbation_runtime() {
    std::vector<double> n, secs;
    std::mt19937_64 rng(31);
    for (int h : {2, 3, 4}) {
        TopologyParams p;
        p.beta = 10, p.h = h;
        const CapacityDag dag = generate_topology(TopologyClass::tree, p);
        const int reps = h == 4 ? 9 : 31;
        std::vector<double> times;
        for (int r = 0; r < reps; ++r) {
            auto f = make_oracle(dag);  // fresh: no cached ranks
            auto b = random_bids(rng, f->size());
            const auto t0 = Clock::now();
            Perturbation pert = construct_perturbation(b, *f);
            times.push_back(seconds_since(t0));
            if (pert.i < 0) return {false, "no perturbation constructed"};
        }
        std::nth_element(times.begin(), times.begin() + reps / 2, times.end());
        n.push_back(dag.num_agents());
        secs.push_back(times[reps / 2]);
    }
    std::ostringstream s;
    double worst = 0;
    const double unit = secs[0] / (n[0] * std::log(n[0]));
    for (std::size_t k = 0; k < n.size(); ++k) {
        const double ratio = secs[k] / (unit * n[k] * std::log(n[k]));
        worst = std::max(worst, ratio);
        s << "n=" << n[k] << " " << fmt("%.3g ms", secs[k] * 1e3) << fmt(" (x%.2f ref) ", ratio);
    }
    return {worst <= kRuntimeRatio, s.str()};
}

}  // namespace

int main() {
    criterion(1, "worked-example exactness", 1.0, worked_example);
    criterion(2, "payment-oracle equivalence", 30, payment_oracles);
    criterion(3, "greedy optimality", 60, greedy_optimality);
    criterion(4, "clinching-VCG equivalence", 60, clinching_vcg);
    criterion(5, "ghost bid under VCG", 120, ghost_vcg);
    criterion(6, "broadcast closure", 120, broadcast_closure);
    criterion(7, "Myerson persistence", 60, myerson_persistence);
    criterion(8, "topology scaling", 300, scaling);
    criterion(9, "knife-edge", 1, knife_edge);
    criterion(10, "invariances", 300, r5);
    criterion(11, "orthogonality identity", 1, orthogonality);
    criterion(12, "perturbation runtime", 60, perturbation_runtime);
    std::printf("%d of 12 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
