#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "polycred/errors.hpp"
#include "polycred/metrics.hpp"
#include "polycred/parallel.hpp"

namespace polycred {

// ---- cost of non-credibility ----------------------------------------------

RoundMetrics round_metrics(const MarketOutcome& o) {
    RoundMetrics m;
    m.revenue = o.revenue;
    m.welfare = o.welfare;
    for (double p : o.pay) m.payments += p;
    return m;
}

nlohmann::ordered_json to_json(const ConcReport& r) {
    nlohmann::ordered_json j;
    j["conc_op"] = r.conc_op;
    j["conc_w"] = r.conc_w;
    j["conc_ag"] = r.conc_ag;
    j["concabs_op"] = r.concabs_op;
    j["base_revenue"] = r.base_revenue;
    j["base_welfare"] = r.base_welfare;
    j["base_payments"] = r.base_payments;
    j["rounds"] = r.rounds;
    return j;
}

ConcReport conc(const std::vector<RoundMetrics>& honest, const std::vector<RoundMetrics>& deviated) {
    if (honest.size() != deviated.size()) throw DomainError("conc needs matched rounds");
    if (honest.empty()) throw DomainError("conc needs at least one round");
    const double n = static_cast<double>(honest.size());
    double rev0 = 0, rev1 = 0, w0 = 0, w1 = 0, p0 = 0, p1 = 0;
    for (std::size_t k = 0; k < honest.size(); ++k) {
        rev0 += honest[k].revenue, rev1 += deviated[k].revenue;
        w0 += honest[k].welfare, w1 += deviated[k].welfare;
        p0 += honest[k].payments, p1 += deviated[k].payments;
    }
    rev0 /= n, rev1 /= n, w0 /= n, w1 /= n, p0 /= n, p1 /= n;
    ConcReport r;
    r.rounds = static_cast<int>(honest.size());
    r.base_revenue = rev0;
    r.base_welfare = w0;
    r.base_payments = p0;
    r.concabs_op = rev1 - rev0;
    if (rev0 == 0 || w0 == 0 || p0 == 0)
        throw UndefinedRatioError("zero baseline; only the absolute variant is defined", r.concabs_op);
    r.conc_op = (rev1 - rev0) / rev0;
    r.conc_w = (w0 - w1) / w0;
    r.conc_ag = ((p1 - p0) + (w0 - w1)) / p0;
    return r;
}

double cliffs_delta(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw DomainError("cliffs_delta needs non-empty samples");
    std::vector<double> sb = b;
    std::sort(sb.begin(), sb.end());
    double net = 0;
    for (double x : a) {
        auto lo = std::lower_bound(sb.begin(), sb.end(), x);
        auto hi = std::upper_bound(sb.begin(), sb.end(), x);
        net += static_cast<double>(lo - sb.begin()) - static_cast<double>(sb.end() - hi);
    }
    return net / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

// ---- gamma distribution -----------------------------------------------------

nlohmann::ordered_json to_json(const GammaSummary& g) {
    nlohmann::ordered_json j;
    j["class"] = to_string(g.cls);
    j["n_samples"] = g.samples.size();
    j["mean"] = g.mean;
    j["units"] = "realized value x capacity units; ratios across classes are not scale-free";
    j["bin_edges"] = g.bin_edges;
    j["bin_counts"] = g.bin_counts;
    j["samples"] = g.samples;
    return j;
}

namespace {

OraclePtr gamma_instance(TopologyClass cls, const ScenarioConfig& c, const RoundProfile& r) {
    switch (cls) {
        case TopologyClass::tree:
        case TopologyClass::sp:
        case TopologyClass::general: return make_oracle(scenario_network(c, r, cls));
        default: {
            TopologyParams p;
            p.n = c.n_agents;
            p.d = 2;
            p.k = std::max(2, c.n_agents);
            p.m = 0;
            p.seed = r.seed;
            return make_oracle(generate_topology(cls, p));
        }
    }
}

}  // namespace

constexpr int kGammaOrderings = 8;

GammaSummary gamma_distribution(TopologyClass cls, const ScenarioConfig& config, int n_samples, std::uint64_t seed,
                                int bins) {
    if (n_samples < 2) throw DomainError("gamma_distribution needs n_samples >= 2");
    if (bins < 1) throw DomainError("need at least one histogram bin");
    config.validate();
    GammaSummary g;
    g.cls = cls;
    g.samples.resize(n_samples);
    for (int s = 0; s < n_samples; ++s) {
        RoundProfile r = generate_round(config, seed, s);
        auto f = gamma_instance(cls, config, r);
        const int n = f->size();
        std::vector<int> live;
        for (int a = 0; a < n; ++a)
            if (r.bids[a] > 0) live.push_back(a);
        if (live.size() < 2) {
            g.samples[s] = 0.0;
            continue;
        }
        std::mt19937_64 rng(stream_seed(seed, s, 0x6A09E667F3BCC909ULL));
        std::uniform_int_distribution<std::size_t> pick(0, live.size() - 1);
        const int i = live[pick(rng)];
        int j = i;
        while (j == i) j = live[pick(rng)];
        std::vector<int> others;
        for (int a : live)
            if (a != i && a != j) others.push_back(a);
        double peak = 0.0;
        for (int rep = 0; rep < kGammaOrderings; ++rep) {
            std::shuffle(others.begin(), others.end(), rng);
            auto st = f->start();
            for (std::size_t k = 0;; ++k) {
                auto both = st->clone();
                both->add(i);
                peak = std::max(peak, st->probe(i) + st->probe(j) - both->probe(j) - st->value());
                if (k == others.size()) break;
                st->add(others[k]);
            }
        }
        g.samples[s] = peak * std::min(r.bids[i], r.bids[j]);
    }
    g.mean = std::accumulate(g.samples.begin(), g.samples.end(), 0.0) / n_samples;
    const auto [lo_it, hi_it] = std::minmax_element(g.samples.begin(), g.samples.end());
    const double lo = *lo_it, hi = *hi_it > *lo_it ? *hi_it : *lo_it + 1.0;
    const double width = (hi - lo) / bins;
    for (int b = 0; b <= bins; ++b) g.bin_edges.push_back(lo + b * width);
    g.bin_counts.assign(bins, 0);
    for (double x : g.samples) ++g.bin_counts[std::min(bins - 1, static_cast<int>((x - lo) / width))];
    return g;
}

// ---- scaling sweeps -------------------------------------------------------

StageResult joint_perturbation(const Stage& s) {
    StageResult r;
    const auto base = vcg_outcome(s.bids, *s.f);
    r.base_revenue = base.revenue;
    std::map<int, BidProfile> shifted;
    for (const auto& c : s.contests) {
        if (c.i < 0 || c.j < 0 || c.i >= s.f->size() || c.j >= s.f->size() || c.i == c.j)
            throw DomainError("contest agents out of range");
        auto [it, fresh] = shifted.try_emplace(c.i, s.bids);
        it->second[c.j] += c.delta;
        r.predicted += c.delta * c.gamma;
    }
    for (const auto& [i, b] : shifted) r.surplus += vcg_outcome(b, *s.f).pay[i] - base.pay[i];
    return r;
}

nlohmann::ordered_json to_json(const ScalingFit& f) {
    nlohmann::ordered_json j;
    j["class"] = to_string(f.cls);
    j["params"] = f.params;
    j["concabs_means"] = f.concabs_means;
    j["slope"] = f.slope;
    j["slope_ci"] = {f.slope_lo, f.slope_hi};
    if (f.cls == TopologyClass::tree) j["aggregate_slope"] = f.aggregate_slope;
    auto pts = nlohmann::ordered_json::array();
    for (const auto& p : f.points) {
        nlohmann::ordered_json q;
        q["param"] = p.param;
        q["seed"] = p.seed;
        q["concabs"] = p.concabs;
        q["predicted"] = p.predicted;
        q["rev_base"] = p.rev_base;
        if (f.cls == TopologyClass::tree) q["aggregate"] = p.aggregate;
        pts.push_back(q);
    }
    j["points"] = pts;
    return j;
}

std::string sweep_csv(const ScalingFit& f) {
    std::ostringstream out;
    out.precision(9);
    out << "param,seed,concabs,rev_base\n";
    for (const auto& p : f.points) out << p.param << ',' << p.seed << ',' << p.concabs << ',' << p.rev_base << '\n';
    return out.str();
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("slope fit needs >= 2 matched points");
    double mx = 0, my = 0;
    const double n = static_cast<double>(x.size());
    std::vector<double> lx(x.size()), ly(y.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!(x[k] > 0) || !(y[k] > 0)) throw DomainError("log-log fit needs positive values");
        lx[k] = std::log(x[k]), ly[k] = std::log(y[k]);
        mx += lx[k], my += ly[k];
    }
    mx /= n, my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t k = 0; k < x.size(); ++k) sxy += (lx[k] - mx) * (ly[k] - my), sxx += (lx[k] - mx) * (lx[k] - mx);
    if (sxx == 0) throw DomainError("slope fit needs distinct x values");
    return sxy / sxx;
}

namespace {

constexpr std::uint64_t class_stream(TopologyClass cls) { return 0xC0FFEEULL + static_cast<std::uint64_t>(cls); }

// Single unit-capacity market shared by `n` agents.
OraclePtr unit_market(int n, double cap) {
    TopologyParams p;
    p.n = n;
    CapacityDag d = generate_topology(TopologyClass::single_edge, p);
    d.cap[d.sink] = cap;
    return make_oracle(d);
}

// Top pair of a stage, charged at half its local window.
Stage top_pair_stage(OraclePtr f, BidProfile bids) {
    Stage s{std::move(f), std::move(bids), {}};
    Perturbation p = construct_perturbation(s.bids, *s.f);
    s.contests.push_back({p.i, p.j, p.delta, p.gamma});
    return s;
}

// Bid ladder: rank r bids 1 + step * r plus jitter below a fifth of a step.
double ladder(int rank, double step, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> jitter(0.0, 0.2 * step);
    return 1.0 + step * rank + jitter(rng);
}

std::vector<Stage> tree_stages(int h, std::mt19937_64& rng, const SweepOptions& opt, bool whole_tree) {
    TopologyParams p;
    p.h = h;
    p.beta = opt.tree_beta;
    CapacityDag d = generate_topology(TopologyClass::tree, p);
    const int n = d.num_agents();
    std::vector<int> parent(d.num_nodes(), -1);
    for (auto [u, v] : d.edges) parent[u] = v;
    // Agent 0 tops the ladder; the best rival in the sibling subtree met at
    // depth r ranks h - r + 1, so every hop's window is about one step.
    const int a = 0;
    std::vector<int> path;  // internal nodes from a's parent up to the root
    for (int v = parent[d.leaves[a]]; v >= 0; v = parent[v]) path.push_back(v);
    auto under = [&](int node, int leaf) {
        for (int v = leaf; v >= 0; v = parent[v])
            if (v == node) return true;
        return false;
    };
    std::vector<int> rank(n, -1);
    rank[a] = 0;
    int next = 1;
    for (std::size_t r = 0; r < path.size(); ++r) {
        const int node = path[r];
        const int below = r == 0 ? d.leaves[a] : path[r - 1];
        for (int b = 0; b < n; ++b)
            if (rank[b] < 0 && under(node, d.leaves[b]) && !under(below, d.leaves[b])) {
                rank[b] = next++;
                break;
            }
    }
    std::vector<int> rest;
    for (int b = 0; b < n; ++b)
        if (rank[b] < 0) rest.push_back(b);
    std::shuffle(rest.begin(), rest.end(), rng);
    for (int b : rest) rank[b] = next++;
    BidProfile bids(n);
    for (int b = 0; b < n; ++b) bids[b] = ladder(n - 1 - rank[b], opt.ladder_step, rng);

    std::vector<int> nodes;
    if (whole_tree) {
        for (int v = 0; v < d.num_nodes(); ++v)
            if (std::find(d.leaves.begin(), d.leaves.end(), v) == d.leaves.end()) nodes.push_back(v);
    } else {
        nodes = path;
    }
    std::vector<Stage> stages;
    for (int node : nodes) {
        BidProfile local;
        for (int b = 0; b < n; ++b)
            if (under(node, d.leaves[b])) local.push_back(bids[b]);
        stages.push_back(top_pair_stage(unit_market(static_cast<int>(local.size()), d.cap[node]), local));
    }
    return stages;
}

void require_grid(const std::vector<int>& grid) {
    if (grid.size() < 4) throw ConfigError("scaling sweep needs at least 4 grid values");
    for (std::size_t k = 1; k < grid.size(); ++k)
        if (grid[k] <= grid[k - 1]) throw ConfigError("grid values must be strictly increasing");
    if (grid.front() < 1) throw ConfigError("grid values must be positive");
}

}  // namespace

std::vector<Stage> sweep_stages(TopologyClass cls, int param, std::uint64_t seed, const SweepOptions& opt) {
    std::mt19937_64 rng(stream_seed(seed, static_cast<std::uint64_t>(param), class_stream(cls)));
    std::uniform_real_distribution<double> value(1.0, 11.0);
    std::vector<Stage> stages;
    switch (cls) {
        case TopologyClass::series: {
            if (opt.series_agents < 2) throw ConfigError("a saturated chain needs >= 2 agents");
            TopologyParams p;
            p.d = param;
            p.n = opt.series_agents;
            CapacityDag d = generate_topology(TopologyClass::series, p);
            // Chain nodes are 0..d-1; each is priced as its own market.
            for (int r = 0; r < param; ++r) {
                BidProfile bids(p.n);
                for (auto& b : bids) b = value(rng);
                stages.push_back(top_pair_stage(unit_market(p.n, d.cap[r]), bids));
            }
            break;
        }
        case TopologyClass::parallel: {
            if (param > opt.parallel_paths)
                throw ConfigError("cannot saturate " + std::to_string(param) + " of " +
                                  std::to_string(opt.parallel_paths) + " paths");
            TopologyParams p;
            p.k = opt.parallel_paths;
            p.m = param;
            auto f = make_oracle(generate_topology(TopologyClass::parallel, p));
            Stage s{f, BidProfile(f->size()), {}};
            for (auto& b : s.bids) b = value(rng);
            for (int r = 0; r < param; ++r) {
                int i = 2 * r, j = 2 * r + 1;
                if (s.bids[j] > s.bids[i]) std::swap(i, j);
                s.contests.push_back({i, j, 0.5 * (s.bids[i] - s.bids[j]), gamma_ij(*f, i, j)});
            }
            stages.push_back(std::move(s));
            break;
        }
        case TopologyClass::tree: stages = tree_stages(param, rng, opt, false); break;
        case TopologyClass::general: {
            TopologyParams p;
            p.n = param;
            if (param < 2) throw ConfigError("the entangled witness needs >= 2 agents");
            auto f = make_oracle(generate_topology(TopologyClass::general, p));
            std::vector<int> rank(param);
            std::iota(rank.begin(), rank.end(), 0);
            std::shuffle(rank.begin(), rank.end(), rng);
            Stage s{f, BidProfile(param), {}};
            for (int a = 0; a < param; ++a) s.bids[a] = ladder(rank[a], opt.ladder_step, rng);
            // Every pair contests: j is lifted by half its upward window.
            std::vector<int> order(param);
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](int x, int y) { return s.bids[x] > s.bids[y]; });
            for (int hi = 0; hi < param; ++hi)
                for (int lo = hi + 1; lo < param; ++lo) {
                    const int i = order[hi], j = order[lo];
                    const double window = s.bids[order[lo - 1]] - s.bids[j];
                    s.contests.push_back({i, j, 0.5 * window, gamma_ij(*f, i, j)});
                }
            stages.push_back(std::move(s));
            break;
        }
        default: throw ConfigError("scaling sweeps cover series, parallel, tree and general");
    }
    for (const auto& s : stages)
        for (const auto& c : s.contests)
            if (!(c.gamma > kTol)) throw ConfigError("witness contest is not saturated");
    return stages;
}

ScalingFit scaling_sweep(TopologyClass cls, const std::vector<int>& grid, const std::vector<std::uint64_t>& seeds,
                         const SweepOptions& opt) {
    require_grid(grid);
    if (seeds.empty()) throw ConfigError("scaling sweep needs at least one seed");
    ScalingFit fit;
    fit.cls = cls;
    fit.params = grid;
    fit.points.resize(grid.size() * seeds.size());
    parallel_for(fit.points.size(), opt.jobs, [&](std::size_t k) {
        SweepPoint& pt = fit.points[k];
        pt.param = grid[k / seeds.size()];
        pt.seed = seeds[k % seeds.size()];
        for (const auto& s : sweep_stages(cls, pt.param, pt.seed, opt)) {
            StageResult r = joint_perturbation(s);
            pt.concabs += r.surplus;
            pt.predicted += r.predicted;
            pt.rev_base += r.base_revenue;
        }
        if (cls == TopologyClass::tree) {
            std::mt19937_64 rng(stream_seed(pt.seed, static_cast<std::uint64_t>(pt.param), class_stream(cls)));
            for (const auto& s : tree_stages(pt.param, rng, opt, true)) pt.aggregate += joint_perturbation(s).surplus;
        }
    });

    const std::size_t S = seeds.size();
    auto means_for = [&](const std::vector<std::size_t>& pick, bool aggregate) {
        std::vector<double> m(grid.size(), 0.0);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            for (std::size_t s : pick) {
                const auto& pt = fit.points[g * S + s];
                m[g] += aggregate ? pt.aggregate : pt.concabs;
            }
            m[g] /= static_cast<double>(pick.size());
        }
        return m;
    };
    std::vector<double> x(grid.begin(), grid.end());
    std::vector<std::size_t> all(S);
    std::iota(all.begin(), all.end(), 0);
    fit.concabs_means = means_for(all, false);
    fit.slope = loglog_slope(x, fit.concabs_means);
    if (cls == TopologyClass::tree) fit.aggregate_slope = loglog_slope(x, means_for(all, true));

    std::vector<double> boot;
    std::mt19937_64 rng(0x5EEDULL);
    std::uniform_int_distribution<std::size_t> pick(0, S - 1);
    for (int b = 0; b < opt.resamples; ++b) {
        std::vector<std::size_t> idx(S);
        for (auto& v : idx) v = pick(rng);
        boot.push_back(loglog_slope(x, means_for(idx, false)));
    }
    if (boot.empty()) {
        fit.slope_lo = fit.slope_hi = fit.slope;
    } else {
        std::sort(boot.begin(), boot.end());
        auto at = [&](double q) { return boot[static_cast<std::size_t>(q * (boot.size() - 1))]; };
        fit.slope_lo = at(0.025);
        fit.slope_hi = at(0.975);
    }
    return fit;
}

// ---- competition ------------------------------------------------------------

double salop_markup(double t, int k) {
    if (!(t > 0) || !std::isfinite(t)) throw DomainError("transport cost must be positive");
    if (k < 2) throw DomainError("Salop competition needs k >= 2 firms");
    return t / k;
}

double bertrand_price(double marginal_cost) {
    if (!(marginal_cost >= 0) || !std::isfinite(marginal_cost)) throw DomainError("marginal cost must be >= 0");
    return marginal_cost;
}

Decomposition orthogonality_decompose(double lambda, double epsilon, double t, int k, double consumer_mass) {
    if (!(lambda >= 0 && lambda <= 1)) throw DomainError("stake must lie in [0, 1]");
    if (!(epsilon >= 0) || !std::isfinite(epsilon)) throw DomainError("increment must be >= 0");
    if (!(consumer_mass >= 0) || !std::isfinite(consumer_mass)) throw DomainError("consumer mass must be >= 0");
    Decomposition d;
    d.cred_component = lambda * epsilon;
    d.salop_component = salop_markup(t, k) * consumer_mass;
    d.total = d.cred_component + d.salop_component;
    return d;
}

}  // namespace polycred
