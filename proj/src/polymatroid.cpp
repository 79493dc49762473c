#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <set>

#include "polycred/errors.hpp"
#include "polycred/maxflow.hpp"
#include "polycred/polymatroid.hpp"

namespace polycred {

double gamma_ij(const RankOracle& f, int i, int j) {
    return f.rank({i}) + f.rank({j}) - f.rank({i, j});
}

NonModularityProfile nonmodularity_profile(const RankOracle& f) {
    NonModularityProfile p;
    for (int i = 0; i < f.size(); ++i)
        for (int j = i + 1; j < f.size(); ++j) {
            double g = gamma_ij(f, i, j);
            if (g > kTol) {
                p.pairs.push_back({i, j, g});
                p.Gamma += g;
            }
        }
    p.sharing_pair_count = static_cast<int>(p.pairs.size());
    return p;
}

namespace {

// Relative tolerance so large capacities don't trip the check on rounding.
bool exceeds(double lhs, double rhs) { return lhs > rhs + kTol * std::max(1.0, std::abs(rhs)); }

}  // namespace

AxiomVerdict verify_axioms(const RankOracle& f, int samples, std::uint64_t seed) {
    AxiomVerdict v;
    const int n = f.size();
    if (std::abs(f.rank({})) > kTol) {
        v.ok = false;
        v.axiom = "normalization";
        return v;
    }
    if (n <= 12) {
        const std::uint64_t full = std::uint64_t{1} << n;
        std::vector<double> val(full);
        for (std::uint64_t m = 0; m < full; ++m) val[m] = f.rank_mask(m);
        for (std::uint64_t m = 0; m < full; ++m)
            for (int e = 0; e < n; ++e)
                if (!(m >> e & 1) && exceeds(val[m], val[m | (std::uint64_t{1} << e)])) {
                    v.ok = false;
                    v.axiom = "monotonicity";
                    v.a = mask_to_subset(m, n);
                    v.b = mask_to_subset(m | (std::uint64_t{1} << e), n);
                    return v;
                }
        for (std::uint64_t a = 0; a < full; ++a)
            for (std::uint64_t b = a + 1; b < full; ++b)
                if (exceeds(val[a | b] + val[a & b], val[a] + val[b])) {
                    v.ok = false;
                    v.axiom = "submodularity";
                    v.a = mask_to_subset(a, n);
                    v.b = mask_to_subset(b, n);
                    return v;
                }
        return v;
    }
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int it = 0; it < samples; ++it) {
        Subset a, b, uni, inter;
        for (int i = 0; i < n; ++i) {
            bool ia = coin(rng), ib = coin(rng);
            if (ia) a.push_back(i);
            if (ib) b.push_back(i);
            if (ia || ib) uni.push_back(i);
            if (ia && ib) inter.push_back(i);
        }
        if (exceeds(f.rank(uni) + f.rank(inter), f.rank(a) + f.rank(b))) {
            v.ok = false;
            v.axiom = "submodularity";
            v.a = a;
            v.b = b;
            return v;
        }
        Subset bigger = a;
        int e = pick(rng);
        if (!std::binary_search(a.begin(), a.end(), e)) {
            bigger.insert(std::upper_bound(bigger.begin(), bigger.end(), e), e);
            if (exceeds(f.rank(a), f.rank(bigger))) {
                v.ok = false;
                v.axiom = "monotonicity";
                v.a = a;
                v.b = bigger;
                return v;
            }
        }
    }
    return v;
}

// ---- encapsulation --------------------------------------------------------

double slice_maxflow(const CapacityDag& dag, const std::vector<int>& nodes) {
    const int n = dag.num_nodes();
    std::vector<int> local(n, -1);
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i) local[nodes[i]] = i;
    const int k = static_cast<int>(nodes.size());
    FlowNetwork net(2 * k + 2);
    const int s = 2 * k, t = 2 * k + 1;
    std::vector<int> indeg(k, 0), outdeg(k, 0);
    for (int i = 0; i < k; ++i) net.add_edge(2 * i, 2 * i + 1, dag.cap[nodes[i]]);
    for (auto [u, v] : dag.edges) {
        if (local[u] < 0 || local[v] < 0) continue;
        net.add_edge(2 * local[u] + 1, 2 * local[v], kInf);
        ++outdeg[local[u]], ++indeg[local[v]];
    }
    for (int i = 0; i < k; ++i) {
        if (indeg[i] == 0) net.add_edge(s, 2 * i, kInf);
        if (outdeg[i] == 0) net.add_edge(2 * i + 1, t, kInf);
    }
    return net.augment(s, t);
}

QuotientGraph encapsulate(const CapacityDag& dag, const std::vector<int>& cluster_of, int samples,
                          std::uint64_t seed) {
    dag.validate();
    const int n = dag.num_nodes();
    if (static_cast<int>(cluster_of.size()) != n) throw StructureError("partition must cover every node");
    int k = 0;
    for (int c : cluster_of) {
        if (c < 0) throw StructureError("negative cluster id");
        k = std::max(k, c + 1);
    }
    QuotientGraph q;
    q.clusters.assign(k, {});
    for (int v = 0; v < n; ++v) q.clusters[cluster_of[v]].push_back(v);
    for (int c = 0; c < k; ++c)
        if (q.clusters[c].empty()) throw StructureError("cluster ids must be contiguous");

    // Each cluster must be weakly connected.
    std::vector<std::vector<int>> und(n);
    for (auto [u, v] : dag.edges)
        if (cluster_of[u] == cluster_of[v]) und[u].push_back(v), und[v].push_back(u);
    for (int c = 0; c < k; ++c) {
        std::vector<char> seen(n, 0);
        std::vector<int> stack{q.clusters[c][0]};
        seen[stack[0]] = 1;
        std::size_t count = 1;
        while (!stack.empty()) {
            int x = stack.back();
            stack.pop_back();
            for (int y : und[x])
                if (!seen[y]) seen[y] = 1, ++count, stack.push_back(y);
        }
        if (count != q.clusters[c].size())
            throw StructureError("cluster " + std::to_string(c) + " is not connected");
    }

    q.slice_capacity.resize(k);
    for (int c = 0; c < k; ++c) q.slice_capacity[c] = slice_maxflow(dag, q.clusters[c]);

    CapacityDag& out = q.quotient;
    out.cap = q.slice_capacity;
    std::set<std::pair<int, int>> seen_edges;
    for (auto [u, v] : dag.edges) {
        int cu = cluster_of[u], cv = cluster_of[v];
        if (cu != cv && seen_edges.insert({cu, cv}).second) out.edges.emplace_back(cu, cv);
    }
    for (int leaf : dag.leaves) out.leaves.push_back(cluster_of[leaf]);
    out.sink = cluster_of[dag.sink];
    out.validate();  // throws on a cyclic quotient
    out.cls = k == n ? dag.cls : out.is_in_tree() ? TopologyClass::tree : TopologyClass::general;

    // Faithfulness: every agent subset keeps its rank.
    const int agents = dag.num_agents();
    auto check = [&](const Subset& s) {
        double a = dag_maxflow(dag, s), b = dag_maxflow(out, s);
        if (std::abs(a - b) > kTol * std::max(1.0, std::abs(a))) {
            std::string ids;
            for (int x : s) ids += (ids.empty() ? "" : ",") + std::to_string(x);
            throw FaithfulnessError("quotient rank differs on {" + ids + "}: " + std::to_string(a) + " vs " +
                                    std::to_string(b));
        }
    };
    if (agents <= 10) {
        for (std::uint64_t m = 1; m < (std::uint64_t{1} << agents); ++m) check(mask_to_subset(m, agents));
    } else {
        std::mt19937_64 rng(seed);
        std::bernoulli_distribution coin(0.5);
        for (int it = 0; it < samples; ++it) {
            Subset s;
            for (int a = 0; a < agents; ++a)
                if (coin(rng)) s.push_back(a);
            check(s);
        }
    }
    return q;
}

// ---- level-1 matroid ------------------------------------------------------

Level1Matroid::Level1Matroid(std::vector<int> capacity, std::vector<std::vector<int>> eligibility)
    : cap_(std::move(capacity)), eligible_(std::move(eligibility)) {
    for (int c : cap_)
        if (c < 0) throw DomainError("negative capacity");
    for (const auto& e : eligible_)
        for (int k : e)
            if (k < 0 || k >= static_cast<int>(cap_.size())) throw DomainError("unknown integrator id");
}

int Level1Matroid::num_tokens() const { return std::accumulate(cap_.begin(), cap_.end(), 0); }

int Level1Matroid::matroid_rank(const Subset& s) const {
    // Augmenting-path matching of agents to integrator slots.
    std::vector<int> used(cap_.size(), 0);
    std::vector<std::vector<int>> holder(cap_.size());
    int matched = 0;
    for (int a : s) {
        if (a < 0 || a >= num_agents()) throw DomainError("unknown agent id");
        std::vector<char> visited(cap_.size(), 0);
        std::function<bool(int)> try_agent = [&](int x) -> bool {
            for (int k : eligible_[x]) {
                if (visited[k]) continue;
                visited[k] = 1;
                if (used[k] < cap_[k]) {
                    ++used[k];
                    holder[k].push_back(x);
                    return true;
                }
                for (auto& y : holder[k]) {
                    int prev = y;
                    if (try_agent(prev)) {
                        y = x;
                        return true;
                    }
                }
            }
            return false;
        };
        if (try_agent(a)) ++matched;
    }
    return matched;
}

bool Level1Matroid::independent(const Subset& s) const {
    Subset u = s;
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    return matroid_rank(u) == static_cast<int>(u.size());
}

CapacityDag Level1Matroid::as_dag() const {
    CapacityDag dag;
    dag.cap.push_back(kInf);
    dag.sink = 0;
    for (int c : cap_) {
        dag.cap.push_back(c);
        dag.edges.emplace_back(dag.num_nodes() - 1, 0);
    }
    for (const auto& e : eligible_) {
        dag.cap.push_back(e.empty() ? 0.0 : 1.0);
        int leaf = dag.num_nodes() - 1;
        if (e.empty()) dag.edges.emplace_back(leaf, 0);
        for (int k : e) dag.edges.emplace_back(leaf, 1 + k);
        dag.leaves.push_back(leaf);
    }
    dag.cls = dag.is_in_tree() ? TopologyClass::tree : TopologyClass::general;
    return dag;
}

OraclePtr Level1Matroid::oracle() const { return make_oracle(as_dag()); }

Level1Matroid level1_matroid(const std::vector<double>& capacities,
                             const std::vector<std::vector<int>>& eligibility) {
    std::vector<int> caps;
    for (double c : capacities) {
        if (!(c >= 0) || std::floor(c) != c)
            throw Level2RegimeError("integrator capacity " + std::to_string(c) +
                                    " is not a non-negative integer; no token matroid exists");
        caps.push_back(static_cast<int>(c));
    }
    return Level1Matroid(std::move(caps), eligibility);
}

MatroidVerdict check_matroid(const Level1Matroid& m) {
    if (m.num_agents() > 20) throw DomainError("exhaustive matroid check limited to 20 elements");
    return check_matroid_axioms(m.num_agents(), [&](const Subset& s) { return m.independent(s); });
}

MatroidVerdict check_level1_encapsulation(const Level1Matroid& m, const RankOracle& actual) {
    if (actual.size() != m.num_agents()) throw DomainError("ground sets differ");
    const int n = m.num_agents();
    if (n > 20) throw DomainError("exhaustive check limited to 20 agents");
    std::vector<std::uint64_t> masks(std::uint64_t{1} << n);
    std::iota(masks.begin(), masks.end(), 0);
    std::stable_sort(masks.begin(), masks.end(),
                     [](auto a, auto b) { return __builtin_popcountll(a) < __builtin_popcountll(b); });
    MatroidVerdict v;
    for (auto mask : masks) {
        Subset s = mask_to_subset(mask, n);
        bool predicted = m.independent(s);
        bool feasible = std::abs(actual.rank(s) - static_cast<double>(s.size())) <= kTol;
        if (predicted != feasible) {
            v.ok = false;
            v.axiom = predicted ? "augmentation" : "independence";
            v.augmented = s;
            if (!s.empty()) {
                v.b = {s.back()};
                v.a = Subset(s.begin(), s.end() - 1);
            }
            return v;
        }
    }
    return v;
}

}  // namespace polycred
