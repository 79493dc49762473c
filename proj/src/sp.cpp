#include <algorithm>
#include <cmath>
#include <map>

#include "polycred/errors.hpp"
#include "polycred/polymatroid.hpp"

namespace polycred {

namespace {

struct Edge {
    int u, v, term;
    bool alive = true;
};

class Reducer {
public:
    std::vector<SpOracle::Term> terms;

    int constant(double c) {
        terms.push_back({SpOracle::Term::constant, c, {}, {}});
        return static_cast<int>(terms.size()) - 1;
    }
    int agent(int a) {
        terms.push_back({SpOracle::Term::agent, 0.0, {a}, {}});
        return static_cast<int>(terms.size()) - 1;
    }
    // Folds constants and flattens nested terms of the same kind.
    int combine(SpOracle::Term::Kind kind, const std::vector<int>& parts) {
        std::vector<int> kids;
        bool has_const = false;
        double folded = kind == SpOracle::Term::series ? kInf : 0.0;
        for (int p : parts) {
            const auto& t = terms[p];
            if (t.kind == SpOracle::Term::constant) {
                has_const = true;
                folded = kind == SpOracle::Term::series ? std::min(folded, t.cap) : folded + t.cap;
            } else if (t.kind == kind) {
                kids.insert(kids.end(), t.kids.begin(), t.kids.end());
            } else {
                kids.push_back(p);
            }
        }
        if (kids.empty()) return constant(folded);
        if (has_const) {
            // An infinite series factor or zero parallel summand is neutral.
            bool neutral = kind == SpOracle::Term::series ? std::isinf(folded) : folded == 0.0;
            if (!neutral) kids.push_back(constant(folded));
        }
        if (kids.size() == 1) return kids[0];
        terms.push_back({kind, 0.0, {}, kids});
        return static_cast<int>(terms.size()) - 1;
    }
};

}  // namespace

SpOracle::SpOracle(CapacityDag dag, std::vector<Term> terms, int root)
    : RankOracle(dag.num_agents()), dag_(std::move(dag)), terms_(std::move(terms)), root_(root) {}

std::shared_ptr<SpOracle> SpOracle::recognize(const CapacityDag& dag) {
    dag.validate();
    const int n = dag.num_nodes();
    const int s = 2 * n, t = 2 * dag.sink + 1, nv = 2 * n + 1;
    Reducer r;
    std::vector<Edge> edges;
    for (int v = 0; v < n; ++v) edges.push_back({2 * v, 2 * v + 1, r.constant(dag.cap[v])});
    for (auto [u, v] : dag.edges) edges.push_back({2 * u + 1, 2 * v, r.constant(kInf)});
    for (int a = 0; a < dag.num_agents(); ++a) edges.push_back({s, 2 * dag.leaves[a], r.agent(a)});

    // Keep only vertices on some s-t path.
    auto reach = [&](int from, bool forward) {
        std::vector<std::vector<int>> adj(nv);
        for (const auto& e : edges) forward ? adj[e.u].push_back(e.v) : adj[e.v].push_back(e.u);
        std::vector<char> seen(nv, 0);
        std::vector<int> stack{from};
        seen[from] = 1;
        while (!stack.empty()) {
            int x = stack.back();
            stack.pop_back();
            for (int y : adj[x])
                if (!seen[y]) seen[y] = 1, stack.push_back(y);
        }
        return seen;
    };
    auto fwd = reach(s, true), bwd = reach(t, false);
    for (auto& e : edges)
        if (!(fwd[e.u] && bwd[e.u] && fwd[e.v] && bwd[e.v])) e.alive = false;

    bool changed = true;
    while (changed) {
        changed = false;
        // Parallel merge.
        std::map<std::pair<int, int>, std::vector<int>> groups;
        for (int i = 0; i < static_cast<int>(edges.size()); ++i)
            if (edges[i].alive) groups[{edges[i].u, edges[i].v}].push_back(i);
        for (auto& [key, ids] : groups) {
            if (ids.size() < 2) continue;
            std::vector<int> parts;
            for (int id : ids) parts.push_back(edges[id].term), edges[id].alive = false;
            edges.push_back({key.first, key.second, r.combine(Term::parallel, parts)});
            changed = true;
        }
        // Series contraction of vertices with one in- and one out-edge.
        std::vector<int> indeg(nv, 0), outdeg(nv, 0), in_edge(nv, -1), out_edge(nv, -1);
        for (int i = 0; i < static_cast<int>(edges.size()); ++i) {
            if (!edges[i].alive) continue;
            ++outdeg[edges[i].u], out_edge[edges[i].u] = i;
            ++indeg[edges[i].v], in_edge[edges[i].v] = i;
        }
        for (int w = 0; w < nv; ++w) {
            if (w == s || w == t || indeg[w] != 1 || outdeg[w] != 1) continue;
            Edge& a = edges[in_edge[w]];
            Edge& b = edges[out_edge[w]];
            if (!a.alive || !b.alive || a.u == w) continue;
            a.alive = b.alive = false;
            Edge merged{a.u, b.v, r.combine(Term::series, {a.term, b.term})};
            edges.push_back(merged);
            changed = true;
            break;  // degree tables are stale now
        }
    }
    int root = -1, alive = 0;
    for (const auto& e : edges) {
        if (!e.alive) continue;
        ++alive;
        if (e.u == s && e.v == t) root = e.term;
    }
    if (alive != 1 || root < 0) return nullptr;
    return std::shared_ptr<SpOracle>(new SpOracle(dag, std::move(r.terms), root));
}

double SpOracle::eval_term(int t, const std::vector<char>& in) const {
    const Term& term = terms_[t];
    switch (term.kind) {
        case Term::constant: return term.cap;
        case Term::agent:
            for (int a : term.agents)
                if (in[a]) return kInf;
            return 0.0;
        case Term::series: {
            double v = kInf;
            for (int k : term.kids) {
                v = std::min(v, eval_term(k, in));
                if (v == 0.0) break;
            }
            return v;
        }
        case Term::parallel: {
            double v = 0.0;
            for (int k : term.kids) v += eval_term(k, in);
            return v;
        }
    }
    return 0.0;
}

double SpOracle::eval(const Subset& s) const {
    std::vector<char> in(size(), 0);
    for (int a : s) in[a] = 1;
    return eval_term(root_, in);
}

std::string SpOracle::digest_material() const { return "sp_compositional:" + to_json(dag_).dump(); }

}  // namespace polycred
