#include <algorithm>
#include <cmath>
#include <queue>
#include <random>
#include <set>

#include "polycred/errors.hpp"
#include "polycred/polymatroid.hpp"

namespace polycred {

std::string to_string(TopologyClass c) {
    switch (c) {
        case TopologyClass::single_edge: return "single_edge";
        case TopologyClass::series: return "series";
        case TopologyClass::parallel: return "parallel";
        case TopologyClass::tree: return "tree";
        case TopologyClass::sp: return "sp";
        case TopologyClass::general: return "general";
    }
    return "general";
}

TopologyClass topology_class_from_string(const std::string& s) {
    if (s == "single_edge") return TopologyClass::single_edge;
    if (s == "series") return TopologyClass::series;
    if (s == "parallel") return TopologyClass::parallel;
    if (s == "tree") return TopologyClass::tree;
    if (s == "sp") return TopologyClass::sp;
    if (s == "general" || s == "entangled") return TopologyClass::general;
    throw ConfigError("unknown topology class: " + s);
}

std::vector<int> CapacityDag::topological_order() const {
    const int n = num_nodes();
    std::vector<int> indeg(n, 0);
    std::vector<std::vector<int>> out(n);
    for (auto [u, v] : edges) {
        if (u < 0 || u >= n || v < 0 || v >= n) throw StructureError("edge endpoint out of range");
        out[u].push_back(v);
        ++indeg[v];
    }
    std::vector<int> order;
    std::queue<int> q;
    for (int v = 0; v < n; ++v)
        if (indeg[v] == 0) q.push(v);
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        order.push_back(u);
        for (int v : out[u])
            if (--indeg[v] == 0) q.push(v);
    }
    if (static_cast<int>(order.size()) != n) throw StructureError("graph has a cycle");
    return order;
}

void CapacityDag::validate() const {
    const int n = num_nodes();
    if (n == 0) throw StructureError("empty graph");
    if (sink < 0 || sink >= n) throw StructureError("sink out of range");
    if (leaves.empty()) throw StructureError("no agents");
    for (double c : cap)
        if (!(c >= 0)) throw StructureError("negative or NaN capacity");
    topological_order();
    std::vector<std::vector<int>> in(n);
    for (auto [u, v] : edges) in[v].push_back(u);
    std::vector<char> reach(n, 0);
    std::vector<int> stack{sink};
    reach[sink] = 1;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int u : in[v])
            if (!reach[u]) reach[u] = 1, stack.push_back(u);
    }
    for (int leaf : leaves) {
        if (leaf < 0 || leaf >= n) throw StructureError("leaf out of range");
        if (!reach[leaf]) throw StructureError("leaf cannot reach the sink");
    }
}

bool CapacityDag::is_in_tree() const {
    std::vector<int> outdeg(num_nodes(), 0);
    for (auto [u, v] : edges) ++outdeg[u];
    for (int v = 0; v < num_nodes(); ++v) {
        if (v == sink ? outdeg[v] != 0 : outdeg[v] != 1) return false;
    }
    return true;
}

nlohmann::ordered_json to_json(const CapacityDag& dag) {
    nlohmann::ordered_json j;
    j["class"] = to_string(dag.cls);
    auto nodes = nlohmann::ordered_json::array();
    for (int v = 0; v < dag.num_nodes(); ++v) {
        nlohmann::ordered_json node;
        node["id"] = v;
        if (std::isinf(dag.cap[v]))
            node["cap"] = nullptr;
        else
            node["cap"] = dag.cap[v];
        nodes.push_back(node);
    }
    j["nodes"] = nodes;
    auto edges = nlohmann::ordered_json::array();
    for (auto [u, v] : dag.edges) edges.push_back({u, v});
    j["edges"] = edges;
    nlohmann::ordered_json leaves = nlohmann::ordered_json::object();
    for (int a = 0; a < dag.num_agents(); ++a) leaves[std::to_string(a)] = dag.leaves[a];
    j["leaves"] = leaves;
    j["sink"] = dag.sink;
    return j;
}

CapacityDag dag_from_json(const nlohmann::json& j) {
    CapacityDag dag;
    try {
        dag.cls = topology_class_from_string(j.at("class").get<std::string>());
        const auto& nodes = j.at("nodes");
        dag.cap.assign(nodes.size(), 0.0);
        for (const auto& node : nodes) {
            int id = node.at("id").get<int>();
            if (id < 0 || id >= static_cast<int>(nodes.size()))
                throw StructureError("node id out of range");
            dag.cap[id] = node.at("cap").is_null() ? kInf : node.at("cap").get<double>();
        }
        for (const auto& e : j.at("edges")) dag.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
        const auto& leaves = j.at("leaves");
        dag.leaves.assign(leaves.size(), -1);
        for (auto it = leaves.begin(); it != leaves.end(); ++it) {
            int a = std::stoi(it.key());
            if (a < 0 || a >= static_cast<int>(leaves.size())) throw StructureError("agent id out of range");
            dag.leaves[a] = it.value().get<int>();
        }
        dag.sink = j.at("sink").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw StructureError(std::string("bad topology json: ") + e.what());
    }
    dag.validate();
    return dag;
}

namespace {

struct Builder {
    CapacityDag dag;
    int node(double cap) {
        dag.cap.push_back(cap);
        return dag.num_nodes() - 1;
    }
    void edge(int u, int v) { dag.edges.emplace_back(u, v); }
};

// Random two-terminal SP block between fresh entry/exit nodes; returns (entry, exit).
std::pair<int, int> sp_block(Builder& b, std::mt19937_64& rng, int depth) {
    std::uniform_int_distribution<int> cap(1, 4);
    std::uniform_int_distribution<int> coin(0, 2);
    if (depth == 0) {
        int v = b.node(cap(rng));
        return {v, v};
    }
    int kind = coin(rng);
    if (kind == 0) {  // series
        auto [a1, z1] = sp_block(b, rng, depth - 1);
        auto [a2, z2] = sp_block(b, rng, depth - 1);
        b.edge(z1, a2);
        return {a1, z2};
    }
    if (kind == 1) {  // parallel between an unbounded fan-out and fan-in
        int in = b.node(kInf), out = b.node(kInf);
        auto [a1, z1] = sp_block(b, rng, depth - 1);
        auto [a2, z2] = sp_block(b, rng, depth - 1);
        b.edge(in, a1), b.edge(in, a2), b.edge(z1, out), b.edge(z2, out);
        return {in, out};
    }
    int v = b.node(cap(rng));
    return {v, v};
}

}  // namespace

CapacityDag generate_topology(TopologyClass cls, const TopologyParams& p) {
    Builder b;
    b.dag.cls = cls;
    if (p.n < 1) throw ConfigError("n must be >= 1");
    switch (cls) {
        case TopologyClass::single_edge: {
            int e = b.node(1.0);
            b.dag.sink = e;
            for (int a = 0; a < p.n; ++a) {
                int leaf = b.node(1.0);
                b.edge(leaf, e);
                b.dag.leaves.push_back(leaf);
            }
            break;
        }
        case TopologyClass::series: {
            if (p.d < 1) throw ConfigError("series needs d >= 1");
            int prev = -1, first = -1;
            for (int i = 0; i < p.d; ++i) {
                int v = b.node(1.0);
                if (prev >= 0) b.edge(prev, v);
                if (first < 0) first = v;
                prev = v;
            }
            b.dag.sink = prev;
            for (int a = 0; a < p.n; ++a) {
                int leaf = b.node(1.0);
                b.edge(leaf, first);
                b.dag.leaves.push_back(leaf);
            }
            break;
        }
        case TopologyClass::parallel: {
            // k unit paths into an unbounded sink; the first m paths carry two
            // agents (saturated), the rest one. n is ignored.
            if (p.k < 2) throw ConfigError("parallel needs k >= 2");
            if (p.m < 0 || p.m > p.k) throw ConfigError("parallel needs 0 <= m <= k");
            int sink = b.node(kInf);
            b.dag.sink = sink;
            for (int path = 0; path < p.k; ++path) {
                int e = b.node(1.0);
                b.edge(e, sink);
                int agents = path < p.m ? 2 : 1;
                for (int a = 0; a < agents; ++a) {
                    int leaf = b.node(1.0);
                    b.edge(leaf, e);
                    b.dag.leaves.push_back(leaf);
                }
            }
            break;
        }
        case TopologyClass::tree: {
            if (p.h < 1 || p.beta < 2) throw ConfigError("tree needs h >= 1 and beta >= 2");
            double leaves = std::pow(p.beta, p.h);
            if (leaves > 2e6) throw ConfigError("tree too large");
            int root = b.node(1.0);
            b.dag.sink = root;
            std::vector<int> level{root};
            for (int depth = 1; depth <= p.h; ++depth) {
                std::vector<int> next;
                next.reserve(level.size() * p.beta);
                for (int parent : level)
                    for (int c = 0; c < p.beta; ++c) {
                        int v = b.node(1.0);
                        b.edge(v, parent);
                        next.push_back(v);
                    }
                level.swap(next);
            }
            b.dag.leaves = level;
            break;
        }
        case TopologyClass::sp: {
            // Agents hang off leaves attached to random block nodes; draws that
            // break series-parallel structure are rejected and redrawn.
            for (std::uint64_t attempt = 0;; ++attempt) {
                Builder t;
                t.dag.cls = cls;
                std::mt19937_64 rng(p.seed * 0x9E3779B97F4A7C15ULL + attempt);
                auto [in, out] = sp_block(t, rng, std::max(1, p.h));
                int blocks = t.dag.num_nodes();
                int sink = t.node(kInf);
                t.edge(out, sink);
                t.dag.sink = sink;
                std::uniform_int_distribution<int> pick(0, blocks - 1);
                std::uniform_int_distribution<int> cap(1, 3);
                for (int a = 0; a < p.n; ++a) {
                    int leaf = t.node(cap(rng));
                    t.edge(leaf, attempt < 50 ? pick(rng) : in);
                    t.dag.leaves.push_back(leaf);
                }
                if (SpOracle::recognize(t.dag)) {
                    b = std::move(t);
                    break;
                }
            }
            break;
        }
        case TopologyClass::general: {
            // Fully entangled: a unit edge per agent pair, each fed by one stub
            // from either agent and drained by its own stub.
            if (p.n < 2) throw ConfigError("entangled needs n >= 2");
            int sink = b.node(kInf);
            b.dag.sink = sink;
            for (int a = 0; a < p.n; ++a) b.dag.leaves.push_back(b.node(p.n - 1.0));
            for (int i = 0; i < p.n; ++i)
                for (int j = i + 1; j < p.n; ++j) {
                    int e = b.node(1.0);
                    int si = b.node(1.0), sj = b.node(1.0), out = b.node(1.0);
                    b.edge(b.dag.leaves[i], si), b.edge(si, e);
                    b.edge(b.dag.leaves[j], sj), b.edge(sj, e);
                    b.edge(e, out), b.edge(out, sink);
                }
            break;
        }
    }
    b.dag.validate();
    return b.dag;
}

}  // namespace polycred
