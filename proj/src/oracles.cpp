#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <ranges>
#include <unordered_map>

#include "polycred/errors.hpp"
#include "polycred/maxflow.hpp"
#include "polycred/polymatroid.hpp"

namespace polycred {

Subset mask_to_subset(std::uint64_t mask, int n) {
    Subset s;
    for (int i = 0; i < n; ++i)
        if (mask >> i & 1) s.push_back(i);
    return s;
}

std::uint64_t subset_to_mask(const Subset& s) {
    std::uint64_t m = 0;
    for (int i : s) m |= std::uint64_t{1} << i;
    return m;
}

namespace {

std::string fmt_double(double x) {
    if (std::isinf(x)) return "inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// Falls back on rank() for every probe.
class GenericState : public GreedyState {
public:
    explicit GenericState(const RankOracle& f) : f_(f) {}
    double value() const override { return value_; }
    double probe(int agent) const override {
        if (std::binary_search(members_.begin(), members_.end(), agent)) return value_;
        Subset s = members_;
        s.insert(std::upper_bound(s.begin(), s.end(), agent), agent);
        return f_.rank(s);
    }
    void add(int agent) override {
        if (std::binary_search(members_.begin(), members_.end(), agent)) return;
        members_.insert(std::upper_bound(members_.begin(), members_.end(), agent), agent);
        value_ = f_.rank(members_);
    }
    std::unique_ptr<GreedyState> clone() const override { return std::make_unique<GenericState>(*this); }

private:
    const RankOracle& f_;
    Subset members_;
    double value_ = 0.0;
};

}  // namespace

// ---- RankOracle -----------------------------------------------------------

RankOracle::RankOracle(int n) : n_(n) {
    if (n < 1) throw DomainError("ground set must be non-empty");
}

double RankOracle::rank(const Subset& subset) const {
    Subset s = subset;
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    for (int i : s)
        if (i < 0 || i >= n_) throw DomainError("unknown agent id " + std::to_string(i));
    if (s.empty()) return 0.0;
    if (n_ > 32) return eval(s);
    std::uint64_t key = subset_to_mask(s);
    {
        std::shared_lock lock(mu_);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
    }
    double v = eval(s);
    std::unique_lock lock(mu_);
    memo_.emplace(key, v);
    return v;
}

double RankOracle::rank_mask(std::uint64_t mask) const { return rank(mask_to_subset(mask, std::min(n_, 64))); }

std::unique_ptr<GreedyState> RankOracle::start() const { return std::make_unique<GenericState>(*this); }

// ---- explicit -------------------------------------------------------------

ExplicitOracle::ExplicitOracle(int n, std::vector<double> table) : RankOracle(n), table_(std::move(table)) {
    if (n > 24) throw DomainError("explicit table limited to 24 agents");
    if (table_.size() != (std::size_t{1} << n)) throw DomainError("table size must be 2^n");
}

double ExplicitOracle::eval(const Subset& s) const { return table_[subset_to_mask(s)]; }

std::string ExplicitOracle::digest_material() const {
    std::string out = "explicit:" + std::to_string(size());
    for (double v : table_) out += ":" + fmt_double(v);
    return out;
}

OraclePtr explicit_oracle(int n, std::vector<double> table) {
    return std::make_shared<ExplicitOracle>(n, std::move(table));
}

// ---- tree -----------------------------------------------------------------

TreeOracle::TreeOracle(CapacityDag dag) : RankOracle(dag.num_agents()), dag_(std::move(dag)) {
    dag_.validate();
    if (!dag_.is_in_tree()) throw StructureError("not an in-tree");
    parent_.assign(dag_.num_nodes(), -1);
    for (auto [u, v] : dag_.edges) parent_[u] = v;
    depth_.assign(dag_.num_nodes(), 0);
    auto order = dag_.topological_order();
    for (int v : order | std::views::reverse)
        if (parent_[v] >= 0) depth_[v] = depth_[parent_[v]] + 1;
}

double TreeOracle::eval(const Subset& s) const {
    // Only nodes on agent-to-root paths can carry flow.
    std::unordered_map<int, double> fin;
    std::unordered_map<int, int> infkids;
    std::unordered_map<int, char> hit;
    std::vector<int> nodes;
    for (int a : s) {
        int v = dag_.leaves[a];
        hit[v] = 1;
        for (int u = v; u >= 0; u = parent_[u]) {
            if (fin.count(u)) break;
            fin[u] = 0.0;
            infkids[u] = 0;
            nodes.push_back(u);
        }
    }
    std::sort(nodes.begin(), nodes.end(), [&](int a, int b) { return depth_[a] > depth_[b]; });
    double root_out = 0.0;
    for (int v : nodes) {
        double in = (hit.count(v) || infkids[v] > 0) ? kInf : fin[v];
        double out = std::min(dag_.cap[v], in);
        int p = parent_[v];
        if (p < 0) {
            root_out = out;
            continue;
        }
        if (std::isinf(out))
            ++infkids[p];
        else
            fin[p] += out;
    }
    return root_out;
}

class TreeState : public GreedyState {
public:
    explicit TreeState(const TreeOracle& t)
        : t_(t),
          fin_(t.dag_.num_nodes(), 0.0),
          infkids_(t.dag_.num_nodes(), 0),
          agents_(t.dag_.num_nodes(), 0),
          out_(t.dag_.num_nodes(), 0.0) {}

    double value() const override { return out_[t_.dag_.sink]; }

    double probe(int agent) const override {
        int v = t_.dag_.leaves[agent];
        if (agents_[v] > 0) return value();
        double old = out_[v];
        double now = t_.dag_.cap[v];
        while (true) {
            if (now == old) return value();
            int p = t_.parent_[v];
            if (p < 0) return now;
            double fin = fin_[p];
            int inf = infkids_[p];
            if (std::isinf(old)) --inf; else fin -= old;
            if (std::isinf(now)) ++inf; else fin += now;
            double in = (agents_[p] > 0 || inf > 0) ? kInf : fin;
            old = out_[p];
            now = std::min(t_.dag_.cap[p], in);
            v = p;
        }
    }

    void add(int agent) override {
        int v = t_.dag_.leaves[agent];
        if (agents_[v]++ > 0) return;
        double now = t_.dag_.cap[v];
        while (true) {
            double old = out_[v];
            if (now == old) return;
            out_[v] = now;
            int p = t_.parent_[v];
            if (p < 0) return;
            if (std::isinf(old)) --infkids_[p]; else fin_[p] -= old;
            if (std::isinf(now)) ++infkids_[p]; else fin_[p] += now;
            double in = (agents_[p] > 0 || infkids_[p] > 0) ? kInf : fin_[p];
            now = std::min(t_.dag_.cap[p], in);
            v = p;
        }
    }

    std::unique_ptr<GreedyState> clone() const override { return std::make_unique<TreeState>(*this); }

private:
    const TreeOracle& t_;
    std::vector<double> fin_;
    std::vector<int> infkids_;
    std::vector<int> agents_;
    std::vector<double> out_;
};

std::unique_ptr<GreedyState> TreeOracle::start() const { return std::make_unique<TreeState>(*this); }

std::string TreeOracle::digest_material() const { return "tree_cut:" + to_json(dag_).dump(); }

// ---- max-flow -------------------------------------------------------------

namespace {

struct SplitNetwork {
    FlowNetwork net;
    std::vector<int> agent_arc;
    int s = 0, t = 0;
};

// v_in = 2v, v_out = 2v+1, source = 2N; agents start closed.
SplitNetwork build_split(const CapacityDag& dag) {
    const int n = dag.num_nodes();
    SplitNetwork sn{FlowNetwork(2 * n + 1), {}, 2 * n, 2 * dag.sink + 1};
    for (int v = 0; v < n; ++v) sn.net.add_edge(2 * v, 2 * v + 1, dag.cap[v]);
    for (auto [u, v] : dag.edges) sn.net.add_edge(2 * u + 1, 2 * v, kInf);
    for (int leaf : dag.leaves) sn.agent_arc.push_back(sn.net.add_edge(sn.s, 2 * leaf, 0.0));
    return sn;
}

}  // namespace

double dag_maxflow(const CapacityDag& dag, const Subset& agents) {
    if (agents.empty()) return 0.0;
    SplitNetwork sn = build_split(dag);
    for (int a : agents) sn.net.set_capacity(sn.agent_arc.at(a), kInf);
    return sn.net.augment(sn.s, sn.t);
}

MaxflowOracle::MaxflowOracle(CapacityDag dag) : RankOracle(dag.num_agents()), dag_(std::move(dag)) {
    dag_.validate();
}

double MaxflowOracle::eval(const Subset& s) const { return dag_maxflow(dag_, s); }

class FlowState : public GreedyState {
public:
    explicit FlowState(const MaxflowOracle& f) : sn_(build_split(f.dag_)), open_(f.size(), 0) {}
    double value() const override { return value_; }
    // The probed network is kept so that adding the same agent next is free.
    double probe(int agent) const override {
        if (open_[agent]) return value_;
        if (probed_ != agent) {
            scratch_ = sn_;
            scratch_.net.set_capacity(scratch_.agent_arc[agent], kInf);
            gain_ = scratch_.net.augment(scratch_.s, scratch_.t);
            probed_ = agent;
        }
        return value_ + gain_;
    }
    void add(int agent) override {
        if (open_[agent]) return;
        open_[agent] = 1;
        if (probed_ == agent) {
            std::swap(sn_, scratch_);
            value_ += gain_;
        } else {
            sn_.net.set_capacity(sn_.agent_arc[agent], kInf);
            value_ += sn_.net.augment(sn_.s, sn_.t);
        }
        probed_ = -1;
    }
    std::unique_ptr<GreedyState> clone() const override { return std::make_unique<FlowState>(*this); }
    FlowState(const FlowState& o) : GreedyState(), sn_(o.sn_), open_(o.open_), value_(o.value_) {}

private:
    SplitNetwork sn_;
    std::vector<char> open_;
    double value_ = 0.0;
    mutable SplitNetwork scratch_;
    mutable int probed_ = -1;
    mutable double gain_ = 0.0;
};

std::unique_ptr<GreedyState> MaxflowOracle::start() const { return std::make_unique<FlowState>(*this); }

std::string MaxflowOracle::digest_material() const { return "maxflow:" + to_json(dag_).dump(); }

// ---- clone / scaled -------------------------------------------------------

namespace {

class MappedState : public GreedyState {
public:
    MappedState(std::unique_ptr<GreedyState> base, int phantom, int target, double factor)
        : base_(std::move(base)), phantom_(phantom), target_(target), factor_(factor) {}
    double value() const override { return factor_ * base_->value(); }
    double probe(int agent) const override { return factor_ * base_->probe(map(agent)); }
    void add(int agent) override { base_->add(map(agent)); }
    std::unique_ptr<GreedyState> clone() const override {
        return std::make_unique<MappedState>(base_->clone(), phantom_, target_, factor_);
    }

private:
    int map(int a) const { return a == phantom_ ? target_ : a; }
    std::unique_ptr<GreedyState> base_;
    int phantom_, target_;
    double factor_;
};

}  // namespace

CloneOracle::CloneOracle(OraclePtr base, int target)
    : RankOracle(base->size() + 1), base_(std::move(base)), target_(target) {
    if (target_ < 0 || target_ >= base_->size()) throw DomainError("clone target out of range");
}

double CloneOracle::eval(const Subset& s) const {
    Subset mapped;
    mapped.reserve(s.size());
    for (int a : s) mapped.push_back(a == size() - 1 ? target_ : a);
    return base_->rank(mapped);
}

std::unique_ptr<GreedyState> CloneOracle::start() const {
    return std::make_unique<MappedState>(base_->start(), size() - 1, target_, 1.0);
}

std::string CloneOracle::digest_material() const {
    return "clone:" + std::to_string(target_) + ":" + base_->digest_material();
}

ScaledOracle::ScaledOracle(OraclePtr base, double factor)
    : RankOracle(base->size()), base_(std::move(base)), factor_(factor) {
    if (!(factor_ >= 0)) throw DomainError("scale factor must be non-negative");
}

double ScaledOracle::eval(const Subset& s) const { return factor_ * base_->rank(s); }

std::unique_ptr<GreedyState> ScaledOracle::start() const {
    return std::make_unique<MappedState>(base_->start(), -1, -1, factor_);
}

std::string ScaledOracle::digest_material() const {
    return "scaled:" + fmt_double(factor_) + ":" + base_->digest_material();
}

// ---- factory --------------------------------------------------------------

OraclePtr make_oracle(const CapacityDag& dag, Evaluator ev) {
    dag.validate();
    switch (ev) {
        case Evaluator::tree_cut: return std::make_shared<TreeOracle>(dag);
        case Evaluator::sp_compositional: {
            auto sp = SpOracle::recognize(dag);
            if (!sp) throw StructureError("graph is not series-parallel");
            return sp;
        }
        case Evaluator::maxflow: return std::make_shared<MaxflowOracle>(dag);
        case Evaluator::automatic: break;
    }
    if (dag.is_in_tree()) return std::make_shared<TreeOracle>(dag);
    if (auto sp = SpOracle::recognize(dag)) return sp;
    return std::make_shared<MaxflowOracle>(dag);
}

OraclePtr with_entrant(const RankOracle& f, int target, double cap) {
    const CapacityDag* base = f.dag();
    if (!base) throw DomainError("an entrant needs a network-backed oracle");
    if (target < 0 || target >= f.size()) throw DomainError("entrant target out of range");
    if (!(cap >= 0)) throw DomainError("entrant capacity must be non-negative");
    CapacityDag d = *base;
    const int at = d.leaves[target];
    const int node = static_cast<int>(d.cap.size());
    d.cap.push_back(cap);
    if (at == d.sink) {
        d.edges.emplace_back(node, at);
    } else {
        for (const auto& [u, v] : base->edges)
            if (u == at) d.edges.emplace_back(node, v);
    }
    d.leaves.push_back(node);
    // Trees stay trees; anything else is evaluated by max-flow rather than
    // re-running series-parallel recognition for every entrant.
    return make_oracle(d, f.evaluator() == "tree_cut" ? Evaluator::automatic : Evaluator::maxflow);
}

}  // namespace polycred
