#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace polycred {

using Subset = std::vector<int>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kTol = 1e-9;

enum class TopologyClass { single_edge, series, parallel, tree, sp, general };

std::string to_string(TopologyClass c);
TopologyClass topology_class_from_string(const std::string& s);

// Node-capacitated DAG. Node ids are 0..cap.size()-1; agent a enters the
// network at node leaves[a] and all flow ends at `sink` (whose own capacity
// also binds). kInf marks an unbounded node.
struct CapacityDag {
    std::vector<double> cap;
    std::vector<std::pair<int, int>> edges;
    std::vector<int> leaves;
    int sink = 0;
    TopologyClass cls = TopologyClass::general;

    int num_nodes() const { return static_cast<int>(cap.size()); }
    int num_agents() const { return static_cast<int>(leaves.size()); }

    // Throws StructureError on cycles, bad ids, negative caps, or leaves that
    // cannot reach the sink.
    void validate() const;
    std::vector<int> topological_order() const;
    // True if every non-sink node has exactly one out-edge (an in-tree).
    bool is_in_tree() const;
};

nlohmann::ordered_json to_json(const CapacityDag& dag);
CapacityDag dag_from_json(const nlohmann::json& j);

// Incremental view used by greedy and payment walks: a growing agent set
// with cheap "what if I add one more" probes.
class GreedyState {
public:
    virtual ~GreedyState() = default;
    virtual double value() const = 0;
    virtual double probe(int agent) const = 0;
    // Adding an agent twice is a no-op.
    virtual void add(int agent) = 0;
    virtual std::unique_ptr<GreedyState> clone() const = 0;
};

class RankOracle {
public:
    explicit RankOracle(int n);
    virtual ~RankOracle() = default;

    int size() const { return n_; }
    // f(subset); ids are validated, duplicates ignored.
    double rank(const Subset& subset) const;
    double rank_mask(std::uint64_t mask) const;  // n <= 64
    double singleton(int agent) const { return rank({agent}); }

    virtual std::unique_ptr<GreedyState> start() const;
    virtual std::string evaluator() const = 0;
    // Canonical description used for commitments.
    virtual std::string digest_material() const = 0;
    virtual const CapacityDag* dag() const { return nullptr; }

protected:
    // `s` is sorted, unique and in range.
    virtual double eval(const Subset& s) const = 0;

private:
    int n_;
    mutable std::shared_mutex mu_;
    mutable std::unordered_map<std::uint64_t, double> memo_;
};

using OraclePtr = std::shared_ptr<const RankOracle>;

// Full 2^n value table indexed by bitmask.
class ExplicitOracle : public RankOracle {
public:
    ExplicitOracle(int n, std::vector<double> table);
    std::string evaluator() const override { return "explicit_table"; }
    std::string digest_material() const override;

protected:
    double eval(const Subset& s) const override;

private:
    std::vector<double> table_;
};

// In-tree: in(v) is unbounded when an agent enters at v, otherwise the sum of
// child outflows; out(v) = min(cap(v), in(v)).
class TreeOracle : public RankOracle {
public:
    explicit TreeOracle(CapacityDag dag);
    std::unique_ptr<GreedyState> start() const override;
    std::string evaluator() const override { return "tree_cut"; }
    std::string digest_material() const override;
    const CapacityDag* dag() const override { return &dag_; }

    const std::vector<int>& parent() const { return parent_; }

protected:
    double eval(const Subset& s) const override;

private:
    friend class TreeState;
    CapacityDag dag_;
    std::vector<int> parent_;
    std::vector<int> depth_;
};

// Series-parallel decomposition tree evaluated with series = min and
// parallel = sum. Construction fails if the network is not two-terminal SP.
class SpOracle : public RankOracle {
public:
    struct Term {
        enum Kind { constant, agent, series, parallel } kind;
        double cap = 0.0;
        std::vector<int> agents;  // kind == agent: all agents on this stub
        std::vector<int> kids;
    };

    static std::shared_ptr<SpOracle> recognize(const CapacityDag& dag);

    std::string evaluator() const override { return "sp_compositional"; }
    std::string digest_material() const override;
    const CapacityDag* dag() const override { return &dag_; }
    std::size_t term_count() const { return terms_.size(); }

protected:
    double eval(const Subset& s) const override;

private:
    SpOracle(CapacityDag dag, std::vector<Term> terms, int root);
    double eval_term(int t, const std::vector<char>& in) const;

    CapacityDag dag_;
    std::vector<Term> terms_;
    int root_;
};

class MaxflowOracle : public RankOracle {
public:
    explicit MaxflowOracle(CapacityDag dag);
    std::unique_ptr<GreedyState> start() const override;
    std::string evaluator() const override { return "maxflow"; }
    std::string digest_material() const override;
    const CapacityDag* dag() const override { return &dag_; }

protected:
    double eval(const Subset& s) const override;

private:
    friend class FlowState;
    CapacityDag dag_;
};

// Adds one phantom agent (id n) that enters the network where `target` does.
class CloneOracle : public RankOracle {
public:
    CloneOracle(OraclePtr base, int target);
    std::unique_ptr<GreedyState> start() const override;
    std::string evaluator() const override { return base_->evaluator(); }
    std::string digest_material() const override;
    int target() const { return target_; }

protected:
    double eval(const Subset& s) const override;

private:
    OraclePtr base_;
    int target_;
};

// factor * f(S); models a misreported capacity.
class ScaledOracle : public RankOracle {
public:
    ScaledOracle(OraclePtr base, double factor);
    std::unique_ptr<GreedyState> start() const override;
    std::string evaluator() const override { return base_->evaluator(); }
    std::string digest_material() const override;

protected:
    double eval(const Subset& s) const override;

private:
    OraclePtr base_;
    double factor_;
};

enum class Evaluator { automatic, tree_cut, sp_compositional, maxflow };

// automatic: in-tree -> tree_cut, SP-recognised -> sp_compositional, else maxflow.
OraclePtr make_oracle(const CapacityDag& dag, Evaluator ev = Evaluator::automatic);
OraclePtr explicit_oracle(int n, std::vector<double> table);

// A fresh agent (id n) on its own leaf of capacity `cap`, wired like
// `target`'s leaf. Needs a network-backed oracle.
OraclePtr with_entrant(const RankOracle& f, int target, double cap);

// Raw max-flow of a DAG for an agent subset; no memoization.
double dag_maxflow(const CapacityDag& dag, const Subset& agents);

// ---- analysis -------------------------------------------------------------

struct PairGap {
    int i, j;
    double gamma;
};

struct NonModularityProfile {
    std::vector<PairGap> pairs;  // only gamma > tol
    double Gamma = 0.0;
    int sharing_pair_count = 0;
};

double gamma_ij(const RankOracle& f, int i, int j);
NonModularityProfile nonmodularity_profile(const RankOracle& f);

struct AxiomVerdict {
    bool ok = true;
    std::string axiom;  // normalization | monotonicity | submodularity
    Subset a, b;        // witness
};

// Exhaustive for n <= 12, otherwise `samples` random (A, B) pairs.
AxiomVerdict verify_axioms(const RankOracle& f, int samples = 20000, std::uint64_t seed = 1);

// ---- generators -----------------------------------------------------------

struct TopologyParams {
    int n = 2;
    int d = 1;
    int k = 2;
    int m = 1;
    int h = 1;
    int beta = 2;
    std::uint64_t seed = 1;
};

CapacityDag generate_topology(TopologyClass cls, const TopologyParams& p);

// ---- encapsulation --------------------------------------------------------

struct QuotientGraph {
    std::vector<std::vector<int>> clusters;
    std::vector<double> slice_capacity;
    CapacityDag quotient;
};

// cluster_of[v] is the cluster id of node v (ids 0..K-1, all used).
QuotientGraph encapsulate(const CapacityDag& dag, const std::vector<int>& cluster_of,
                          int samples = 2000, std::uint64_t seed = 1);

// Max-flow through the sub-DAG induced by `nodes`, from its entry nodes to its
// exit nodes.
double slice_maxflow(const CapacityDag& dag, const std::vector<int>& nodes);

// ---- level-1 matroid ------------------------------------------------------

class Level1Matroid {
public:
    Level1Matroid(std::vector<int> capacity, std::vector<std::vector<int>> eligibility);

    int num_agents() const { return static_cast<int>(eligible_.size()); }
    int num_tokens() const;
    const std::vector<int>& capacity() const { return cap_; }
    const std::vector<std::vector<int>>& eligibility() const { return eligible_; }

    // Agents in `s` can be matched to distinct tokens of eligible integrators.
    bool independent(const Subset& s) const;
    int matroid_rank(const Subset& s) const;
    // The same rank as a network: agent leaf (1) -> integrator (c_k) -> sink.
    CapacityDag as_dag() const;
    OraclePtr oracle() const;

private:
    std::vector<int> cap_;
    std::vector<std::vector<int>> eligible_;
};

Level1Matroid level1_matroid(const std::vector<double>& capacities,
                             const std::vector<std::vector<int>>& eligibility);

struct MatroidVerdict {
    bool ok = true;
    std::string axiom;  // empty_set | downward_closure | augmentation
    Subset a, b, augmented;
};

// Exhaustive axiom check of an independence predicate over n <= 20 elements.
template <class Pred>
MatroidVerdict check_matroid_axioms(int n, Pred&& independent);

MatroidVerdict check_matroid(const Level1Matroid& m);

// Compares the partition-matroid prediction with actual feasibility of unit
// allocations in `actual` (a set is feasible iff f(S) = |S|). On mismatch the
// witness is (A \ {x}, {x}) -> A for the smallest A that the matroid admits
// but the network cannot serve.
MatroidVerdict check_level1_encapsulation(const Level1Matroid& m, const RankOracle& actual);

// ---- helpers --------------------------------------------------------------

Subset mask_to_subset(std::uint64_t mask, int n);
std::uint64_t subset_to_mask(const Subset& s);

template <class Pred>
MatroidVerdict check_matroid_axioms(int n, Pred&& independent) {
    MatroidVerdict v;
    const std::uint64_t full = std::uint64_t{1} << n;
    std::vector<char> ind(full);
    for (std::uint64_t m = 0; m < full; ++m) ind[m] = independent(mask_to_subset(m, n)) ? 1 : 0;
    if (!ind[0]) {
        v.ok = false;
        v.axiom = "empty_set";
        return v;
    }
    for (std::uint64_t m = 0; m < full; ++m) {
        if (!ind[m]) continue;
        for (int e = 0; e < n; ++e) {
            if ((m >> e & 1) && !ind[m & ~(std::uint64_t{1} << e)]) {
                v.ok = false;
                v.axiom = "downward_closure";
                v.a = mask_to_subset(m, n);
                v.b = mask_to_subset(m & ~(std::uint64_t{1} << e), n);
                return v;
            }
        }
    }
    for (std::uint64_t a = 0; a < full; ++a) {
        if (!ind[a]) continue;
        int ca = __builtin_popcountll(a);
        for (std::uint64_t b = 0; b < full; ++b) {
            if (!ind[b] || __builtin_popcountll(b) <= ca) continue;
            bool found = false;
            for (int e = 0; e < n && !found; ++e)
                if ((b >> e & 1) && !(a >> e & 1) && ind[a | (std::uint64_t{1} << e)]) found = true;
            if (!found) {
                v.ok = false;
                v.axiom = "augmentation";
                v.a = mask_to_subset(a, n);
                v.b = mask_to_subset(b, n);
                return v;
            }
        }
    }
    return v;
}

}  // namespace polycred
