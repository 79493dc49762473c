#pragma once

#include <vector>

namespace polycred {

// Dinic max-flow on real capacities. Capacities at or above kFlowInf are
// treated as unbounded; flows that large are reported as infinity.
class FlowNetwork {
public:
    static constexpr double kFlowInf = 1e15;

    explicit FlowNetwork(int n = 0);

    int add_node();
    // Returns the edge handle (index of the forward arc).
    int add_edge(int u, int v, double cap);
    // Raise or lower the capacity of a forward arc, keeping the current flow.
    // Lowering below the current flow is not supported.
    void set_capacity(int e, double cap);
    double flow_on(int e) const;

    // Augments from the current residual state and returns the added flow.
    double augment(int s, int t);

    // Nodes reachable from s in the residual graph (valid after augment).
    std::vector<char> residual_reachable(int s) const;

    int size() const { return static_cast<int>(head_.size()); }

private:
    struct Arc {
        int to;
        int next;
        double cap;   // residual capacity
        double orig;  // capacity as set
    };
    bool bfs(int s, int t);
    double dfs(int u, int t, double pushed);

    std::vector<int> head_;
    std::vector<Arc> arcs_;
    std::vector<int> level_;
    std::vector<int> iter_;
    std::vector<int> queue_;
};

}  // namespace polycred
