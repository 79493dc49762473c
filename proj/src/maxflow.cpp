#include "polycred/maxflow.hpp"

#include <algorithm>
#include <limits>

namespace polycred {

namespace {
constexpr double kEps = 1e-12;
}

FlowNetwork::FlowNetwork(int n) : head_(n, -1) {}

int FlowNetwork::add_node() {
    head_.push_back(-1);
    return size() - 1;
}

int FlowNetwork::add_edge(int u, int v, double cap) {
    cap = std::min(cap, kFlowInf);
    int e = static_cast<int>(arcs_.size());
    arcs_.push_back({v, head_[u], cap, cap});
    head_[u] = e;
    arcs_.push_back({u, head_[v], 0.0, 0.0});
    head_[v] = e + 1;
    return e;
}

void FlowNetwork::set_capacity(int e, double cap) {
    cap = std::min(cap, kFlowInf);
    double flow = arcs_[e].orig - arcs_[e].cap;
    arcs_[e].orig = cap;
    arcs_[e].cap = std::max(0.0, cap - flow);
}

double FlowNetwork::flow_on(int e) const { return arcs_[e].orig - arcs_[e].cap; }

bool FlowNetwork::bfs(int s, int t) {
    level_.assign(size(), -1);
    queue_.clear();
    level_[s] = 0;
    queue_.push_back(s);
    for (std::size_t k = 0; k < queue_.size(); ++k) {
        int u = queue_[k];
        for (int e = head_[u]; e != -1; e = arcs_[e].next) {
            if (arcs_[e].cap > kEps && level_[arcs_[e].to] < 0) {
                level_[arcs_[e].to] = level_[u] + 1;
                queue_.push_back(arcs_[e].to);
            }
        }
    }
    return level_[t] >= 0;
}

double FlowNetwork::dfs(int u, int t, double pushed) {
    if (u == t) return pushed;
    for (int& e = iter_[u]; e != -1; e = arcs_[e].next) {
        Arc& a = arcs_[e];
        if (a.cap <= kEps || level_[a.to] != level_[u] + 1) continue;
        double got = dfs(a.to, t, std::min(pushed, a.cap));
        if (got > kEps) {
            a.cap -= got;
            arcs_[e ^ 1].cap += got;
            return got;
        }
    }
    return 0.0;
}

double FlowNetwork::augment(int s, int t) {
    if (s == t) return 0.0;
    double total = 0.0;
    while (bfs(s, t)) {
        iter_ = head_;
        while (true) {
            double f = dfs(s, t, std::numeric_limits<double>::infinity());
            if (f <= kEps) break;
            total += f;
            if (total >= kFlowInf) return std::numeric_limits<double>::infinity();
        }
    }
    return total;
}

std::vector<char> FlowNetwork::residual_reachable(int s) const {
    std::vector<char> seen(size(), 0);
    std::vector<int> stack{s};
    seen[s] = 1;
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int e = head_[u]; e != -1; e = arcs_[e].next) {
            if (arcs_[e].cap > kEps && !seen[arcs_[e].to]) {
                seen[arcs_[e].to] = 1;
                stack.push_back(arcs_[e].to);
            }
        }
    }
    return seen;
}

}  // namespace polycred
