#pragma once

// Shared test fixtures and brute-force oracles. Nothing here calls into the
// library's own evaluators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "polycred/polymatroid.hpp"

namespace fx {

using polycred::CapacityDag;
using polycred::kInf;

// Two leaves of capacity 2 under a root of capacity 3.
inline CapacityDag worked_example() {
    CapacityDag d;
    d.cap = {3, 2, 2};
    d.edges = {{1, 0}, {2, 0}};
    d.leaves = {1, 2};
    d.sink = 0;
    d.cls = polycred::TopologyClass::tree;
    return d;
}

// Random DAG on `nodes` vertices, sink = last, every vertex reaches the sink.
inline CapacityDag random_dag(std::mt19937_64& rng, int nodes, int agents, int max_cap = 5) {
    CapacityDag d;
    std::uniform_int_distribution<int> cap(0, max_cap);
    std::bernoulli_distribution edge(0.35);
    d.cap.resize(nodes);
    for (auto& c : d.cap) c = cap(rng);
    for (int u = 0; u < nodes - 1; ++u) {
        bool any = false;
        for (int v = u + 1; v < nodes; ++v)
            if (edge(rng)) d.edges.emplace_back(u, v), any = true;
        if (!any) d.edges.emplace_back(u, nodes - 1);
    }
    std::uniform_int_distribution<int> leaf(0, nodes - 2);
    for (int a = 0; a < agents; ++a) d.leaves.push_back(leaf(rng));
    d.sink = nodes - 1;
    d.cls = polycred::TopologyClass::general;
    return d;
}

// Replace every finite capacity with a random integer in [lo, hi].
inline void randomize_caps(CapacityDag& d, std::mt19937_64& rng, int lo, int hi) {
    std::uniform_int_distribution<int> cap(lo, hi);
    for (auto& c : d.cap)
        if (!std::isinf(c)) c = cap(rng);
}

// Random small instance from the tree / SP / entangled families (n <= 6).
inline CapacityDag random_instance(std::mt19937_64& rng, int which, int max_cap = 4) {
    polycred::TopologyParams p;
    p.seed = rng();
    CapacityDag d;
    switch (which % 3) {
        case 0:
            p.beta = 2 + static_cast<int>(rng() % 2);
            p.h = p.beta == 2 ? 1 + static_cast<int>(rng() % 2) : 1;
            d = polycred::generate_topology(polycred::TopologyClass::tree, p);
            break;
        case 1:
            p.n = 2 + static_cast<int>(rng() % 5);
            p.h = 2;
            d = polycred::generate_topology(polycred::TopologyClass::sp, p);
            break;
        default:
            p.n = 3 + static_cast<int>(rng() % 3);
            d = polycred::generate_topology(polycred::TopologyClass::general, p);
            return d;  // keep the witness capacities
    }
    randomize_caps(d, rng, 1, max_cap);
    return d;
}

// Minimum node cut separating the agents' leaves from the sink, by
// enumerating every node subset. Leaves and the sink may themselves be cut.
inline double brute_min_cut(const CapacityDag& d, const std::vector<int>& agents) {
    const int n = d.num_nodes();
    if (agents.empty()) return 0.0;
    double best = kInf;
    for (std::uint64_t cut = 0; cut < (std::uint64_t{1} << n); ++cut) {
        double w = 0.0;
        for (int v = 0; v < n; ++v)
            if (cut >> v & 1) w += d.cap[v];
        if (w >= best) continue;
        std::vector<char> seen(n, 0);
        std::vector<int> stack;
        for (int a : agents) {
            int v = d.leaves[a];
            if (!(cut >> v & 1) && !seen[v]) seen[v] = 1, stack.push_back(v);
        }
        bool reached = false;
        while (!stack.empty() && !reached) {
            int u = stack.back();
            stack.pop_back();
            if (u == d.sink) reached = true;
            for (auto [x, y] : d.edges)
                if (x == u && !(cut >> y & 1) && !seen[y]) seen[y] = 1, stack.push_back(y);
        }
        if (!reached) best = w;
    }
    return best;
}

inline std::vector<int> bits(std::uint64_t m, int n) {
    std::vector<int> s;
    for (int i = 0; i < n; ++i)
        if (m >> i & 1) s.push_back(i);
    return s;
}

// Greedy by descending key, ties to the lower id, using nothing but rank().
inline std::vector<double> plain_greedy(const polycred::RankOracle& f, const std::vector<double>& key,
                                        const std::vector<char>& eligible = {}) {
    const int n = f.size();
    std::vector<int> order;
    for (int i = 0; i < n; ++i)
        if (eligible.empty() || eligible[i]) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return key[a] > key[b]; });
    std::vector<double> x(n, 0.0);
    std::vector<int> served;
    for (int a : order) {
        double before = f.rank(served);
        served.push_back(a);
        x[a] = f.rank(served) - before;
    }
    return x;
}

// Allocation of agent i at own bid z, everything else fixed (bid priority).
inline double alloc_at(const polycred::RankOracle& f, std::vector<double> bids, int i, double z) {
    bids[i] = z;
    return plain_greedy(f, bids)[i];
}

// Integral of a monotone step function over [lo, hi] on a dense grid of
// `points` cells. A cell whose end values agree is constant (monotonicity);
// a cell that jumps is bisected until the jump is pinned to `eps`.
template <class Curve>
inline double quadrature(Curve&& x, double lo, double hi, int points, double eps = 1e-12) {
    auto cell = [&](auto&& self, double a, double b, double xa, double xb) -> double {
        if (xa == xb) return xa * (b - a);
        if (b - a <= eps) return 0.5 * (xa + xb) * (b - a);
        double m = 0.5 * (a + b), xm = x(m);
        return self(self, a, m, xa, xm) + self(self, m, b, xm, xb);
    };
    double h = (hi - lo) / points, sum = 0.0;
    double prev = x(lo);
    for (int k = 0; k < points; ++k) {
        double a = lo + k * h, b = k + 1 == points ? hi : lo + (k + 1) * h;
        double xb = x(b);
        sum += cell(cell, a, b, prev, xb);
        prev = xb;
    }
    return sum;
}

// Max of sum w_i x_i over the polymatroid restricted to a grid of `step`,
// by exhaustive search with a simple bound.
inline double grid_max(const polycred::RankOracle& f, const std::vector<double>& w, double step) {
    const int n = f.size();
    std::vector<double> val(std::size_t{1} << n);
    for (std::uint64_t m = 0; m < val.size(); ++m) val[m] = f.rank_mask(m);
    std::vector<double> x(n, 0.0);
    std::vector<double> tail(n + 1, 0.0);
    for (int i = n - 1; i >= 0; --i) tail[i] = tail[i + 1] + std::max(0.0, w[i]) * val[std::uint64_t{1} << i];
    double best = 0.0;
    auto rec = [&](auto&& self, int k, double acc) -> void {
        if (k == n) {
            best = std::max(best, acc);
            return;
        }
        if (acc + tail[k] <= best + 1e-12) return;
        int steps = static_cast<int>(std::floor(val[std::uint64_t{1} << k] / step + 1e-9));
        for (int s = steps; s >= 0; --s) {
            x[k] = s * step;
            bool ok = true;
            // every subset of {0..k} that contains k
            for (std::uint64_t m = 0; m < (std::uint64_t{1} << k) && ok; ++m) {
                std::uint64_t full = m | (std::uint64_t{1} << k);
                double sum = 0.0;
                for (int j = 0; j <= k; ++j)
                    if (full >> j & 1) sum += x[j];
                if (sum > val[full] + 1e-9) ok = false;
            }
            if (ok) self(self, k + 1, acc + w[k] * x[k]);
        }
        x[k] = 0.0;
    };
    rec(rec, 0, 0.0);
    return best;
}

// Every subset constraint x(S) <= f(S).
inline bool feasible(const polycred::RankOracle& f, const std::vector<double>& x, double tol = 1e-9) {
    const int n = f.size();
    for (std::uint64_t m = 1; m < (std::uint64_t{1} << n); ++m) {
        double sum = 0.0;
        for (int j = 0; j < n; ++j)
            if (m >> j & 1) sum += x[j];
        if (sum > f.rank_mask(m) + tol) return false;
    }
    return true;
}

}  // namespace fx
