#pragma once

#include <cstdint>
#include <vector>

#include "spectro/graph.hpp"

namespace spectro {

// Mask over graph nodes plus the degrees of the masked subgraph. Edges with
// a masked endpoint do not exist for PPR, sweeps or conductance; degrees are
// maintained incrementally as nodes are removed.
struct NodeMask {
    std::vector<uint8_t> active;
    std::vector<double> degree;
    uint32_t active_count = 0;

    static NodeMask all(const WeightedGraph& g) {
        NodeMask m;
        m.active.assign(g.node_count, 1);
        m.degree = g.degrees;
        m.active_count = g.node_count;
        return m;
    }

    void remove(const WeightedGraph& g, uint32_t u) {
        if (!active[u]) return;
        active[u] = 0;
        --active_count;
        const auto a = g.adj(u);
        for (size_t t = 0; t < a.count; ++t)
            if (active[a.nbr[t]]) degree[a.nbr[t]] -= a.w[t];
        degree[u] = 0.0;
    }

    double total_volume() const {
        double v = 0.0;
        for (double d : degree) v += d;
        return v;
    }
};

// Approximate personalized PageRank from the push algorithm. At termination
// every active node satisfies r(u) < eps * d(u); p is supported only on
// nodes that were actually pushed.
struct PPRVector {
    std::vector<double> p;
    std::vector<double> r;
    uint32_t seed = 0;
    double alpha = 0.0;
    double eps = 0.0;
    std::vector<uint32_t> support;  // nodes with p > 0, unordered
    size_t push_rounds = 0;

    double mass() const {
        double s = 0.0;
        for (double v : p) s += v;
        for (double v : r) s += v;
        return s;
    }
};

// Production kernel: classic queue-driven single-node pushes. Does only the
// work the residuals demand, which makes it the fastest option at small
// thread counts; fully deterministic.
PPRVector push_ppr(const WeightedGraph& g, uint32_t seed, double alpha, double eps,
                   const NodeMask& mask);

// Synchronous batched push: all above-threshold nodes push simultaneously
// each round; receivers gather contributions over their own fixed-order
// adjacency, so results are bit-identical for any thread count.
// OpenMP-parallel over the frontier; wins only with many cores (see the
// benchmark), but satisfies the identical contract and is checked against
// the same oracles.
PPRVector sync_push_ppr(const WeightedGraph& g, uint32_t seed, double alpha, double eps,
                        const NodeMask& mask);

namespace serial {
// Alias kept for the benchmark and oracle tests: the queue kernel is the
// serial reference implementation.
PPRVector push_ppr(const WeightedGraph& g, uint32_t seed, double alpha, double eps,
                   const NodeMask& mask);
} // namespace serial

} // namespace spectro
