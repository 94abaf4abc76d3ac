#include <cmath>

#include "doctest.h"
#include "spectro/errors.hpp"
#include "spectro/graph.hpp"
#include "spectro/ppr.hpp"
#include "spectro/rng.hpp"

using namespace spectro;

namespace {

// Random connected-ish weighted graph for oracle comparisons.
WeightedGraph random_graph(uint32_t n, double edge_prob, uint64_t seed) {
    Rng rng(seed);
    std::vector<std::pair<uint32_t, uint32_t>> edges;
    std::vector<double> ws;
    for (uint32_t u = 0; u < n; ++u) {
        // a ring so the graph is connected
        const uint32_t v = (u + 1) % n;
        edges.emplace_back(std::min(u, v), std::max(u, v));
        ws.push_back(0.25 + rng.next_double());
    }
    for (uint32_t u = 0; u < n; ++u)
        for (uint32_t v = u + 2; v < n; ++v)
            if (rng.next_double() < edge_prob) {
                edges.emplace_back(u, v);
                ws.push_back(0.25 + rng.next_double());
            }
    WeightedGraph g;
    g.node_count = n;
    std::vector<uint32_t> cnt(n, 0);
    for (auto& [u, v] : edges) {
        ++cnt[u];
        ++cnt[v];
    }
    g.offsets.assign(n + 1, 0);
    for (uint32_t u = 0; u < n; ++u) g.offsets[u + 1] = g.offsets[u] + cnt[u];
    g.neighbors.assign(g.offsets[n], 0);
    g.weights.assign(g.offsets[n], 0.0);
    std::vector<uint64_t> cur(g.offsets.begin(), g.offsets.end() - 1);
    for (size_t e = 0; e < edges.size(); ++e) {
        const auto [u, v] = edges[e];
        g.neighbors[cur[u]] = v;
        g.weights[cur[u]++] = ws[e];
        g.neighbors[cur[v]] = u;
        g.weights[cur[v]++] = ws[e];
    }
    g.degrees.assign(n, 0.0);
    for (uint32_t u = 0; u < n; ++u) {
        double s = 0.0;
        for (uint64_t t = g.offsets[u]; t < g.offsets[u + 1]; ++t) s += g.weights[t];
        g.degrees[u] = s;
        // neighbor lists must be sorted for edge_weight
        std::vector<std::pair<uint32_t, double>> adj;
        for (uint64_t t = g.offsets[u]; t < g.offsets[u + 1]; ++t)
            adj.emplace_back(g.neighbors[t], g.weights[t]);
        std::sort(adj.begin(), adj.end());
        size_t t = g.offsets[u];
        for (auto& [vv, ww] : adj) {
            g.neighbors[t] = vv;
            g.weights[t++] = ww;
        }
    }
    return g;
}

// Dense exact PPR by power iteration on the masked walk matrix:
// pi = alpha e_s + (1 - alpha) W D^-1 pi.
std::vector<double> exact_ppr(const WeightedGraph& g, const NodeMask& mask, uint32_t seed,
                              double alpha, size_t iters = 200000, double tol = 1e-15) {
    const uint32_t n = g.node_count;
    std::vector<double> pi(n, 0.0), nxt(n, 0.0);
    pi[seed] = 1.0;
    for (size_t it = 0; it < iters; ++it) {
        std::fill(nxt.begin(), nxt.end(), 0.0);
        nxt[seed] += alpha;
        for (uint32_t u = 0; u < n; ++u) {
            if (!mask.active[u] || pi[u] == 0.0 || mask.degree[u] <= 0.0) continue;
            const double share = (1.0 - alpha) * pi[u] / mask.degree[u];
            const auto a = g.adj(u);
            for (size_t t = 0; t < a.count; ++t)
                if (mask.active[a.nbr[t]]) nxt[a.nbr[t]] += share * a.w[t];
        }
        double diff = 0.0;
        for (uint32_t u = 0; u < n; ++u) diff = std::max(diff, std::fabs(nxt[u] - pi[u]));
        pi.swap(nxt);
        if (diff < tol) break;
    }
    return pi;
}

} // namespace

TEST_CASE("isolated seed is a point mass") {
    WeightedGraph g;
    g.node_count = 3;
    g.offsets = {0, 0, 0, 0};
    g.degrees = {0.0, 0.0, 0.0};
    auto mask = NodeMask::all(g);
    auto p = push_ppr(g, 1, 0.001, 1e-9, mask);
    CHECK(p.p[1] == 1.0);
    CHECK(p.p[0] == 0.0);
    CHECK(p.p[2] == 0.0);
    CHECK(p.support == std::vector<uint32_t>{1});
}

TEST_CASE("two-node graph matches the dense oracle to 1e-6") {
    WeightedGraph g;
    g.node_count = 2;
    g.offsets = {0, 1, 2};
    g.neighbors = {1, 0};
    g.weights = {0.7, 0.7};
    g.degrees = {0.7, 0.7};
    auto mask = NodeMask::all(g);
    auto push = push_ppr(g, 1, 0.001, 1e-9, mask);
    auto exact = exact_ppr(g, mask, 1, 0.001);
    for (uint32_t u = 0; u < 2; ++u) CHECK(std::fabs(push.p[u] - exact[u]) <= 1e-6);
}

TEST_CASE("push invariants and oracle bound on random graphs") {
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        auto g = random_graph(200, 0.02, seed);
        auto mask = NodeMask::all(g);
        const double alpha = 0.05, eps = 1e-7;
        auto push = push_ppr(g, 7, alpha, eps, mask);

        // Residual stopping rule.
        for (uint32_t u = 0; u < g.node_count; ++u) CHECK(push.r[u] < eps * mask.degree[u]);
        // Mass conservation.
        CHECK(std::fabs(push.mass() - 1.0) <= 1e-9);
        // p is a lower bound on the exact PPR.
        auto exact = exact_ppr(g, mask, 7, alpha);
        for (uint32_t u = 0; u < g.node_count; ++u) CHECK(push.p[u] <= exact[u] + 1e-9);
    }
}

TEST_CASE("synchronous batch push satisfies the same invariants") {
    auto g = random_graph(150, 0.03, 11);
    auto mask = NodeMask::all(g);
    const double alpha = 0.02, eps = 1e-6;
    auto push = sync_push_ppr(g, 3, alpha, eps, mask);
    for (uint32_t u = 0; u < g.node_count; ++u) CHECK(push.r[u] < eps * mask.degree[u]);
    CHECK(std::fabs(push.mass() - 1.0) <= 1e-9);
    auto exact = exact_ppr(g, mask, 3, alpha);
    for (uint32_t u = 0; u < g.node_count; ++u) CHECK(push.p[u] <= exact[u] + 1e-9);
}

TEST_CASE("masked nodes are never touched") {
    auto g = random_graph(60, 0.05, 4);
    auto mask = NodeMask::all(g);
    for (uint32_t u = 0; u < 20; ++u) mask.remove(g, u);
    auto push = push_ppr(g, 30, 0.01, 1e-8, mask);
    for (uint32_t u = 0; u < 20; ++u) {
        CHECK(push.p[u] == 0.0);
        CHECK(push.r[u] == 0.0);
    }
    // Mass still conserved on the masked subgraph.
    CHECK(std::fabs(push.mass() - 1.0) <= 1e-9);
}

TEST_CASE("mask bookkeeping stays consistent with recomputation") {
    auto g = random_graph(80, 0.05, 9);
    auto mask = NodeMask::all(g);
    Rng rng(5);
    for (int i = 0; i < 30; ++i) mask.remove(g, static_cast<uint32_t>(rng.next_below(80)));
    for (uint32_t u = 0; u < g.node_count; ++u) {
        double expect = 0.0;
        if (mask.active[u]) {
            const auto a = g.adj(u);
            for (size_t t = 0; t < a.count; ++t)
                if (mask.active[a.nbr[t]]) expect += a.w[t];
        }
        CHECK(std::fabs(mask.degree[u] - expect) <= 1e-12);
    }
}

TEST_CASE("bad arguments are rejected") {
    auto g = random_graph(10, 0.2, 2);
    auto mask = NodeMask::all(g);
    CHECK_THROWS_AS(push_ppr(g, 99, 0.01, 1e-6, mask), DomainError);
    CHECK_THROWS_AS(push_ppr(g, 0, 0.0, 1e-6, mask), DomainError);
    CHECK_THROWS_AS(push_ppr(g, 0, 1.5, 1e-6, mask), DomainError);
    CHECK_THROWS_AS(push_ppr(g, 0, 0.01, 0.0, mask), DomainError);
}
