#include <cmath>
#include <tuple>
#include <set>

#include "doctest.h"
#include "spectro/discover.hpp"
#include "spectro/errors.hpp"
#include "spectro/graph.hpp"
#include "spectro/rng.hpp"

using namespace spectro;

namespace {

WeightedGraph two_cliques_bridge(uint32_t sz) {
    std::vector<std::tuple<uint32_t, uint32_t, double>> es;
    for (uint32_t u = 0; u < sz; ++u)
        for (uint32_t v = u + 1; v < sz; ++v) es.emplace_back(u, v, 1.0);
    for (uint32_t u = sz; u < 2 * sz; ++u)
        for (uint32_t v = u + 1; v < 2 * sz; ++v) es.emplace_back(u, v, 1.0);
    es.emplace_back(0, sz, 1.0);
    WeightedGraph g;
    g.node_count = 2 * sz;
    std::vector<uint32_t> cnt(2 * sz, 0);
    for (const auto& [u, v, w] : es) {
        ++cnt[u];
        ++cnt[v];
    }
    g.offsets.assign(2 * sz + 1, 0);
    for (uint32_t u = 0; u < 2 * sz; ++u) g.offsets[u + 1] = g.offsets[u] + cnt[u];
    g.neighbors.assign(g.offsets[2 * sz], 0);
    g.weights.assign(g.offsets[2 * sz], 0.0);
    std::vector<uint64_t> cur(g.offsets.begin(), g.offsets.end() - 1);
    for (const auto& [u, v, w] : es) {
        g.neighbors[cur[u]] = v;
        g.weights[cur[u]++] = w;
        g.neighbors[cur[v]] = u;
        g.weights[cur[v]++] = w;
    }
    g.degrees.assign(2 * sz, 0.0);
    for (uint32_t u = 0; u < 2 * sz; ++u) {
        std::vector<std::pair<uint32_t, double>> adj;
        for (uint64_t t = g.offsets[u]; t < g.offsets[u + 1]; ++t)
            adj.emplace_back(g.neighbors[t], g.weights[t]);
        std::sort(adj.begin(), adj.end());
        size_t t = g.offsets[u];
        double s = 0.0;
        for (auto& [vv, ww] : adj) {
            g.neighbors[t] = vv;
            g.weights[t++] = ww;
            s += ww;
        }
        g.degrees[u] = s;
    }
    return g;
}

} // namespace

TEST_CASE("first discovered cluster on two bridged cliques is one whole clique") {
    auto g = two_cliques_bridge(20);
    ClusterRunParams params;
    params.min_cluster_size = 20;
    params.eps = 1e-10;
    params.alpha = 0.01;
    params.rng_seed = 7;

    auto clusters = iterative_discover(g, params);
    REQUIRE(clusters.size() >= 1);
    // The first cluster is exactly one of the cliques. The remaining clique
    // becomes the final connected component and the sweep over it has no
    // proper low-conductance prefix of admissible size, so it is rejected
    // rather than emitted (masked-subgraph volume semantics).
    const auto& first = clusters.front();
    REQUIRE(first.members.size() == 20);
    const bool is_a = first.members.front() < 20;
    for (size_t i = 0; i < 20; ++i)
        CHECK(first.members[i] == (is_a ? i : 20 + i));
    CHECK(first.conductance == doctest::Approx(1.0 / 381.0).epsilon(1e-9));
}

TEST_CASE("emitted clusters are disjoint and never include rejected nodes") {
    auto g = two_cliques_bridge(25);
    ClusterRunParams params;
    params.min_cluster_size = 10;
    params.eps = 1e-10;
    params.alpha = 0.01;
    params.rng_seed = 3;
    auto clusters = iterative_discover(g, params);
    std::set<uint32_t> seen;
    for (const auto& c : clusters) {
        for (uint32_t u : c.members) {
            CHECK(seen.count(u) == 0);
            seen.insert(u);
        }
    }
}

TEST_CASE("fixed seed reproduces the identical cluster list") {
    auto g = two_cliques_bridge(15);
    ClusterRunParams params;
    params.min_cluster_size = 10;
    params.eps = 1e-9;
    params.alpha = 0.02;
    params.rng_seed = 12345;
    auto a = iterative_discover(g, params);
    auto b = iterative_discover(g, params);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].members == b[i].members);
        CHECK(a[i].conductance == b[i].conductance);
        CHECK(a[i].seed == b[i].seed);
        CHECK(a[i].iteration == b[i].iteration);
    }
}

TEST_CASE("cluster conductance matches recomputation on the discovery-time mask") {
    auto g = two_cliques_bridge(20);
    ClusterRunParams params;
    params.eps = 1e-10;
    params.alpha = 0.01;
    params.rng_seed = 1;
    auto clusters = iterative_discover(g, params);
    REQUIRE(!clusters.empty());
    // First cluster was found on the full graph.
    auto mask = NodeMask::all(g);
    CHECK(std::fabs(conductance(g, clusters[0].members, mask) - clusters[0].conductance) <=
          1e-9);
}

TEST_CASE("cross conductance is self-consistent and checks alignment") {
    auto g = two_cliques_bridge(20);
    ClusterRunParams params;
    params.eps = 1e-10;
    params.alpha = 0.01;
    params.rng_seed = 1;
    auto clusters = iterative_discover(g, params);
    REQUIRE(!clusters.empty());
    auto conds = cross_conductance(g, clusters);
    CHECK(std::fabs(conds[0] - clusters[0].conductance) <= 1e-9);

    WeightedGraph tiny = two_cliques_bridge(5);
    CHECK_THROWS_AS(cross_conductance(tiny, clusters), PairingError);
}

TEST_CASE("clusters json round trips") {
    auto g = two_cliques_bridge(20);
    ClusterRunParams params;
    params.eps = 1e-10;
    params.alpha = 0.01;
    params.rng_seed = 9;
    auto clusters = iterative_discover(g, params);
    const std::string path = "/tmp/spectro_test_clusters.json";
    save_clusters(path, clusters);
    auto back = load_clusters(path);
    REQUIRE(back.size() == clusters.size());
    for (size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].members == clusters[i].members);
        CHECK(back[i].seed == clusters[i].seed);
    }
    std::remove(path.c_str());
}

TEST_CASE("parameter validation") {
    ClusterRunParams p;
    p.alpha = 0.0;
    CHECK_THROWS_AS(p.validate(), DomainError);
    p = ClusterRunParams{};
    p.eps = -1.0;
    CHECK_THROWS_AS(p.validate(), DomainError);
    p = ClusterRunParams{};
    p.min_cluster_size = 0;
    CHECK_THROWS_AS(p.validate(), DomainError);
    // Defaults are the published table.
    p = ClusterRunParams{};
    CHECK(p.k == 45);
    CHECK(p.alpha == 0.001);
    CHECK(p.eps == 1e-7);
    CHECK(p.main_body_threshold == 0.99);
    CHECK(p.min_cluster_size == 20);
    CHECK(p.termination_fraction == 0.001);
}
