#include "spectro/ppr.hpp"

#include <deque>

#include "spectro/errors.hpp"

namespace spectro {

namespace {

void check_args(const WeightedGraph& g, uint32_t seed, double alpha, double eps,
                const NodeMask& mask) {
    if (seed >= g.node_count) throw DomainError("ppr: seed out of range");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("ppr: alpha must be in (0,1)");
    if (!(eps > 0.0)) throw DomainError("ppr: eps must be positive");
    if (!mask.active[seed]) throw DomainError("ppr: seed is masked out");
}

} // namespace

PPRVector sync_push_ppr(const WeightedGraph& g, uint32_t seed, double alpha, double eps,
                        const NodeMask& mask) {
    check_args(g, seed, alpha, eps, mask);
    const uint32_t n = g.node_count;

    PPRVector out;
    out.seed = seed;
    out.alpha = alpha;
    out.eps = eps;
    out.p.assign(n, 0.0);
    out.r.assign(n, 0.0);

    // A zero-degree seed only ever teleports to itself.
    if (mask.degree[seed] <= 0.0) {
        out.p[seed] = 1.0;
        out.support.push_back(seed);
        return out;
    }

    out.r[seed] = 1.0;
    std::vector<double> spread(n, 0.0);
    std::vector<uint8_t> hot(n, 0), in_p(n, 0), cand_flag(n, 0);
    std::vector<uint32_t> frontier{seed}, candidates;

    while (!frontier.empty()) {
        ++out.push_rounds;
        // Absorb alpha of each hot residual into p; stage the rest.
        for (uint32_t u : frontier) {
            const double ru = out.r[u];
            out.p[u] += alpha * ru;
            if (!in_p[u]) {
                in_p[u] = 1;
                out.support.push_back(u);
            }
            spread[u] = (1.0 - alpha) * ru / mask.degree[u];
            hot[u] = 1;
        }
        // Candidate receivers: hot nodes and their active neighbors.
        candidates.clear();
        for (uint32_t u : frontier) {
            if (!cand_flag[u]) {
                cand_flag[u] = 1;
                candidates.push_back(u);
            }
            const auto a = g.adj(u);
            for (size_t t = 0; t < a.count; ++t) {
                const uint32_t v = a.nbr[t];
                if (mask.active[v] && !cand_flag[v]) {
                    cand_flag[v] = 1;
                    candidates.push_back(v);
                }
            }
        }
        // Gather phase: each candidate sums incoming mass over its own
        // adjacency in storage order. Deterministic under any thread count.
        std::vector<double> new_r(candidates.size());
#pragma omp parallel for schedule(static)
        for (size_t c = 0; c < candidates.size(); ++c) {
            const uint32_t v = candidates[c];
            double inc = 0.0;
            const auto a = g.adj(v);
            for (size_t t = 0; t < a.count; ++t) {
                const uint32_t u = a.nbr[t];
                if (hot[u]) inc += spread[u] * a.w[t];
            }
            new_r[c] = (hot[v] ? 0.0 : out.r[v]) + inc;
        }
        for (size_t c = 0; c < candidates.size(); ++c) out.r[candidates[c]] = new_r[c];
        // Next frontier; reset flags.
        std::vector<uint32_t> next;
        for (size_t c = 0; c < candidates.size(); ++c) {
            const uint32_t v = candidates[c];
            cand_flag[v] = 0;
            if (mask.degree[v] > 0.0 && out.r[v] >= eps * mask.degree[v]) next.push_back(v);
        }
        for (uint32_t u : frontier) hot[u] = 0;
        frontier = std::move(next);
    }
    return out;
}

namespace serial {

PPRVector push_ppr(const WeightedGraph& g, uint32_t seed, double alpha, double eps,
                   const NodeMask& mask) {
    return spectro::push_ppr(g, seed, alpha, eps, mask);
}

} // namespace serial

PPRVector push_ppr(const WeightedGraph& g, uint32_t seed, double alpha, double eps,
                   const NodeMask& mask) {
    check_args(g, seed, alpha, eps, mask);
    const uint32_t n = g.node_count;

    PPRVector out;
    out.seed = seed;
    out.alpha = alpha;
    out.eps = eps;
    out.p.assign(n, 0.0);
    out.r.assign(n, 0.0);

    if (mask.degree[seed] <= 0.0) {
        out.p[seed] = 1.0;
        out.support.push_back(seed);
        return out;
    }

    out.r[seed] = 1.0;
    std::vector<uint8_t> queued(n, 0), in_p(n, 0);
    std::deque<uint32_t> queue;
    queue.push_back(seed);
    queued[seed] = 1;

    while (!queue.empty()) {
        const uint32_t u = queue.front();
        queue.pop_front();
        queued[u] = 0;
        const double du = mask.degree[u];
        if (du <= 0.0 || out.r[u] < eps * du) continue;
        ++out.push_rounds;
        const double ru = out.r[u];
        out.p[u] += alpha * ru;
        if (!in_p[u]) {
            in_p[u] = 1;
            out.support.push_back(u);
        }
        out.r[u] = 0.0;
        const double share = (1.0 - alpha) * ru / du;
        const auto a = g.adj(u);
        for (size_t t = 0; t < a.count; ++t) {
            const uint32_t v = a.nbr[t];
            if (!mask.active[v]) continue;
            out.r[v] += share * a.w[t];
            if (!queued[v] && mask.degree[v] > 0.0 && out.r[v] >= eps * mask.degree[v]) {
                queued[v] = 1;
                queue.push_back(v);
            }
        }
    }
    return out;
}

} // namespace spectro
