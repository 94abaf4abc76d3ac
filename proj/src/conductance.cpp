#include "spectro/conductance.hpp"

#include <algorithm>
#include <cmath>

#include "spectro/errors.hpp"

namespace spectro {

double conductance(const WeightedGraph& g, const std::vector<uint32_t>& members,
                   const NodeMask& mask) {
    if (members.empty()) throw DomainError("conductance: empty set");
    std::vector<uint8_t> in_set(g.node_count, 0);
    size_t active_members = 0;
    for (uint32_t u : members) {
        if (u >= g.node_count) throw DomainError("conductance: node id out of range");
        if (!mask.active[u]) continue;
        if (!in_set[u]) {
            in_set[u] = 1;
            ++active_members;
        }
    }
    if (active_members == 0) throw DomainError("conductance: empty set");
    if (active_members == mask.active_count) throw DomainError("conductance: full vertex set");

    double cut = 0.0, vol = 0.0;
    for (uint32_t u = 0; u < g.node_count; ++u) {
        if (!in_set[u] || !mask.active[u]) continue;
        vol += mask.degree[u];
        const auto a = g.adj(u);
        for (size_t t = 0; t < a.count; ++t) {
            const uint32_t v = a.nbr[t];
            if (mask.active[v] && !in_set[v]) cut += a.w[t];
        }
    }
    const double vol_rest = mask.total_volume() - vol;
    const double denom = std::min(vol, vol_rest);
    if (denom <= 0.0) throw DomainError("conductance: a side has zero volume");
    return cut / denom;
}

std::optional<SweepResult> sweep_cut(const WeightedGraph& g, const PPRVector& ranks,
                                     const NodeMask& mask) {
    return sweep_cut(g, ranks, mask, SweepOrder::kRawRank);
}

std::optional<SweepResult> sweep_cut(const WeightedGraph& g, const PPRVector& ranks,
                                     const NodeMask& mask, SweepOrder order) {
    // Active nodes with positive rank, sorted by rank descending, ties by
    // lower node index.
    std::vector<uint32_t> cand;
    cand.reserve(ranks.support.size());
    for (uint32_t u : ranks.support)
        if (mask.active[u] && ranks.p[u] > 0.0) cand.push_back(u);
    if (cand.empty()) return std::nullopt;

    std::vector<double> key(cand.size());
    for (size_t i = 0; i < cand.size(); ++i) {
        const uint32_t u = cand[i];
        key[i] = (order == SweepOrder::kRawRank)
                     ? ranks.p[u]
                     : (mask.degree[u] > 0.0 ? ranks.p[u] / mask.degree[u] : 0.0);
    }
    std::vector<size_t> idx(cand.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
        if (key[a] != key[b]) return key[a] > key[b];
        return cand[a] < cand[b];
    });
    std::vector<uint32_t> ordered(cand.size());
    for (size_t i = 0; i < idx.size(); ++i) ordered[i] = cand[idx[i]];

    const double total_vol = mask.total_volume();
    std::vector<uint8_t> in_set(g.node_count, 0);
    double vol = 0.0, cut = 0.0;
    double best_cond = 0.0;
    size_t best_len = 0;
    bool found = false;

    for (size_t i = 0; i < ordered.size(); ++i) {
        const uint32_t u = ordered[i];
        vol += mask.degree[u];
        double w_in = 0.0;
        const auto a = g.adj(u);
        for (size_t t = 0; t < a.count; ++t) {
            const uint32_t v = a.nbr[t];
            if (mask.active[v] && in_set[v]) w_in += a.w[t];
        }
        cut += mask.degree[u] - 2.0 * w_in;
        in_set[u] = 1;
        // A prefix covering every active node is not a cut at all; the
        // volume test alone cannot exclude it reliably because the running
        // volume sum carries rounding dust.
        if (i + 1 == mask.active_count) continue;
        const double denom = std::min(vol, total_vol - vol);
        if (denom <= 0.0) continue;  // not a proper cut
        const double cond = cut / denom;
        if (!found || cond < best_cond) {
            found = true;
            best_cond = cond;
            best_len = i + 1;
        }
    }
    if (!found) return std::nullopt;

    SweepResult res;
    res.prefix.assign(ordered.begin(), ordered.begin() + best_len);
    res.positive_rank_count = ordered.size();
    res.conductance = best_cond;
    return res;
}

} // namespace spectro
