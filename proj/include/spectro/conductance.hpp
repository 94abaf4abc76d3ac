#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "spectro/graph.hpp"
#include "spectro/ppr.hpp"

namespace spectro {

// Cond(S) = w(S, S-bar) / min(vol(S), vol(S-bar)), evaluated on the masked
// subgraph. Throws for empty S or S covering the whole active vertex set.
double conductance(const WeightedGraph& g, const std::vector<uint32_t>& members,
                   const NodeMask& mask);

struct SweepResult {
    std::vector<uint32_t> prefix;  // minimum-conductance prefix, rank order
    double conductance = 0.0;
    size_t positive_rank_count = 0;
};

// Minimum-conductance prefix of active positive-rank nodes ordered by rank
// descending (ties by node index). Prefixes whose smaller side has zero
// volume are not valid cuts and are skipped. Returns nullopt when no valid
// prefix exists (e.g. rank mass confined to zero-degree nodes).
// The returned conductance is recomputed non-incrementally on the chosen
// prefix so it matches conductance() exactly.
std::optional<SweepResult> sweep_cut(const WeightedGraph& g, const PPRVector& ranks,
                                     const NodeMask& mask);

// Rank ordering choice for the sweep; raw p is the default, p/d the
// degree-normalized alternative.
enum class SweepOrder { kRawRank, kDegreeNormalized };
std::optional<SweepResult> sweep_cut(const WeightedGraph& g, const PPRVector& ranks,
                                     const NodeMask& mask, SweepOrder order);

} // namespace spectro
