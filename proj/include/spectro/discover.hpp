#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spectro/conductance.hpp"
#include "spectro/graph.hpp"
#include "spectro/ppr.hpp"

namespace spectro {

// Defaults are the published clustering parameter table, exactly.
struct ClusterRunParams {
    size_t k = 45;
    double alpha = 0.001;
    double eps = 1e-7;
    double main_body_threshold = 0.99;
    size_t min_cluster_size = 20;
    double termination_fraction = 0.001;
    uint64_t rng_seed = 0;
    SweepOrder sweep_order = SweepOrder::kRawRank;

    void validate() const;
};

struct Cluster {
    std::vector<uint32_t> members;
    double conductance = 0.0;
    uint32_t seed = 0;
    size_t iteration = 0;  // discovery round that produced it
};

// Iterative conductance-based clustering: sample an unvisited seed, push
// PPR on the unvisited subgraph, sweep; reject main bodies (best prefix
// covering > threshold of the positive-rank set) and isolated seeds
// (prefix below the minimum size), otherwise emit the prefix as a cluster.
// Every branch shrinks the unvisited set, so at most n iterations run.
std::vector<Cluster> iterative_discover(const WeightedGraph& g, const ClusterRunParams& params);

// Conductance of each cluster's member set in a foreign graph with aligned
// node ids (same row ordering).
std::vector<double> cross_conductance(const WeightedGraph& g_other,
                                      const std::vector<Cluster>& clusters);

// clusters.json round trip: array of {id, seed, iteration, conductance,
// member_row_ids}.
void save_clusters(const std::string& path, const std::vector<Cluster>& clusters);
std::vector<Cluster> load_clusters(const std::string& path);

} // namespace spectro
