#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spectro/matrix.hpp"

namespace spectro {

// Symmetric weighted graph in CSR form. Every undirected edge {u,v} is
// stored once per endpoint with the identical weight value, so
// w(u,v) == w(v,u) holds exactly by representation.
struct WeightedGraph {
    uint32_t node_count = 0;
    std::vector<uint64_t> offsets;      // node_count + 1
    std::vector<uint32_t> neighbors;    // sorted per node
    std::vector<double> weights;
    std::vector<double> degrees;        // row sums

    size_t edge_count() const { return neighbors.size() / 2; }
    double volume() const;

    struct Adjacency {
        const uint32_t* nbr;
        const double* w;
        size_t count;
    };
    Adjacency adj(uint32_t u) const {
        return {neighbors.data() + offsets[u], weights.data() + offsets[u],
                static_cast<size_t>(offsets[u + 1] - offsets[u])};
    }

    // Weight of edge {u,v}, 0 if absent (binary search over sorted neighbors).
    double edge_weight(uint32_t u, uint32_t v) const;
};

struct KnnResult {
    std::vector<std::vector<uint32_t>> neighbors;  // k per point, ascending distance
    std::vector<double> sigma;                     // distance to the k-th neighbor
    size_t floored_count = 0;                      // sigmas floored at 1e-12
};

// Exact brute-force k-nearest neighbors by Euclidean distance, excluding the
// point itself. Ties broken by lower index. OpenMP-parallel over query blocks.
KnnResult knn(const Matrix& points, size_t k);

// Self-tuning weights w(u,v) = exp(-d2(u,v) / (sigma_u * sigma_v)) on the
// union-symmetrized k-NN relation.
WeightedGraph build_graph(const KnnResult& nn, const Matrix& points);

WeightedGraph knn_graph(const Matrix& points, size_t k);

// "SGPH" cache file: magic, u32 version, u64 n, then per node u32 count and
// (u32 neighbor, f32 weight) pairs.
void save_graph(const std::string& path, const WeightedGraph& g);
WeightedGraph load_graph(const std::string& path);

namespace serial {
// Reference implementation used as the oracle in tests and the baseline in
// benchmarks: full distance sort per point, single thread.
KnnResult knn(const Matrix& points, size_t k);
} // namespace serial

} // namespace spectro
