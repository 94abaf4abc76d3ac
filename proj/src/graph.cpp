#include "spectro/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "spectro/errors.hpp"

namespace spectro {

namespace {

constexpr double kSigmaFloor = 1e-12;

double dist2(const double* a, const double* b, size_t dim) {
    double s = 0.0;
    for (size_t j = 0; j < dim; ++j) {
        const double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

template <typename T>
void read_le(std::istream& in, T& out) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    out = v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

} // namespace

double WeightedGraph::volume() const {
    double v = 0.0;
    for (double d : degrees) v += d;
    return v;
}

double WeightedGraph::edge_weight(uint32_t u, uint32_t v) const {
    const uint32_t* lo = neighbors.data() + offsets[u];
    const uint32_t* hi = neighbors.data() + offsets[u + 1];
    const uint32_t* it = std::lower_bound(lo, hi, v);
    if (it == hi || *it != v) return 0.0;
    return weights[offsets[u] + static_cast<size_t>(it - lo)];
}

KnnResult knn(const Matrix& points, size_t k) {
    const size_t n = points.rows;
    const size_t dim = points.cols;
    if (n < 2 || k == 0 || k >= n)
        throw DomainError("knn requires 1 <= k < n (k=" + std::to_string(k) +
                          ", n=" + std::to_string(n) + ")");
    for (double v : points.data)
        if (!std::isfinite(v)) throw DataError("knn: non-finite coordinate");

    KnnResult out;
    out.neighbors.assign(n, {});
    out.sigma.assign(n, 0.0);
    size_t floored = 0;

    // Per-query selection of the k smallest (d2, index) pairs via a bounded
    // max-heap. Lexicographic order on (d2, index) makes ties deterministic.
    using Entry = std::pair<double, uint32_t>;
#pragma omp parallel for schedule(dynamic, 16) reduction(+ : floored)
    for (size_t i = 0; i < n; ++i) {
        std::vector<Entry> heap;
        heap.reserve(k + 1);
        const double* pi = points.row(i);
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const Entry e{dist2(pi, points.row(j), dim), static_cast<uint32_t>(j)};
            if (heap.size() < k) {
                heap.push_back(e);
                std::push_heap(heap.begin(), heap.end());
            } else if (e < heap.front()) {
                std::pop_heap(heap.begin(), heap.end());
                heap.back() = e;
                std::push_heap(heap.begin(), heap.end());
            }
        }
        std::sort_heap(heap.begin(), heap.end());
        auto& lst = out.neighbors[i];
        lst.reserve(k);
        for (const auto& e : heap) lst.push_back(e.second);
        double sig = std::sqrt(heap.back().first);
        if (sig < kSigmaFloor) {
            sig = kSigmaFloor;
            ++floored;
        }
        out.sigma[i] = sig;
    }
    out.floored_count = floored;
    return out;
}

namespace serial {

KnnResult knn(const Matrix& points, size_t k) {
    const size_t n = points.rows;
    const size_t dim = points.cols;
    if (n < 2 || k == 0 || k >= n) throw DomainError("knn requires 1 <= k < n");

    KnnResult out;
    out.neighbors.assign(n, {});
    out.sigma.assign(n, 0.0);
    std::vector<std::pair<double, uint32_t>> all(n - 1);
    for (size_t i = 0; i < n; ++i) {
        size_t m = 0;
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            all[m++] = {dist2(points.row(i), points.row(j), dim), static_cast<uint32_t>(j)};
        }
        std::sort(all.begin(), all.end());
        auto& lst = out.neighbors[i];
        lst.reserve(k);
        for (size_t t = 0; t < k; ++t) lst.push_back(all[t].second);
        double sig = std::sqrt(all[k - 1].first);
        if (sig < kSigmaFloor) {
            sig = kSigmaFloor;
            ++out.floored_count;
        }
        out.sigma[i] = sig;
    }
    return out;
}

} // namespace serial

WeightedGraph build_graph(const KnnResult& nn, const Matrix& points) {
    const size_t n = points.rows;
    const size_t dim = points.cols;

    // Union symmetrization: an undirected edge exists when either endpoint
    // lists the other. Weight computed once per edge.
    std::vector<std::pair<uint32_t, uint32_t>> edges;
    edges.reserve(n * nn.neighbors[0].size());
    for (size_t u = 0; u < n; ++u)
        for (uint32_t v : nn.neighbors[u])
            edges.emplace_back(std::min<uint32_t>(u, v), std::max<uint32_t>(u, v));
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    std::vector<double> ew(edges.size());
#pragma omp parallel for schedule(static)
    for (size_t e = 0; e < edges.size(); ++e) {
        const auto [u, v] = edges[e];
        const double d2 = dist2(points.row(u), points.row(v), dim);
        ew[e] = std::exp(-d2 / (nn.sigma[u] * nn.sigma[v]));
    }

    WeightedGraph g;
    g.node_count = static_cast<uint32_t>(n);
    std::vector<uint32_t> deg_count(n, 0);
    for (const auto& [u, v] : edges) {
        ++deg_count[u];
        ++deg_count[v];
    }
    g.offsets.assign(n + 1, 0);
    for (size_t u = 0; u < n; ++u) g.offsets[u + 1] = g.offsets[u] + deg_count[u];
    g.neighbors.assign(g.offsets[n], 0);
    g.weights.assign(g.offsets[n], 0.0);
    std::vector<uint64_t> cursor(g.offsets.begin(), g.offsets.end() - 1);
    for (size_t e = 0; e < edges.size(); ++e) {
        const auto [u, v] = edges[e];
        g.neighbors[cursor[u]] = v;
        g.weights[cursor[u]++] = ew[e];
        g.neighbors[cursor[v]] = u;
        g.weights[cursor[v]++] = ew[e];
    }
    // Edge list was sorted by (u, v), so each per-node neighbor list is
    // built in ascending order (edge_weight relies on this).
    g.degrees.assign(n, 0.0);
    for (size_t u = 0; u < n; ++u) {
        double s = 0.0;
        for (uint64_t t = g.offsets[u]; t < g.offsets[u + 1]; ++t) s += g.weights[t];
        g.degrees[u] = s;
    }
    return g;
}

WeightedGraph knn_graph(const Matrix& points, size_t k) {
    return build_graph(knn(points, k), points);
}

void save_graph(const std::string& path, const WeightedGraph& g) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out.write("SGPH", 4);
    write_le(out, static_cast<uint32_t>(1));
    write_le(out, static_cast<uint64_t>(g.node_count));
    for (uint32_t u = 0; u < g.node_count; ++u) {
        const auto a = g.adj(u);
        write_le(out, static_cast<uint32_t>(a.count));
        for (size_t t = 0; t < a.count; ++t) {
            write_le(out, a.nbr[t]);
            float w = static_cast<float>(a.w[t]);
            uint32_t bits;
            std::memcpy(&bits, &w, 4);
            write_le(out, bits);
        }
    }
}

WeightedGraph load_graph(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open graph file " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "SGPH", 4) != 0) throw FormatError(path + ": bad magic");
    uint32_t version;
    read_le(in, version);
    if (version != 1) throw FormatError(path + ": unsupported version");
    uint64_t n;
    read_le(in, n);
    if (!in) throw FormatError(path + ": header ends early");

    WeightedGraph g;
    g.node_count = static_cast<uint32_t>(n);
    g.offsets.assign(n + 1, 0);
    std::vector<std::vector<std::pair<uint32_t, double>>> adj(n);
    for (uint64_t u = 0; u < n; ++u) {
        uint32_t cnt;
        read_le(in, cnt);
        if (!in) throw TruncationError(path + ": ends inside node " + std::to_string(u));
        adj[u].reserve(cnt);
        for (uint32_t t = 0; t < cnt; ++t) {
            uint32_t v, bits;
            read_le(in, v);
            read_le(in, bits);
            if (!in) throw TruncationError(path + ": ends inside node " + std::to_string(u));
            if (v >= n) throw DataError(path + ": neighbor id out of range");
            float w;
            std::memcpy(&w, &bits, 4);
            adj[u].emplace_back(v, static_cast<double>(w));
        }
    }
    for (uint64_t u = 0; u < n; ++u) g.offsets[u + 1] = g.offsets[u] + adj[u].size();
    g.neighbors.reserve(g.offsets[n]);
    g.weights.reserve(g.offsets[n]);
    g.degrees.assign(n, 0.0);
    for (uint64_t u = 0; u < n; ++u) {
        double s = 0.0;
        for (const auto& [v, w] : adj[u]) {
            g.neighbors.push_back(v);
            g.weights.push_back(w);
            s += w;
        }
        g.degrees[u] = s;
    }
    return g;
}

} // namespace spectro
