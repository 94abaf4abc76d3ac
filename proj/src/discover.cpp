#include "spectro/discover.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "spectro/canonical_json.hpp"
#include "spectro/errors.hpp"
#include "spectro/rng.hpp"

namespace spectro {

void ClusterRunParams::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must be in (0,1)");
    if (!(eps > 0.0)) throw DomainError("eps must be positive");
    if (!(main_body_threshold > 0.0 && main_body_threshold <= 1.0))
        throw DomainError("main body threshold must be in (0,1]");
    if (min_cluster_size == 0) throw DomainError("min cluster size must be positive");
    if (!(termination_fraction >= 0.0 && termination_fraction < 1.0))
        throw DomainError("termination fraction must be in [0,1)");
}

std::vector<Cluster> iterative_discover(const WeightedGraph& g, const ClusterRunParams& params) {
    params.validate();
    const uint32_t n = g.node_count;
    if (n == 0) throw DomainError("iterative_discover: empty graph");

    NodeMask mask = NodeMask::all(g);
    Rng rng(params.rng_seed);
    std::vector<Cluster> clusters;

    std::vector<uint32_t> unvisited(n);
    for (uint32_t u = 0; u < n; ++u) unvisited[u] = u;

    size_t iteration = 0;
    const double stop_below = params.termination_fraction * static_cast<double>(n);
    while (static_cast<double>(mask.active_count) > stop_below) {
        ++iteration;
        if (iteration > n) throw std::logic_error("discover: iteration count exceeded n");

        // Uniform unvisited seed. The unvisited list is compacted lazily.
        unvisited.erase(std::remove_if(unvisited.begin(), unvisited.end(),
                                       [&](uint32_t u) { return !mask.active[u]; }),
                        unvisited.end());
        const uint32_t seed = unvisited[rng.next_below(unvisited.size())];

        const PPRVector ppr = push_ppr(g, seed, params.alpha, params.eps, mask);
        const auto sweep = sweep_cut(g, ppr, mask, params.sweep_order);

        // Positive-rank set R: nodes the push actually visited.
        std::vector<uint32_t> positive;
        positive.reserve(ppr.support.size());
        for (uint32_t u : ppr.support)
            if (mask.active[u] && ppr.p[u] > 0.0) positive.push_back(u);

        if (!sweep.has_value() ||
            static_cast<double>(sweep->prefix.size()) >
                params.main_body_threshold * static_cast<double>(positive.size())) {
            // Main body: discard every positively ranked node.
            for (uint32_t u : positive) mask.remove(g, u);
            mask.remove(g, seed);
        } else if (sweep->prefix.size() < params.min_cluster_size) {
            // Isolated point.
            mask.remove(g, seed);
        } else {
            Cluster c;
            c.members = sweep->prefix;
            std::sort(c.members.begin(), c.members.end());
            c.conductance = sweep->conductance;
            c.seed = seed;
            c.iteration = iteration;
            for (uint32_t u : c.members) mask.remove(g, u);
            clusters.push_back(std::move(c));
        }
    }
    return clusters;
}

std::vector<double> cross_conductance(const WeightedGraph& g_other,
                                      const std::vector<Cluster>& clusters) {
    NodeMask mask = NodeMask::all(g_other);
    std::vector<double> out;
    out.reserve(clusters.size());
    for (const auto& c : clusters) {
        for (uint32_t u : c.members)
            if (u >= g_other.node_count)
                throw PairingError("cross_conductance: member id " + std::to_string(u) +
                                   " out of range for foreign graph");
        out.push_back(conductance(g_other, c.members, mask));
    }
    return out;
}

void save_clusters(const std::string& path, const std::vector<Cluster>& clusters) {
    nlohmann::json arr = nlohmann::json::array();
    for (size_t i = 0; i < clusters.size(); ++i) {
        nlohmann::json c;
        c["id"] = i;
        c["seed"] = clusters[i].seed;
        c["iteration"] = clusters[i].iteration;
        c["conductance"] = clusters[i].conductance;
        c["member_row_ids"] = clusters[i].members;
        arr.push_back(std::move(c));
    }
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << canonical_dump(arr) << "\n";
}

std::vector<Cluster> load_clusters(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open clusters file " + path);
    nlohmann::json arr;
    try {
        in >> arr;
    } catch (const std::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
    std::vector<Cluster> out;
    for (const auto& c : arr) {
        Cluster cl;
        cl.members = c.at("member_row_ids").get<std::vector<uint32_t>>();
        cl.conductance = c.at("conductance").get<double>();
        cl.seed = c.at("seed").get<uint32_t>();
        cl.iteration = c.at("iteration").get<size_t>();
        out.push_back(std::move(cl));
    }
    return out;
}

} // namespace spectro
