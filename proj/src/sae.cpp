#include "spectro/sae.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"
#include "spectro/canonical_json.hpp"
#include "spectro/errors.hpp"
#include "spectro/rng.hpp"

namespace spectro {

void ActivationDump::index() {
    by_id.clear();
    for (size_t i = 0; i < contexts.size(); ++i) by_id[contexts[i].context_id] = i;
}

void ActivationDump::validate() const {
    for (const auto& c : contexts) {
        if (c.window_tokens.empty()) throw DataError("activation dump: empty window");
        if (c.target_pos >= c.window_tokens.size())
            throw DataError("activation dump: target position outside window");
        for (const auto& [pos, feat, val] : c.acts) {
            if (pos >= c.window_tokens.size())
                throw DataError("activation dump: activation position outside window");
            if (val < 0.0) throw DataError("activation dump: negative activation");
        }
    }
}

ActivationDump load_activation_dump(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open dump " + path);
    ActivationDump dump;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json js;
        try {
            js = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw SchemaError(path + " line " + std::to_string(lineno) + ": " + e.what());
        }
        ContextActivations c;
        try {
            c.context_id = js.at("context_id").get<int64_t>();
            c.window_tokens = js.at("window_tokens").get<std::vector<int64_t>>();
            c.target_pos = js.at("target_pos").get<size_t>();
            for (const auto& t : js.at("acts"))
                c.acts.emplace_back(t.at(0).get<uint32_t>(), t.at(1).get<uint32_t>(),
                                    t.at(2).get<double>());
        } catch (const std::exception& e) {
            throw SchemaError(path + " line " + std::to_string(lineno) + ": " + e.what());
        }
        dump.contexts.push_back(std::move(c));
    }
    dump.validate();
    dump.index();
    return dump;
}

void save_activation_dump(const std::string& path, const ActivationDump& dump) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    for (const auto& c : dump.contexts) {
        nlohmann::json js;
        js["context_id"] = c.context_id;
        js["window_tokens"] = c.window_tokens;
        js["target_pos"] = c.target_pos;
        auto& acts = js["acts"] = nlohmann::json::array();
        for (const auto& [pos, feat, val] : c.acts) acts.push_back({pos, feat, val});
        out << canonical_dump(js) << "\n";
    }
}

std::vector<double> feature_window(const ContextActivations& ctx, uint32_t feature) {
    std::vector<double> w(ctx.window_tokens.size(), 0.0);
    for (const auto& [pos, feat, val] : ctx.acts)
        if (feat == feature) w[pos] = val;
    return w;
}

bool binarize(const std::vector<double>& window_acts, size_t target_pos) {
    if (window_acts.empty()) throw DomainError("binarize: empty window");
    if (target_pos >= window_acts.size()) throw DomainError("binarize: bad target position");
    // Nearest-rank 90th percentile over all window positions (target included).
    std::vector<double> sorted(window_acts);
    std::sort(sorted.begin(), sorted.end());
    const size_t t = sorted.size();
    const size_t rank = static_cast<size_t>(std::ceil(0.9 * static_cast<double>(t)));
    const double tau90 = sorted[rank == 0 ? 0 : rank - 1];
    const double tau = std::max(tau90, 0.1);
    return window_acts[target_pos] >= tau;
}

double activation_frequency(uint32_t feature,
                            const std::vector<const ContextActivations*>& ctxs) {
    if (ctxs.empty()) throw DomainError("activation_frequency: empty sample");
    size_t hits = 0;
    for (const ContextActivations* c : ctxs)
        if (binarize(feature_window(*c, feature), c->target_pos)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(ctxs.size());
}

double baseline_frequency(uint32_t feature,
                          const std::vector<std::vector<const ContextActivations*>>& clusters,
                          size_t exclude, const MatchParams& params, bool* short_flag) {
    std::vector<size_t> others;
    for (size_t i = 0; i < clusters.size(); ++i)
        if (i != exclude && !clusters[i].empty()) others.push_back(i);
    if (others.empty()) throw DomainError("baseline_frequency: no other clusters");

    std::vector<size_t> chosen;
    if (others.size() <= params.baseline_clusters) {
        chosen = others;
        if (short_flag) *short_flag = true;
    } else {
        // Uniform sample without replacement, deterministic per cluster.
        Rng rng(params.rng_seed, 0xba5e0000ULL + exclude);
        std::vector<size_t> pool = others;
        for (size_t t = 0; t < params.baseline_clusters; ++t) {
            const size_t pick = t + static_cast<size_t>(rng.next_below(pool.size() - t));
            std::swap(pool[t], pool[pick]);
            chosen.push_back(pool[t]);
        }
        if (short_flag) *short_flag = false;
    }

    size_t hits = 0, total = 0;
    for (size_t ci : chosen) {
        const auto& ctxs = clusters[ci];
        const size_t take = std::min(ctxs.size(), params.contexts_per_cluster);
        for (size_t t = 0; t < take; ++t) {
            if (binarize(feature_window(*ctxs[t], feature), ctxs[t]->target_pos)) ++hits;
            ++total;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

std::vector<MatchReport> match_clusters(
    const ActivationDump& dump, const std::vector<std::vector<int64_t>>& cluster_context_ids,
    const MatchParams& params) {
    const size_t n_clusters = cluster_context_ids.size();

    // Sample up to contexts_per_cluster contexts per cluster, deterministic
    // substream keyed by cluster index.
    std::vector<std::vector<const ContextActivations*>> samples(n_clusters);
    for (size_t i = 0; i < n_clusters; ++i) {
        std::vector<const ContextActivations*> all;
        for (int64_t id : cluster_context_ids[i]) {
            auto it = dump.by_id.find(id);
            if (it == dump.by_id.end())
                throw PairingError("cluster context " + std::to_string(id) +
                                   " missing from activation dump");
            all.push_back(&dump.contexts[it->second]);
        }
        if (all.size() <= params.contexts_per_cluster) {
            samples[i] = std::move(all);
        } else {
            Rng rng(params.rng_seed, 0x5a3b0000ULL + i);
            for (size_t t = 0; t < params.contexts_per_cluster; ++t) {
                const size_t pick = t + static_cast<size_t>(rng.next_below(all.size() - t));
                std::swap(all[t], all[pick]);
                samples[i].push_back(all[t]);
            }
        }
    }

    std::vector<MatchReport> reports(n_clusters);
#pragma omp parallel for schedule(dynamic, 1)
    for (size_t i = 0; i < n_clusters; ++i) {
        MatchReport rep;
        rep.cluster_id = i;
        rep.sampled_contexts = samples[i].size();
        if (samples[i].empty()) {
            reports[i] = rep;
            continue;
        }
        // Rank features by mean activation at the target position over the
        // sample; ties by lower feature id.
        std::map<uint32_t, double> target_sum;
        for (const ContextActivations* c : samples[i])
            for (const auto& [pos, feat, val] : c->acts)
                if (pos == c->target_pos) target_sum[feat] += val;
        std::vector<std::pair<double, uint32_t>> ranked;
        ranked.reserve(target_sum.size());
        for (const auto& [feat, s] : target_sum)
            if (s > 0.0) ranked.emplace_back(-s, feat);
        std::sort(ranked.begin(), ranked.end());

        const size_t scan = std::min(ranked.size(), params.max_ranked_features);
        for (size_t t = 0; t < scan; ++t) {
            const uint32_t feat = ranked[t].second;
            const double freq = activation_frequency(feat, samples[i]);
            if (freq >= params.threshold) {
                rep.matched_feature = feat;
                rep.activation_frequency = freq;
                rep.baseline_frequency =
                    baseline_frequency(feat, samples, i, params, &rep.baseline_short);
                break;
            }
        }
        reports[i] = rep;
    }
    return reports;
}

void save_match_reports(const std::string& path, const std::vector<MatchReport>& reports) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) {
        nlohmann::json js;
        js["cluster_id"] = r.cluster_id;
        if (r.matched_feature)
            js["matched_feature"] = *r.matched_feature;
        else
            js["matched_feature"] = nullptr;
        js["activation_frequency"] = r.activation_frequency;
        js["baseline_frequency"] = r.baseline_frequency;
        js["sampled_contexts"] = r.sampled_contexts;
        js["baseline_short"] = r.baseline_short;
        arr.push_back(std::move(js));
    }
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << canonical_dump(arr) << "\n";
}

} // namespace spectro
