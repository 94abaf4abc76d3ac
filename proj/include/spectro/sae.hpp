#pragma once

#include <cstdint>
#include <tuple>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace spectro {

// Sparse feature activations over a token window centered at the target.
struct ContextActivations {
    int64_t context_id = 0;
    std::vector<int64_t> window_tokens;
    size_t target_pos = 0;
    // (position, feature, value >= 0); absent positions mean 0.
    std::vector<std::tuple<uint32_t, uint32_t, double>> acts;
};

struct ActivationDump {
    std::vector<ContextActivations> contexts;
    // context_id -> index in contexts
    std::map<int64_t, size_t> by_id;

    void index();
    void validate() const;
};

ActivationDump load_activation_dump(const std::string& path);
void save_activation_dump(const std::string& path, const ActivationDump& dump);

struct MatchParams {
    double threshold = 0.8;       // activation frequency needed for a match
    size_t contexts_per_cluster = 30;
    size_t baseline_clusters = 20;
    size_t max_ranked_features = 50;  // how many top-ranked features to scan
    uint64_t rng_seed = 0;
};

struct MatchReport {
    size_t cluster_id = 0;
    std::optional<uint32_t> matched_feature;
    double activation_frequency = 0.0;
    double baseline_frequency = 0.0;
    size_t sampled_contexts = 0;
    bool baseline_short = false;  // fewer than 21 clusters were available
};

// Dense window activations of one feature for one context.
std::vector<double> feature_window(const ContextActivations& ctx, uint32_t feature);

// Unusually-active test: activation at the target position is at least
// max(90th percentile over the window, 0.1). Nearest-rank percentile.
bool binarize(const std::vector<double>& window_acts, size_t target_pos);

// Fraction of the given contexts where the feature binarizes true.
double activation_frequency(uint32_t feature, const std::vector<const ContextActivations*>& ctxs);

// Pooled binarize-true fraction over sampled contexts from sampled other
// clusters. cluster_contexts[i] holds the sampled contexts of cluster i.
double baseline_frequency(uint32_t feature,
                          const std::vector<std::vector<const ContextActivations*>>& clusters,
                          size_t exclude, const MatchParams& params, bool* short_flag);

// Full matching pass: per cluster, rank features by mean target activation
// over the sample, scan the ranked list for the first feature whose
// activation frequency reaches the threshold, then compute its baseline.
std::vector<MatchReport> match_clusters(
    const ActivationDump& dump, const std::vector<std::vector<int64_t>>& cluster_context_ids,
    const MatchParams& params);

void save_match_reports(const std::string& path, const std::vector<MatchReport>& reports);

} // namespace spectro
