#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "spectro/discover.hpp"
#include "spectro/matrix.hpp"
#include "spectro/taxonomy.hpp"

namespace spectro {

extern const char* kToolVersion;
extern const int kManifestSchemaVersion;

// Entropies are in nats to match the loss units.
struct ClusterCard {
    size_t cluster_id = 0;
    size_t size = 0;
    double pattern_histogram[PatternFlags::kCount] = {0};
    double target_entropy = 0.0;
    double penultimate_entropy = 0.0;
    std::vector<size_t> sample_rows;  // first 10 members by row id
    double conductance = 0.0;
};

// Every report embeds the manifest of the run that produced it. The
// timestamp honors SOURCE_DATE_EPOCH so reruns can be byte-identical.
struct RunManifest {
    std::string tool_version;
    int schema_version = 0;
    nlohmann::json parameters;
    nlohmann::json input_digests;
    nlohmann::json rng_seeds;
    std::string timestamp;

    static RunManifest make(const nlohmann::json& parameters, const nlohmann::json& digests,
                            const nlohmann::json& seeds);
    nlohmann::json to_json() const;
};

std::vector<ClusterCard> make_cards(const std::vector<Cluster>& clusters,
                                    const std::vector<TokenRecord>& meta,
                                    const std::vector<PatternFlags>& flags,
                                    const std::vector<double>& conductances);

void save_cards(const std::string& path, const std::vector<ClusterCard>& cards,
                const RunManifest& manifest);

// Point-cloud rows for an external embedding tool: header "x1..xH label",
// whitespace-separated %.9g coordinates, one pattern label per row.
void emit_points(const std::string& path, const PreprocessedMatrix& m,
                 const std::vector<PatternFlags>& flags);

// Shannon entropy (nats) of the empirical distribution of the given values.
double entropy_nats(const std::vector<int64_t>& values);

// Full pipeline: ingest -> preprocess -> graph -> cluster -> cards/points,
// each stage recording into <out>/manifest.json. A stage failure aborts with
// the stage name; prior outputs are left in place. The run directory is
// guarded by a lockfile.
void run_pipeline(const std::string& config_path, const std::string& out_dir);

} // namespace spectro
