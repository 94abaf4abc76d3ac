#include "spectro/report.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fcntl.h>
#include <fstream>
#include <map>
#include <sys/stat.h>
#include <unistd.h>

#include "spectro/canonical_json.hpp"
#include "spectro/errors.hpp"
#include "spectro/sha256.hpp"

namespace spectro {

const char* kToolVersion = "0.1.0";
const int kManifestSchemaVersion = 1;

double entropy_nats(const std::vector<int64_t>& values) {
    if (values.empty()) return 0.0;
    std::map<int64_t, size_t> counts;
    for (int64_t v : values) ++counts[v];
    const double n = static_cast<double>(values.size());
    double ent = 0.0;
    for (const auto& [v, c] : counts) {
        const double p = static_cast<double>(c) / n;
        ent -= p * std::log(p);
    }
    return ent;
}

std::vector<ClusterCard> make_cards(const std::vector<Cluster>& clusters,
                                    const std::vector<TokenRecord>& meta,
                                    const std::vector<PatternFlags>& flags,
                                    const std::vector<double>& conductances) {
    if (flags.size() != meta.size())
        throw PairingError("make_cards: flags and metadata have different lengths");
    if (conductances.size() != clusters.size())
        throw PairingError("make_cards: conductance list does not match clusters");

    std::vector<ClusterCard> cards;
    cards.reserve(clusters.size());
    for (size_t ci = 0; ci < clusters.size(); ++ci) {
        const Cluster& cl = clusters[ci];
        ClusterCard card;
        card.cluster_id = ci;
        card.size = cl.members.size();
        card.conductance = conductances[ci];

        std::vector<int64_t> targets, penultimates;
        targets.reserve(cl.members.size());
        for (uint32_t row : cl.members) {
            if (row >= meta.size())
                throw PairingError("make_cards: member row " + std::to_string(row) +
                                   " outside metadata");
            const TokenRecord& rec = meta[row];
            targets.push_back(rec.target);
            penultimates.push_back(rec.context.back());
            for (int f = 0; f < PatternFlags::kCount; ++f)
                if (flags[row].get(f)) card.pattern_histogram[f] += 1.0;
        }
        for (int f = 0; f < PatternFlags::kCount; ++f)
            card.pattern_histogram[f] /= static_cast<double>(cl.members.size());
        card.target_entropy = entropy_nats(targets);
        card.penultimate_entropy = entropy_nats(penultimates);

        std::vector<uint32_t> sorted(cl.members);
        std::sort(sorted.begin(), sorted.end());
        for (size_t t = 0; t < sorted.size() && t < 10; ++t) card.sample_rows.push_back(sorted[t]);
        cards.push_back(std::move(card));
    }
    return cards;
}

RunManifest RunManifest::make(const nlohmann::json& parameters, const nlohmann::json& digests,
                              const nlohmann::json& seeds) {
    RunManifest m;
    m.tool_version = kToolVersion;
    m.schema_version = kManifestSchemaVersion;
    m.parameters = parameters;
    m.input_digests = digests;
    m.rng_seeds = seeds;
    const char* sde = std::getenv("SOURCE_DATE_EPOCH");
    time_t now = sde ? static_cast<time_t>(std::strtoll(sde, nullptr, 10)) : time(nullptr);
    char buf[32];
    struct tm tmv;
    gmtime_r(&now, &tmv);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tmv);
    m.timestamp = buf;
    return m;
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json js;
    js["tool_version"] = tool_version;
    js["schema_version"] = schema_version;
    js["parameters"] = parameters;
    js["input_digests"] = input_digests;
    js["rng_seeds"] = rng_seeds;
    js["timestamp"] = timestamp;
    return js;
}

void save_cards(const std::string& path, const std::vector<ClusterCard>& cards,
                const RunManifest& manifest) {
    nlohmann::json js;
    js["manifest"] = manifest.to_json();
    auto& arr = js["cards"] = nlohmann::json::array();
    for (const auto& c : cards) {
        nlohmann::json card;
        card["cluster_id"] = c.cluster_id;
        card["size"] = c.size;
        nlohmann::json hist;
        for (int f = 0; f < PatternFlags::kCount; ++f)
            hist[PatternFlags::name(f)] = c.pattern_histogram[f];
        card["pattern_histogram"] = std::move(hist);
        card["target_entropy_nats"] = c.target_entropy;
        card["penultimate_entropy_nats"] = c.penultimate_entropy;
        card["sample_rows"] = c.sample_rows;
        card["conductance"] = c.conductance;
        arr.push_back(std::move(card));
    }
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << canonical_dump(js) << "\n";
}

void emit_points(const std::string& path, const PreprocessedMatrix& m,
                 const std::vector<PatternFlags>& flags) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << "x1..x" << m.values.cols << " label\n";
    char buf[40];
    for (size_t i = 0; i < m.values.rows; ++i) {
        for (size_t j = 0; j < m.values.cols; ++j) {
            std::snprintf(buf, sizeof(buf), "%.9g", m.values.at(i, j));
            out << buf << ' ';
        }
        const char* label = "unclassified";
        if (i < flags.size()) {
            for (int f = 0; f < PatternFlags::kCount; ++f)
                if (flags[i].get(f)) {
                    label = PatternFlags::name(f);
                    break;
                }
        }
        out << label << '\n';
    }
}

namespace {

// Exclusive lockfile owned for the duration of a pipeline run.
class RunLock {
public:
    explicit RunLock(const std::string& dir) : path_(dir + "/.lock") {
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0)
            throw DomainError("run directory is locked by another pipeline invocation (" +
                              path_ + ")");
    }
    ~RunLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            ::unlink(path_.c_str());
        }
    }

private:
    std::string path_;
    int fd_ = -1;
};

} // namespace

void run_pipeline(const std::string& config_path, const std::string& out_dir) {
    std::ifstream cfg_in(config_path);
    if (!cfg_in) throw FormatError("pipeline: cannot open config " + config_path);
    nlohmann::json cfg;
    try {
        cfg_in >> cfg;
    } catch (const std::exception& e) {
        throw FormatError(std::string("pipeline: bad config: ") + e.what());
    }

    ::mkdir(out_dir.c_str(), 0755);
    RunLock lock(out_dir);

    nlohmann::json manifest_stages = nlohmann::json::object();
    auto write_manifest = [&]() {
        std::ofstream mo(out_dir + "/manifest.json");
        mo << canonical_dump(manifest_stages) << "\n";
    };

    std::string stage = "ingest";
    try {
        // --- ingest ---
        const std::string matrix_path = cfg.at("matrix").get<std::string>();
        const std::string meta_path = cfg.at("meta").get<std::string>();
        SusceptibilityMatrix susc = load_matrix(matrix_path);
        std::vector<TokenRecord> meta = load_token_metadata(meta_path, susc.n());
        {
            nlohmann::json digests;
            digests["matrix"] = sha256_file_hex(matrix_path);
            digests["meta"] = sha256_file_hex(meta_path);
            auto man = RunManifest::make({{"matrix", matrix_path}, {"meta", meta_path}},
                                         digests, nlohmann::json::object());
            manifest_stages["ingest"] = man.to_json();
            write_manifest();
        }

        // --- preprocess ---
        stage = "preprocess";
        PreprocessedMatrix prep = preprocess(susc);
        {
            SusceptibilityMatrix out;
            out.values = prep.values;
            out.row_ids = susc.row_ids;
            for (size_t j = 0; j < prep.values.cols; ++j)
                out.component_ids.push_back("kept" + std::to_string(j));
            save_matrix(out_dir + "/prep.susc", out, true);
            nlohmann::json params;
            params["dropped_columns"] = prep.dropped_columns;
            auto man = RunManifest::make(params, nlohmann::json::object(),
                                         nlohmann::json::object());
            manifest_stages["preprocess"] = man.to_json();
            write_manifest();
        }

        // --- graph ---
        stage = "graph";
        ClusterRunParams params;
        if (cfg.contains("k")) params.k = cfg["k"].get<size_t>();
        if (cfg.contains("alpha")) params.alpha = cfg["alpha"].get<double>();
        if (cfg.contains("eps")) params.eps = cfg["eps"].get<double>();
        if (cfg.contains("main_body")) params.main_body_threshold = cfg["main_body"].get<double>();
        if (cfg.contains("min_size")) params.min_cluster_size = cfg["min_size"].get<size_t>();
        if (cfg.contains("term")) params.termination_fraction = cfg["term"].get<double>();
        if (cfg.contains("rng_seed")) params.rng_seed = cfg["rng_seed"].get<uint64_t>();

        WeightedGraph g = knn_graph(prep.values, params.k);
        save_graph(out_dir + "/graph.sgph", g);
        {
            auto man = RunManifest::make({{"k", params.k}}, nlohmann::json::object(),
                                         nlohmann::json::object());
            manifest_stages["graph"] = man.to_json();
            write_manifest();
        }

        // --- cluster ---
        stage = "cluster";
        std::vector<Cluster> clusters = iterative_discover(g, params);
        save_clusters(out_dir + "/clusters.json", clusters);
        {
            nlohmann::json p;
            p["k"] = params.k;
            p["alpha"] = params.alpha;
            p["eps"] = params.eps;
            p["main_body"] = params.main_body_threshold;
            p["min_size"] = params.min_cluster_size;
            p["term"] = params.termination_fraction;
            auto man = RunManifest::make(p, nlohmann::json::object(),
                                         {{"rng_seed", params.rng_seed}});
            manifest_stages["cluster"] = man.to_json();
            write_manifest();
        }

        // --- cards & points ---
        stage = "cards";
        FunctionLexicon lex = FunctionLexicon::builtin();
        std::vector<PatternFlags> flags;
        flags.reserve(meta.size());
        for (const auto& rec : meta) flags.push_back(classify_token(rec, lex));
        std::vector<double> conds;
        conds.reserve(clusters.size());
        for (const auto& c : clusters) conds.push_back(c.conductance);
        auto cards = make_cards(clusters, meta, flags, conds);
        {
            nlohmann::json p;
            p["clusters"] = clusters.size();
            auto man = RunManifest::make(p, nlohmann::json::object(),
                                         {{"rng_seed", params.rng_seed}});
            save_cards(out_dir + "/cards.json", cards, RunManifest::make(
                p, nlohmann::json::object(), {{"rng_seed", params.rng_seed}}));
            manifest_stages["cards"] = man.to_json();
            write_manifest();
        }
        emit_points(out_dir + "/points.txt", prep, flags);
    } catch (const std::exception& e) {
        throw std::runtime_error("pipeline aborted in stage '" + stage + "': " + e.what());
    }
}

} // namespace spectro
