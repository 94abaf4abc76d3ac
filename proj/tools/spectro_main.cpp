#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "spectro/canonical_json.hpp"
#include "spectro/errors.hpp"
#include "spectro/sha256.hpp"
#include "spectro/discover.hpp"
#include "spectro/graph.hpp"
#include "spectro/lab.hpp"
#include "spectro/matrix.hpp"
#include "spectro/modes.hpp"
#include "spectro/report.hpp"
#include "spectro/sae.hpp"
#include "spectro/taxonomy.hpp"

using namespace spectro;

namespace {

void write_json(const std::string& path, const nlohmann::json& js) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << canonical_dump(js) << "\n";
}

int cmd_ingest(const std::string& matrix_path, const std::string& meta_path,
               const std::string& out_dir) {
    auto m = load_matrix(matrix_path);
    auto meta = load_token_metadata(meta_path, m.n());
    std::string cmd = "mkdir -p " + out_dir;
    if (std::system(cmd.c_str()) != 0) throw FormatError("cannot create " + out_dir);
    save_matrix(out_dir + "/matrix.susc", m, true);
    save_token_metadata(out_dir + "/meta.jsonl", meta);
    nlohmann::json summary;
    summary["n"] = m.n();
    summary["h"] = m.h();
    summary["matrix_digest"] = sha256_file_hex(matrix_path);
    summary["meta_digest"] = sha256_file_hex(meta_path);
    write_json(out_dir + "/ingest.json", summary);
    std::cout << "ingested " << m.n() << " rows x " << m.h() << " components\n";
    return 0;
}

int cmd_classify(const std::string& meta_path, const std::string& bigrams_path,
                 const std::string& lexicon_path, const std::string& out_path) {
    auto meta = load_token_metadata(meta_path);
    FunctionLexicon lex =
        lexicon_path.empty() ? FunctionLexicon::builtin() : FunctionLexicon::load(lexicon_path);
    BigramStats stats;
    const BigramStats* stats_ptr = nullptr;
    if (!bigrams_path.empty()) {
        stats = BigramStats::load(bigrams_path);
        stats_ptr = &stats;
    }
    std::ofstream out(out_path);
    if (!out) throw FormatError("cannot write " + out_path);
    for (const auto& rec : meta) {
        const auto f = classify_token(rec, lex, stats_ptr);
        nlohmann::json js;
        for (int i = 0; i < PatternFlags::kCount; ++i) js[PatternFlags::name(i)] = f.get(i);
        out << canonical_dump(js) << "\n";
    }
    std::cout << "classified " << meta.size() << " records -> " << out_path << "\n";
    return 0;
}

int cmd_graph(const std::string& in_path, size_t k, const std::string& out_path) {
    auto m = load_matrix(in_path);
    auto g = knn_graph(m.values, k);
    save_graph(out_path, g);
    std::cout << "graph: " << g.node_count << " nodes, " << g.edge_count() << " edges\n";
    return 0;
}

int cmd_cluster(const std::string& graph_path, const ClusterRunParams& params,
                const std::string& out_path) {
    auto g = load_graph(graph_path);
    auto clusters = iterative_discover(g, params);
    save_clusters(out_path, clusters);
    std::cout << "found " << clusters.size() << " clusters\n";
    return 0;
}

int cmd_cross_cond(const std::string& graph_path, const std::string& clusters_path,
                   const std::string& out_path) {
    auto g = load_graph(graph_path);
    auto clusters = load_clusters(clusters_path);
    auto conds = cross_conductance(g, clusters);
    nlohmann::json arr = nlohmann::json::array();
    for (size_t i = 0; i < conds.size(); ++i)
        arr.push_back({{"id", i}, {"conductance", conds[i]}});
    write_json(out_path, arr);
    std::cout << "evaluated " << conds.size() << " clusters\n";
    return 0;
}

int cmd_modes(const std::string& dist_path, const std::string& out_path) {
    auto d = DiscreteDistribution::load(dist_path);
    auto md = mode_decompose(d);
    md.save(out_path);
    std::cout << "modes: " << md.singular_values.size() << " singular values, top "
              << (md.singular_values.empty() ? 0.0 : md.singular_values[0]) << "\n";
    return 0;
}

int cmd_toy_modes(double a) {
    auto t = toy_oracle(a);
    nlohmann::json js;
    js["a"] = a;
    js["s1"] = t.s1;
    js["s2"] = t.s2;
    js["u1"] = {t.u1[0], t.u1[1]};
    js["u2"] = {t.u2[0], t.u2[1]};
    js["v1"] = {t.v1[0], t.v1[1], t.v1[2]};
    js["v2"] = {t.v2[0], t.v2[1], t.v2[2]};
    std::cout << canonical_dump(js) << "\n";
    return 0;
}

int cmd_invert(const std::string& modes_path, const std::string& chi_path,
               const std::string& out_path) {
    auto d = DiscreteDistribution::load(modes_path);
    auto md = mode_decompose(d);
    auto chi = load_matrix(chi_path);
    auto rec = mode_susceptibilities(md, d, chi.values);
    nlohmann::json js;
    js["nx"] = rec.nx;
    js["ny"] = rec.ny;
    js["chi_bar"] = rec.chi_bar;
    js["selfconsistency_residual"] = rec.selfconsistency_residual;
    js["gauge_norm"] = rec.gauge_norm;
    auto& arr = js["chi_modes"] = nlohmann::json::array();
    for (size_t a = 0; a < rec.nx; ++a)
        for (size_t b = 0; b < rec.ny; ++b)
            arr.push_back({{"alpha", a}, {"beta", b}, {"chi", rec.at(a, b)}});
    write_json(out_path, js);
    std::cout << "inverted " << rec.nx << "x" << rec.ny << " mode pairs\n";
    return 0;
}

SoftmaxSequenceModel model_from_config(const nlohmann::json& cfg) {
    const size_t vocab = cfg.at("vocab").get<size_t>();
    const size_t embed = cfg.at("embed_dim").get<size_t>();
    std::vector<SoftmaxSequenceModel::EvalPair> pairs;
    for (const auto& p : cfg.at("pairs")) {
        SoftmaxSequenceModel::EvalPair ep;
        ep.context = p.at("context").get<std::vector<int32_t>>();
        ep.target = p.at("target").get<int32_t>();
        ep.weight = p.at("weight").get<double>();
        pairs.push_back(std::move(ep));
    }
    return SoftmaxSequenceModel(vocab, embed, std::move(pairs),
                                SoftmaxSequenceModel::block_components(vocab, embed));
}

SamplerConfig sampler_from_config(const nlohmann::json& cfg) {
    SamplerConfig sc;
    if (cfg.contains("gamma")) sc.gamma = cfg["gamma"].get<double>();
    if (cfg.contains("n_beta")) sc.n_beta = cfg["n_beta"].get<double>();
    if (cfg.contains("step_eps")) sc.step_eps = cfg["step_eps"].get<double>();
    if (cfg.contains("batch_size")) sc.batch_size = cfg["batch_size"].get<size_t>();
    if (cfg.contains("chains")) sc.chains = cfg["chains"].get<size_t>();
    if (cfg.contains("draws")) sc.draws = cfg["draws"].get<size_t>();
    if (cfg.contains("steps_between_draws"))
        sc.steps_between_draws = cfg["steps_between_draws"].get<size_t>();
    if (cfg.contains("rng_seed")) sc.rng_seed = cfg["rng_seed"].get<uint64_t>();
    return sc;
}

int cmd_lab_run(const std::string& config_path, const std::string& out_path) {
    std::ifstream in(config_path);
    if (!in) throw FormatError("cannot open " + config_path);
    nlohmann::json cfg;
    in >> cfg;
    auto model = model_from_config(cfg.at("model"));
    SamplerConfig sc = sampler_from_config(cfg);

    auto w = model.random_init(cfg.value("init_seed", 1ull));
    const size_t train_steps = cfg.value("train_steps", 500ull);
    const double lr = cfg.value("train_lr", 0.05);
    const double final_loss = model.train(w, train_steps, lr);
    std::cout << "trained to loss " << final_loss << "\n";

    PosteriorDraws draws;
    if (cfg.value("sampler", std::string("sgld")) == "gaussian") {
        draws = gaussian_sample(model, w, cfg.value("lambda", 1e-4), sc);
    } else {
        draws = sgld_sample(model, w, sc);
    }
    save_draws(out_path, draws);
    nlohmann::json sidecar;
    sidecar["eval_q"] = draws.eval_q;
    write_json(out_path + ".q.json", sidecar);
    std::cout << "recorded " << draws.total_draws() << " draws -> " << out_path << "\n";
    return 0;
}

int cmd_lab_chi(const std::string& draws_path, const std::string& out_path) {
    auto draws = load_draws(draws_path);
    std::ifstream q_in(draws_path + ".q.json");
    if (q_in) {
        nlohmann::json side;
        q_in >> side;
        draws.eval_q = side.at("eval_q").get<std::vector<double>>();
    }
    auto chi = per_token_susceptibility(draws, draws.eval_q);
    save_matrix(out_path, chi, true);
    std::cout << "chi: " << chi.n() << " pairs x " << chi.h() << " components\n";
    return 0;
}

int cmd_lab_pattern(const std::string& chi_path, const std::string& members_path,
                    const std::string& out_path) {
    auto chi = load_matrix(chi_path);
    std::ifstream in(members_path);
    if (!in) throw FormatError("cannot open " + members_path);
    nlohmann::json js;
    in >> js;
    auto members = js.at("members").get<std::vector<uint32_t>>();
    auto mean = per_pattern_susceptibility(chi, members);
    nlohmann::json out;
    out["members"] = members.size();
    out["chi"] = mean;
    if (out_path.empty()) {
        std::cout << canonical_dump(out) << "\n";
    } else {
        write_json(out_path, out);
    }
    return 0;
}

int cmd_sae_match(const std::string& dump_path, const std::string& clusters_path,
                  double threshold, uint64_t rng_seed, const std::string& out_path) {
    auto dump = load_activation_dump(dump_path);
    std::ifstream in(clusters_path);
    if (!in) throw FormatError("cannot open " + clusters_path);
    nlohmann::json js;
    in >> js;
    // Accept either the clusters.json schema (member_row_ids as context ids)
    // or a plain {"clusters": [[ids...], ...]} listing.
    std::vector<std::vector<int64_t>> ids;
    if (js.is_array()) {
        for (const auto& c : js) ids.push_back(c.at("member_row_ids").get<std::vector<int64_t>>());
    } else {
        ids = js.at("clusters").get<std::vector<std::vector<int64_t>>>();
    }
    MatchParams params;
    params.threshold = threshold;
    params.rng_seed = rng_seed;
    auto reports = match_clusters(dump, ids, params);
    save_match_reports(out_path, reports);
    size_t matched = 0;
    for (const auto& r : reports)
        if (r.matched_feature) ++matched;
    std::cout << "matched " << matched << " of " << reports.size() << " clusters\n";
    return 0;
}

int cmd_points(const std::string& in_path, const std::string& meta_path,
               const std::string& out_path) {
    auto m = load_matrix(in_path);
    std::vector<PatternFlags> flags;
    if (!meta_path.empty()) {
        auto meta = load_token_metadata(meta_path, m.n());
        auto lex = FunctionLexicon::builtin();
        for (const auto& rec : meta) flags.push_back(classify_token(rec, lex));
    }
    PreprocessedMatrix prep;
    prep.values = m.values;
    emit_points(out_path, prep, flags);
    std::cout << "wrote " << m.n() << " points -> " << out_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectro: data-distribution spectroscopy toolkit"};
    app.require_subcommand(0, 1);

    bool show_version = false;
    app.add_flag("--version", show_version, "print version and manifest schema version");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "load and validate a susceptibility matrix");
    std::string in_matrix, in_meta, out_dir;
    ingest->add_option("--matrix", in_matrix)->required();
    ingest->add_option("--meta", in_meta)->required();
    ingest->add_option("--out", out_dir)->required();

    // classify
    auto* classify = app.add_subcommand("classify", "classify tokens into pattern categories");
    std::string cl_meta, cl_bigrams, cl_lexicon, cl_out = "flags.jsonl";
    classify->add_option("--meta", cl_meta)->required();
    classify->add_option("--bigrams", cl_bigrams);
    classify->add_option("--lexicon", cl_lexicon);
    classify->add_option("--out", cl_out);

    // graph
    auto* graph = app.add_subcommand("graph", "build the k-NN graph");
    std::string g_in, g_out = "graph.sgph";
    size_t g_k = 45;
    graph->add_option("--in", g_in)->required();
    graph->add_option("--k", g_k);
    graph->add_option("--out", g_out);

    // cluster
    auto* cluster = app.add_subcommand("cluster", "iterative conductance-based clustering");
    std::string c_graph, c_out = "clusters.json";
    ClusterRunParams cp;
    std::string sweep_norm = "raw";
    cluster->add_option("--graph", c_graph)->required();
    cluster->add_option("--k", cp.k);
    cluster->add_option("--alpha", cp.alpha);
    cluster->add_option("--eps", cp.eps);
    cluster->add_option("--main-body", cp.main_body_threshold);
    cluster->add_option("--min-size", cp.min_cluster_size);
    cluster->add_option("--term", cp.termination_fraction);
    cluster->add_option("--rng-seed", cp.rng_seed);
    cluster->add_option("--sweep-norm", sweep_norm)
        ->check(CLI::IsMember({"raw", "degree"}));
    cluster->add_option("--out", c_out);

    // cross-cond
    auto* cross = app.add_subcommand("cross-cond", "cluster conductance on a foreign graph");
    std::string x_graph, x_clusters, x_out = "cond.json";
    cross->add_option("--graph", x_graph)->required();
    cross->add_option("--clusters", x_clusters)->required();
    cross->add_option("--out", x_out);

    // modes
    auto* modes = app.add_subcommand("modes", "mode decomposition of a discrete distribution");
    std::string m_dist, m_out = "modes.json";
    modes->add_option("--dist", m_dist)->required();
    modes->add_option("--out", m_out);

    // toy-modes
    auto* toy = app.add_subcommand("toy-modes", "closed-form toy model modes");
    double toy_a = 0.5;
    toy->add_option("--a", toy_a);

    // invert
    auto* invert = app.add_subcommand("invert", "recover mode susceptibilities");
    std::string i_modes, i_chi, i_out = "chi_modes.json";
    invert->add_option("--modes", i_modes)->required();
    invert->add_option("--chi", i_chi)->required();
    invert->add_option("--out", i_out);

    // lab
    auto* lab = app.add_subcommand("lab", "toy-model posterior sampling");
    auto* lab_run = lab->add_subcommand("run", "train a toy model and sample");
    std::string lr_config, lr_out = "draws.drws";
    lab_run->add_option("--config", lr_config)->required();
    lab_run->add_option("--out", lr_out);
    auto* lab_chi = lab->add_subcommand("chi", "susceptibilities from draws");
    std::string lc_draws, lc_out = "chi.susc";
    lab_chi->add_option("--draws", lc_draws)->required();
    lab_chi->add_option("--out", lc_out);
    auto* lab_pattern = lab->add_subcommand("pattern", "per-pattern mean susceptibility");
    std::string lp_chi, lp_members, lp_out;
    lab_pattern->add_option("--chi", lp_chi)->required();
    lab_pattern->add_option("--members", lp_members)->required();
    lab_pattern->add_option("--out", lp_out);

    // sae-match
    auto* sae = app.add_subcommand("sae-match", "match clusters against sparse features");
    std::string s_dump, s_clusters, s_out = "matches.json";
    double s_threshold = 0.8;
    uint64_t s_seed = 0;
    sae->add_option("--dump", s_dump)->required();
    sae->add_option("--clusters", s_clusters)->required();
    sae->add_option("--threshold", s_threshold);
    sae->add_option("--rng-seed", s_seed);
    sae->add_option("--out", s_out);

    // points
    auto* points = app.add_subcommand("points", "emit a point-cloud file for external embedding");
    std::string p_in, p_meta, p_out = "points.txt";
    points->add_option("--in", p_in)->required();
    points->add_option("--meta", p_meta);
    points->add_option("--out", p_out);

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "run the full pipeline");
    std::string pl_config, pl_out;
    pipe->add_option("--config", pl_config)->required();
    pipe->add_option("--out", pl_out)->required();

    CLI11_PARSE(app, argc, argv);

    if (show_version) {
        std::cout << "spectro " << kToolVersion << " (manifest schema v" << kManifestSchemaVersion
                  << ")\n";
        return 0;
    }

    try {
        if (*ingest) return cmd_ingest(in_matrix, in_meta, out_dir);
        if (*classify) return cmd_classify(cl_meta, cl_bigrams, cl_lexicon, cl_out);
        if (*graph) return cmd_graph(g_in, g_k, g_out);
        if (*cluster) {
            cp.sweep_order =
                sweep_norm == "degree" ? SweepOrder::kDegreeNormalized : SweepOrder::kRawRank;
            return cmd_cluster(c_graph, cp, c_out);
        }
        if (*cross) return cmd_cross_cond(x_graph, x_clusters, x_out);
        if (*modes) return cmd_modes(m_dist, m_out);
        if (*toy) return cmd_toy_modes(toy_a);
        if (*invert) return cmd_invert(i_modes, i_chi, i_out);
        if (*lab) {
            if (*lab_run) return cmd_lab_run(lr_config, lr_out);
            if (*lab_chi) return cmd_lab_chi(lc_draws, lc_out);
            if (*lab_pattern) return cmd_lab_pattern(lp_chi, lp_members, lp_out);
            std::cerr << "lab requires a subcommand (run/chi/pattern)\n";
            return 2;
        }
        if (*sae) return cmd_sae_match(s_dump, s_clusters, s_threshold, s_seed, s_out);
        if (*points) return cmd_points(p_in, p_meta, p_out);
        if (*pipe) {
            run_pipeline(pl_config, pl_out);
            std::cout << "pipeline complete -> " << pl_out << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cout << app.help();
    return 0;
}
