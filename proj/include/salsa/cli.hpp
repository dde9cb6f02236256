#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "salsa/dataset.hpp"
#include "salsa/descriptors.hpp"
#include "salsa/eval.hpp"
#include "salsa/ged.hpp"
#include "salsa/io.hpp"
#include "salsa/model.hpp"
#include "salsa/smiles.hpp"

namespace salsa::cli {

namespace fs = std::filesystem;

// Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

namespace detail {

inline std::string out_dir_default() {
    const char* env = std::getenv("SALSA_OUT_DIR");
    return env && *env ? env : "salsa_out";
}

// Encoding in fixed chunks; padding never changes real-row outputs, so the
// chunk size affects wall clock only.
inline Eigen::MatrixXd encode_chunked(const model::SalsaNet& net,
                                      const std::vector<std::string>& rows,
                                      int chunk = 256) {
    if (rows.empty()) throw DataError("encode: no input rows");
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), net.cfg.latent);
    for (std::size_t at = 0; at < rows.size(); at += static_cast<std::size_t>(chunk)) {
        std::vector<std::string> part(
            rows.begin() + static_cast<std::ptrdiff_t>(at),
            rows.begin() + static_cast<std::ptrdiff_t>(
                               std::min(rows.size(), at + static_cast<std::size_t>(chunk))));
        Eigen::MatrixXd z = net.encode(part);
        out.middleRows(static_cast<Eigen::Index>(at), z.rows()) = z;
    }
    return out;
}

inline eval::Encoder encoder_of(const model::SalsaNet& net) {
    return [&net](const std::vector<std::string>& rows) { return encode_chunked(net, rows); };
}

inline eval::DecoderSampler sampler_of(const model::SalsaNet& net, double temp) {
    return [&net, temp](const Eigen::VectorXd& z, Rng& rng) {
        return smiles::detokenize(net.generate(z, /*greedy=*/false, temp, rng));
    };
}

inline std::vector<std::string> canonicalize_all(const std::vector<std::string>& rows) {
    std::vector<std::string> out;
    out.reserve(rows.size());
    for (const auto& s : rows) out.push_back(smiles::canonicalize(s));
    return out;
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory " + dir);
}

inline model::ModelConfig config_from_checkpoint_header(const std::string& ckpt) {
    return io::load_checkpoint(ckpt).cfg;  // small models; full load is fine
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Individual commands
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string out;
    std::string config_file;
    double lambda = 0.5;
    int latent = 16;
    int layers = 2;
    int hidden = 64;
    int heads = 4;
    int max_len = 32;
    double temperature = 0.7;
    double lr = 3e-4;
    int steps = 2000;
    int batch_anchors = 8;
    std::uint64_t seed = 1;
    int log_every = 100;
};

inline int cmd_train(const TrainArgs& a) {
    model::ModelConfig cfg;
    if (!a.config_file.empty()) cfg = io::config_from_text(io::read_file(a.config_file));
    cfg.lambda = a.lambda;
    cfg.latent = a.latent;
    cfg.layers = a.layers;
    cfg.hidden = a.hidden;
    cfg.heads = a.heads;
    cfg.max_len = a.max_len;
    cfg.temperature = a.temperature;
    cfg.seed = a.seed;
    cfg.check();

    auto records = io::read_records_jsonl(a.data);
    auto grouped = dataset::group_records(records, cfg.max_len);
    if (grouped.groups.empty()) throw DataError("train: no usable anchor groups in " + a.data);
    std::cerr << "train: " << grouped.groups.size() << " anchors ("
              << grouped.anchors_dropped << " dropped, " << grouped.rows_dropped
              << " over-length rows)\n";

    model::SalsaNet net(cfg);
    model::TrainOptions opt;
    opt.lr = a.lr;
    opt.steps = a.steps;
    opt.batch_anchors = a.batch_anchors;
    opt.seed = a.seed;
    if (a.steps > 0) {
        model::train(net, grouped.groups, opt, [&](int step, const model::StepStats& s) {
            if (a.log_every > 0 && step % a.log_every == 0)
                std::cerr << "step " << step << " loss " << s.loss << " (contrastive "
                          << s.contrastive << ", reconstruction " << s.reconstruction
                          << ")\n";
        });
    }
    io::save_checkpoint(a.out, net);

    io::Manifest m;
    m.command = "train";
    m.seed = a.seed;
    m.config_hash = io::config_hash(cfg);
    m.inputs = {a.data};
    m.outputs = {a.out};
    io::write_manifest(a.out + ".manifest.json", m);
    return kExitOk;
}

struct ReproduceArgs {
    std::string scale = "desk";
    std::string out_dir;
    std::uint64_t seed = 7;
    int anchors = 2000;
    int eval_anchors = 200;
    int k = 10;
    int chain_n = 5;
    int steps = 1500;
    int latent = 16;
    int interp_pairs = 20;
    int interp_samples = 100;
    int prop_draws = 10;
    int prop_draw_size = 250;
    int workers = 1;
};

// One command runs the whole desk-scale protocol: corpus, dataset, filter,
// held-out chains, one training per lambda in {0, 0.5, 1} from a shared
// initialization, and the three evaluation reports side by side.
inline int cmd_reproduce(const ReproduceArgs& a) {
    if (a.scale != "desk") throw UsageError("reproduce: only --scale desk is supported");
    detail::ensure_dir(a.out_dir);
    auto path = [&](const std::string& name) { return (fs::path(a.out_dir) / name).string(); };

    model::ModelConfig base_cfg;
    base_cfg.latent = a.latent;
    base_cfg.seed = a.seed;
    base_cfg.check();

    // 1. Corpus: train anchors and a disjoint held-out evaluation set.
    dataset::CorpusOptions copts;
    auto all = dataset::synthesize_corpus(a.anchors + a.eval_anchors, a.seed, copts);
    std::vector<std::string> train_anchors(all.begin(), all.begin() + a.anchors);
    std::vector<std::string> eval_anchors(all.begin() + a.anchors, all.end());
    {
        std::string text;
        for (const auto& s : train_anchors) text += s + "\n";
        io::write_file(path("corpus_train.txt"), text);
        text.clear();
        for (const auto& s : eval_anchors) text += s + "\n";
        io::write_file(path("corpus_eval.txt"), text);
    }

    // 2. Observed atom distribution over the training anchors.
    std::vector<molgraph::MolGraph> graphs;
    graphs.reserve(train_anchors.size());
    for (const auto& s : train_anchors) graphs.push_back(smiles::parse(s));
    auto dist = mutation::atom_type_distribution(graphs);

    // 3. Positive sets and the faulty-positive filter.
    auto records = dataset::generate_dataset(train_anchors, a.k, a.seed, dist, a.workers);
    io::write_records_jsonl(path("dataset.jsonl"), records);
    {
        std::vector<descriptors::PropertyVector> anchor_props;
        for (const auto& r : records)
            if (r.mutant_index == 0)
                anchor_props.push_back(
                    descriptors::compute_properties(smiles::parse(r.smiles)));
        auto cov = descriptors::fit_covariance(anchor_props);
        double threshold = descriptors::default_filter_threshold();
        std::map<std::int64_t, descriptors::PropertyVector> anchor_by_id;
        for (const auto& r : records)
            if (r.mutant_index == 0)
                anchor_by_id.emplace(r.anchor_id, descriptors::compute_properties(
                                                      smiles::parse(r.smiles)));
        int kept = 0, faulty = 0;
        for (auto& r : records) {
            if (r.mutant_index == 0) continue;
            double d = descriptors::mahalanobis(
                anchor_by_id.at(r.anchor_id),
                descriptors::compute_properties(smiles::parse(r.smiles)), cov);
            r.verdict = d > threshold ? mutation::FilterVerdict::Faulty
                                      : mutation::FilterVerdict::Kept;
            ++(r.verdict == mutation::FilterVerdict::Kept ? kept : faulty);
        }
        std::cerr << "filter: kept " << kept << ", faulty " << faulty << " (threshold "
                  << threshold << ")\n";
        io::write_records_jsonl(path("dataset_filtered.jsonl"), records);
    }

    // 4. Held-out supermutant chains.
    auto chain_records =
        dataset::generate_supermutants(eval_anchors, a.chain_n, a.seed, dist, a.workers);
    io::write_records_jsonl(path("chains.jsonl"), chain_records);
    auto chains = dataset::chains_from_records(chain_records);

    auto grouped = dataset::group_records(io::read_records_jsonl(path("dataset_filtered.jsonl")),
                                          base_cfg.max_len);
    std::cerr << "reproduce: " << grouped.groups.size() << " training anchors usable\n";

    // 5. Train the three weightings from one shared initialization.
    const std::vector<std::pair<std::string, double>> variants = {
        {"naive", 0.0}, {"salsa", 0.5}, {"contra", 1.0}};
    io::json summary;
    summary["seed"] = a.seed;
    summary["scale"] = a.scale;
    summary["models"] = io::json::array();

    {
        model::SalsaNet untrained(base_cfg);
        io::save_checkpoint(path("ckpt_untrained.bin"), untrained);
    }
    for (const auto& [tag, lambda] : variants) {
        model::ModelConfig cfg = base_cfg;
        cfg.lambda = lambda;
        model::SalsaNet net(cfg);
        model::TrainOptions opt;
        opt.steps = a.steps;
        opt.seed = a.seed;
        model::train(net, grouped.groups, opt, [&](int step, const model::StepStats& s) {
            if (step % 250 == 0)
                std::cerr << tag << " step " << step << " loss " << s.loss << "\n";
        });
        io::save_checkpoint(path("ckpt_" + tag + ".bin"), net);
    }

    // 6. GED-EuD reports for the three models plus the untrained encoder.
    std::vector<std::string> tags = {"untrained", "naive", "salsa", "contra"};
    std::map<std::string, double> mean_rho;
    for (const auto& tag : tags) {
        auto net = io::load_checkpoint(path("ckpt_" + tag + ".bin"));
        auto rep = eval::ged_eud_report(chains, detail::encoder_of(net),
                                        tag + "-" + std::to_string(net.cfg.latent));
        io::write_correlation_report(path("report_ged_" + tag + ".csv"),
                                     path("report_ged_" + tag + ".json"), rep);
        mean_rho[tag] = rep.mean_rho;
        io::json j;
        j["tag"] = tag;
        j["model_tag"] = rep.model_tag;
        j["latent_dim"] = rep.latent_dim;
        j["mean_rho"] = rep.mean_rho;
        j["std_rho"] = rep.std_rho;
        j["mean_tau"] = rep.mean_tau;
        j["std_tau"] = rep.std_tau;
        j["anchors_skipped"] = rep.anchors_skipped;
        summary["models"].push_back(j);
        std::cerr << "ged-eud " << tag << ": mean rho " << rep.mean_rho << " mean tau "
                  << rep.mean_tau << "\n";
    }

    // 7. Interpolation study on endpoint pairs from the held-out corpus,
    //    for the decoder-bearing models (the pure contrastive encoder has no
    //    trained decoder).
    std::vector<std::pair<std::string, std::string>> pairs;
    {
        std::vector<std::string> pool = eval_anchors;
        Rng pair_rng(a.seed, 0x7061697273ULL);
        pair_rng.shuffle(pool);
        for (int i = 0; i + 1 < static_cast<int>(pool.size()) &&
                        static_cast<int>(pairs.size()) < a.interp_pairs;
             i += 2)
            pairs.push_back({pool[static_cast<std::size_t>(i)],
                             pool[static_cast<std::size_t>(i + 1)]});
    }
    summary["interpolation"] = io::json::object();
    for (const std::string tag : {"naive", "salsa"}) {
        auto net = io::load_checkpoint(path("ckpt_" + tag + ".bin"));
        Rng rng(a.seed, 0x696e74657270ULL);
        auto results = eval::interpolation_study(pairs, detail::encoder_of(net),
                                                 detail::sampler_of(net, 1.0), rng,
                                                 a.interp_samples);
        io::write_interpolation_csv(path("interp_" + tag + ".csv"), results);
        std::vector<double> means;
        int no_valid = 0;
        for (const auto& r : results) {
            if (r.valid_decodes == 0) {
                ++no_valid;
                continue;
            }
            means.push_back(0.5 * (r.tanimoto_to_a + r.tanimoto_to_b));
        }
        double mean = means.empty() ? 1.0 : pairwise_mean(means);
        io::json j;
        j["mean_endpoint_tanimoto"] = mean;
        j["pairs_without_valid_decode"] = no_valid;
        summary["interpolation"][tag] = j;
        std::cerr << "interp " << tag << ": mean endpoint tanimoto " << mean << "\n";
    }

    // 8. Property-awareness reports.
    for (const auto& tag : tags) {
        auto net = io::load_checkpoint(path("ckpt_" + tag + ".bin"));
        Rng rng(a.seed, 0x70726f70ULL);
        int draw = std::min(a.prop_draw_size, static_cast<int>(train_anchors.size()));
        auto rep = eval::property_correlation_report(train_anchors, detail::encoder_of(net),
                                                     rng, a.prop_draws, draw);
        io::write_property_report(path("prop_" + tag + ".csv"),
                                  path("prop_projection_" + tag + ".csv"), rep);
    }

    io::write_file(path("summary.json"), summary.dump(2) + "\n");

    io::Manifest m;
    m.command = "reproduce";
    m.seed = a.seed;
    m.config_hash = io::config_hash(base_cfg);
    m.outputs = {"corpus_train.txt", "corpus_eval.txt", "dataset.jsonl",
                 "dataset_filtered.jsonl", "chains.jsonl", "summary.json"};
    io::write_manifest(path("manifest.json"), m);
    std::cout << "reproduce: summary written to " << path("summary.json") << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// Argument wiring
// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv) {
    CLI::App app{"SALSA desk-scale pipeline: graph-edit datasets, contrastive "
                 "autoencoder training, and latent-space evaluation"};
    app.require_subcommand(1);

    // canon
    std::string canon_smiles;
    bool canon_lenient = false;
    auto* canon = app.add_subcommand("canon", "Print the canonical SMILES of a molecule");
    canon->add_option("smiles", canon_smiles, "input SMILES")->required();
    canon->add_flag("--lenient", canon_lenient, "map unknown atom symbols to the placeholder");

    // ged
    std::string ged_a, ged_b;
    int ged_max = 4;
    auto* ged = app.add_subcommand(
        "ged",
        "Exact graph edit distance in the node-edit algebra (add/replace/remove of "
        "singly-attached atoms; edge-only edits such as ring making or breaking are not "
        "part of the edit set, so this is not a general-purpose GED)");
    ged->add_option("a", ged_a, "first SMILES")->required();
    ged->add_option("b", ged_b, "second SMILES")->required();
    ged->add_option("--max", ged_max, "search depth limit")->capture_default_str();

    // props
    std::string props_in, props_out;
    auto* props = app.add_subcommand("props", "Compute the 10-descriptor property table");
    props->add_option("--in", props_in, "newline-delimited SMILES")->required();
    props->add_option("--out", props_out, "output CSV")->required();

    // vocab
    std::string vocab_out;
    auto* vocab = app.add_subcommand("vocab", "Write the 39-token vocabulary file");
    vocab->add_option("--out", vocab_out, "output path")->required();

    // gen-corpus
    int gc_n = 2000, gc_eval_n = 0, gc_min_heavy = 4, gc_max_heavy = 10;
    std::uint64_t gc_seed = 1;
    std::string gc_out, gc_eval_out;
    auto* gc = app.add_subcommand("gen-corpus", "Synthesize a toy anchor corpus");
    gc->add_option("--n", gc_n, "number of molecules")->capture_default_str();
    gc->add_option("--eval-n", gc_eval_n, "extra held-out molecules")->capture_default_str();
    gc->add_option("--seed", gc_seed, "global seed")->capture_default_str();
    gc->add_option("--out", gc_out, "output file")->required();
    gc->add_option("--eval-out", gc_eval_out, "held-out output file");
    gc->add_option("--min-heavy", gc_min_heavy)->capture_default_str();
    gc->add_option("--max-heavy", gc_max_heavy)->capture_default_str();

    // gen-dataset
    std::string gd_anchors, gd_out;
    int gd_k = 10, gd_workers = 1;
    std::uint64_t gd_seed = 1;
    auto* gd = app.add_subcommand("gen-dataset",
                                  "Generate positive sets (1-edit mutants) per anchor");
    gd->add_option("--anchors", gd_anchors, "newline-delimited anchor SMILES")->required();
    gd->add_option("--k", gd_k, "mutants per anchor")->capture_default_str();
    gd->add_option("--seed", gd_seed)->capture_default_str();
    gd->add_option("--out", gd_out, "output JSONL")->required();
    gd->add_option("--workers", gd_workers)->capture_default_str();

    // gen-supermutants
    std::string gs_anchors, gs_out;
    int gs_n = 5, gs_workers = 1;
    std::uint64_t gs_seed = 1;
    auto* gs = app.add_subcommand("gen-supermutants",
                                  "Generate supermutant chains (cumulative edits)");
    gs->add_option("--anchors", gs_anchors)->required();
    gs->add_option("--n", gs_n, "chain length")->capture_default_str();
    gs->add_option("--seed", gs_seed)->capture_default_str();
    gs->add_option("--out", gs_out, "output JSONL")->required();
    gs->add_option("--workers", gs_workers)->capture_default_str();

    // filter
    std::string fl_data, fl_out;
    double fl_threshold = -1.0, fl_chi2_q = 0.99;
    auto* fl = app.add_subcommand("filter",
                                  "Mark faulty positives by Mahalanobis distance to the anchor");
    fl->add_option("--data", fl_data, "dataset JSONL")->required();
    fl->add_option("--out", fl_out, "output JSONL")->required();
    fl->add_option("--threshold", fl_threshold,
                   "absolute distance threshold (overrides --chi2-q)");
    fl->add_option("--chi2-q", fl_chi2_q, "chi-square quantile for the default threshold")
        ->capture_default_str();

    // train
    TrainArgs ta;
    auto* tr = app.add_subcommand("train", "Train a model on a dataset JSONL");
    tr->add_option("--data", ta.data)->required();
    tr->add_option("--out", ta.out, "checkpoint path")->required();
    tr->add_option("--config", ta.config_file, "key = value config file (flags override)");
    tr->add_option("--lambda", ta.lambda)->capture_default_str();
    tr->add_option("--latent", ta.latent)->capture_default_str();
    tr->add_option("--layers", ta.layers)->capture_default_str();
    tr->add_option("--hidden", ta.hidden)->capture_default_str();
    tr->add_option("--heads", ta.heads)->capture_default_str();
    tr->add_option("--max-len", ta.max_len)->capture_default_str();
    tr->add_option("--temperature", ta.temperature)->capture_default_str();
    tr->add_option("--lr", ta.lr)->capture_default_str();
    tr->add_option("--steps", ta.steps)->capture_default_str();
    tr->add_option("--batch-anchors", ta.batch_anchors)->capture_default_str();
    tr->add_option("--seed", ta.seed)->capture_default_str();
    tr->add_option("--log-every", ta.log_every)->capture_default_str();

    // encode
    std::string en_ckpt, en_in, en_out;
    auto* en = app.add_subcommand("encode", "Encode SMILES to latent codes (CSV)");
    en->add_option("--ckpt", en_ckpt)->required();
    en->add_option("--in", en_in, "newline-delimited SMILES")->required();
    en->add_option("--out", en_out, "codes CSV")->required();

    // generate
    std::string gn_ckpt, gn_codes, gn_out, gn_mode = "greedy";
    double gn_temp = 1.0;
    int gn_n = 1;
    std::uint64_t gn_seed = 1;
    auto* gn = app.add_subcommand("generate", "Decode latent codes to SMILES");
    gn->add_option("--ckpt", gn_ckpt)->required();
    gn->add_option("--codes", gn_codes, "codes CSV from `encode`")->required();
    gn->add_option("--out", gn_out, "output CSV")->required();
    gn->add_option("--mode", gn_mode, "greedy|sample")->capture_default_str();
    gn->add_option("--temp", gn_temp)->capture_default_str();
    gn->add_option("--n", gn_n, "samples per code (sample mode)")->capture_default_str();
    gn->add_option("--seed", gn_seed)->capture_default_str();

    // interpolate (alias eval-interp)
    std::string ip_ckpt, ip_pairs, ip_out_dir = detail::out_dir_default(), ip_tag = "model";
    int ip_samples = 100;
    std::uint64_t ip_seed = 1;
    auto add_interp = [&](const char* name) {
        auto* c = app.add_subcommand(name,
                                     "Slerp-midpoint interpolation study over endpoint pairs");
        c->add_option("--ckpt", ip_ckpt)->required();
        c->add_option("--pairs", ip_pairs, "CSV: two SMILES per line")->required();
        c->add_option("--out-dir", ip_out_dir)->capture_default_str();
        c->add_option("--samples", ip_samples)->capture_default_str();
        c->add_option("--seed", ip_seed)->capture_default_str();
        c->add_option("--tag", ip_tag)->capture_default_str();
        return c;
    };
    auto* ip = add_interp("interpolate");
    auto* ip2 = add_interp("eval-interp");

    // eval-ged
    std::string eg_ckpt, eg_chains, eg_out_dir = detail::out_dir_default(), eg_tag;
    auto* eg = app.add_subcommand("eval-ged",
                                  "GED-EuD rank correlation over supermutant chains");
    eg->add_option("--ckpt", eg_ckpt)->required();
    eg->add_option("--chains", eg_chains, "chains JSONL from gen-supermutants")->required();
    eg->add_option("--out-dir", eg_out_dir)->capture_default_str();
    eg->add_option("--tag", eg_tag, "report tag (defaults to the model tag)");

    // eval-prop
    std::string ep_ckpt, ep_in, ep_out_dir = detail::out_dir_default(), ep_tag = "model";
    int ep_draws = 10, ep_draw_size = 250;
    std::uint64_t ep_seed = 1;
    auto* ep = app.add_subcommand("eval-prop",
                                  "Property-difference vs latent-distance correlations");
    ep->add_option("--ckpt", ep_ckpt)->required();
    ep->add_option("--in", ep_in, "newline-delimited SMILES sample")->required();
    ep->add_option("--out-dir", ep_out_dir)->capture_default_str();
    ep->add_option("--draws", ep_draws)->capture_default_str();
    ep->add_option("--draw-size", ep_draw_size)->capture_default_str();
    ep->add_option("--seed", ep_seed)->capture_default_str();
    ep->add_option("--tag", ep_tag)->capture_default_str();

    // reproduce
    ReproduceArgs ra;
    ra.out_dir = detail::out_dir_default();
    auto* rp = app.add_subcommand("reproduce",
                                  "Run the full desk-scale protocol (corpus, dataset, three "
                                  "trainings, evaluation reports)");
    rp->add_option("--scale", ra.scale)->capture_default_str();
    rp->add_option("--seed", ra.seed)->capture_default_str();
    rp->add_option("--out-dir", ra.out_dir)->capture_default_str();
    rp->add_option("--anchors", ra.anchors)->capture_default_str();
    rp->add_option("--eval-anchors", ra.eval_anchors)->capture_default_str();
    rp->add_option("--k", ra.k)->capture_default_str();
    rp->add_option("--chain-n", ra.chain_n)->capture_default_str();
    rp->add_option("--steps", ra.steps)->capture_default_str();
    rp->add_option("--latent", ra.latent)->capture_default_str();
    rp->add_option("--interp-pairs", ra.interp_pairs)->capture_default_str();
    rp->add_option("--interp-samples", ra.interp_samples)->capture_default_str();
    rp->add_option("--prop-draws", ra.prop_draws)->capture_default_str();
    rp->add_option("--prop-draw-size", ra.prop_draw_size)->capture_default_str();
    rp->add_option("--workers", ra.workers)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (canon->parsed()) {
            std::cout << smiles::canonicalize(canon_smiles, {.strict = !canon_lenient}) << "\n";
            return kExitOk;
        }
        if (ged->parsed()) {
            auto d = molgraph::ged_exact(smiles::parse(ged_a), smiles::parse(ged_b), ged_max);
            if (d)
                std::cout << *d << "\n";
            else
                std::cout << "EXCEEDS\n";
            return kExitOk;
        }
        if (props->parsed()) {
            auto rows = io::read_lines(props_in);
            std::vector<std::string> canonical;
            std::vector<descriptors::PropertyVector> vecs;
            for (const auto& s : rows) {
                auto g = smiles::parse(s);
                canonical.push_back(smiles::write(g));
                vecs.push_back(descriptors::compute_properties(g));
            }
            io::write_properties_csv(props_out, canonical, vecs);
            io::Manifest m;
            m.command = "props";
            m.inputs = {props_in};
            m.outputs = {props_out};
            io::write_manifest(props_out + ".manifest.json", m);
            return kExitOk;
        }
        if (vocab->parsed()) {
            io::write_vocab_file(vocab_out);
            io::verify_vocab_file(vocab_out);
            std::cout << "vocab checksum " << io::hex64(smiles::Vocabulary::instance().checksum())
                      << "\n";
            return kExitOk;
        }
        if (gc->parsed()) {
            dataset::CorpusOptions opts;
            opts.min_heavy = gc_min_heavy;
            opts.max_heavy = gc_max_heavy;
            auto all = dataset::synthesize_corpus(gc_n + gc_eval_n, gc_seed, opts);
            std::string text;
            for (int i = 0; i < gc_n; ++i) text += all[static_cast<std::size_t>(i)] + "\n";
            io::write_file(gc_out, text);
            std::vector<std::string> outputs = {gc_out};
            if (gc_eval_n > 0) {
                if (gc_eval_out.empty())
                    throw UsageError("gen-corpus: --eval-n requires --eval-out");
                text.clear();
                for (int i = gc_n; i < gc_n + gc_eval_n; ++i)
                    text += all[static_cast<std::size_t>(i)] + "\n";
                io::write_file(gc_eval_out, text);
                outputs.push_back(gc_eval_out);
            }
            io::Manifest m;
            m.command = "gen-corpus";
            m.seed = gc_seed;
            m.outputs = outputs;
            io::write_manifest(gc_out + ".manifest.json", m);
            return kExitOk;
        }
        if (gd->parsed()) {
            auto anchors = io::read_lines(gd_anchors);
            std::vector<molgraph::MolGraph> graphs;
            for (const auto& s : anchors) graphs.push_back(smiles::parse(s));
            auto dist = mutation::atom_type_distribution(graphs);
            auto records = dataset::generate_dataset(anchors, gd_k, gd_seed, dist, gd_workers);
            io::write_records_jsonl(gd_out, records);
            io::Manifest m;
            m.command = "gen-dataset";
            m.seed = gd_seed;
            m.inputs = {gd_anchors};
            m.outputs = {gd_out};
            io::write_manifest(gd_out + ".manifest.json", m);
            return kExitOk;
        }
        if (gs->parsed()) {
            auto anchors = io::read_lines(gs_anchors);
            std::vector<molgraph::MolGraph> graphs;
            for (const auto& s : anchors) graphs.push_back(smiles::parse(s));
            auto dist = mutation::atom_type_distribution(graphs);
            auto records =
                dataset::generate_supermutants(anchors, gs_n, gs_seed, dist, gs_workers);
            io::write_records_jsonl(gs_out, records);
            io::Manifest m;
            m.command = "gen-supermutants";
            m.seed = gs_seed;
            m.inputs = {gs_anchors};
            m.outputs = {gs_out};
            io::write_manifest(gs_out + ".manifest.json", m);
            return kExitOk;
        }
        if (fl->parsed()) {
            auto records = io::read_records_jsonl(fl_data);
            std::vector<descriptors::PropertyVector> anchor_props;
            std::map<std::int64_t, descriptors::PropertyVector> by_id;
            for (const auto& r : records)
                if (r.mutant_index == 0) {
                    auto p = descriptors::compute_properties(smiles::parse(r.smiles));
                    anchor_props.push_back(p);
                    by_id.emplace(r.anchor_id, p);
                }
            auto cov = descriptors::fit_covariance(anchor_props);
            double threshold = fl_threshold >= 0.0
                                   ? fl_threshold
                                   : descriptors::default_filter_threshold(fl_chi2_q);
            int kept = 0, faulty = 0;
            for (auto& r : records) {
                if (r.mutant_index == 0) continue;
                auto it = by_id.find(r.anchor_id);
                if (it == by_id.end()) throw DataError("filter: mutant without anchor row");
                double d = descriptors::mahalanobis(
                    it->second, descriptors::compute_properties(smiles::parse(r.smiles)), cov);
                r.verdict = d > threshold ? mutation::FilterVerdict::Faulty
                                          : mutation::FilterVerdict::Kept;
                ++(r.verdict == mutation::FilterVerdict::Kept ? kept : faulty);
            }
            io::write_records_jsonl(fl_out, records);
            std::cout << "kept " << kept << " faulty " << faulty << " threshold " << threshold
                      << "\n";
            io::Manifest m;
            m.command = "filter";
            m.inputs = {fl_data};
            m.outputs = {fl_out};
            io::write_manifest(fl_out + ".manifest.json", m);
            return kExitOk;
        }
        if (tr->parsed()) return cmd_train(ta);
        if (en->parsed()) {
            auto net = io::load_checkpoint(en_ckpt);
            auto rows = detail::canonicalize_all(io::read_lines(en_in));
            auto codes = detail::encode_chunked(net, rows);
            io::write_codes_csv(en_out, rows, codes);
            io::Manifest m;
            m.command = "encode";
            m.seed = net.cfg.seed;
            m.config_hash = io::config_hash(net.cfg);
            m.inputs = {en_ckpt, en_in};
            m.outputs = {en_out};
            io::write_manifest(en_out + ".manifest.json", m);
            return kExitOk;
        }
        if (gn->parsed()) {
            if (gn_mode != "greedy" && gn_mode != "sample")
                throw UsageError("generate: --mode must be greedy or sample");
            auto net = io::load_checkpoint(gn_ckpt);
            auto [keys, codes] = io::read_codes_csv(gn_codes);
            if (codes.cols() != net.cfg.latent)
                throw DataError("generate: code dimension does not match the checkpoint");
            std::ostringstream ss;
            ss << "key,sample,smiles,parses\n";
            Rng rng(gn_seed, 0x67656e5f736d69ULL);
            for (Eigen::Index r = 0; r < codes.rows(); ++r) {
                int samples = gn_mode == "greedy" ? 1 : gn_n;
                for (int s = 0; s < samples; ++s) {
                    auto ids = net.generate(codes.row(r).transpose(), gn_mode == "greedy",
                                            gn_temp, rng);
                    std::string out = smiles::detokenize(ids);
                    bool parses = true;
                    try {
                        smiles::parse(out);
                    } catch (const DataError&) {
                        parses = false;
                    }
                    ss << keys[static_cast<std::size_t>(r)] << "," << s << "," << out << ","
                       << (parses ? 1 : 0) << "\n";
                }
            }
            io::write_file(gn_out, ss.str());
            io::Manifest m;
            m.command = "generate";
            m.seed = gn_seed;
            m.config_hash = io::config_hash(net.cfg);
            m.inputs = {gn_ckpt, gn_codes};
            m.outputs = {gn_out};
            io::write_manifest(gn_out + ".manifest.json", m);
            return kExitOk;
        }
        if (ip->parsed() || ip2->parsed()) {
            auto net = io::load_checkpoint(ip_ckpt);
            std::vector<std::pair<std::string, std::string>> pairs;
            for (const auto& line : io::read_lines(ip_pairs)) {
                auto comma = line.find(',');
                if (comma == std::string::npos)
                    throw DataError("interpolate: pairs file needs two SMILES per line");
                pairs.push_back({line.substr(0, comma), line.substr(comma + 1)});
            }
            detail::ensure_dir(ip_out_dir);
            Rng rng(ip_seed, 0x696e74657270ULL);
            auto results = eval::interpolation_study(pairs, detail::encoder_of(net),
                                                     detail::sampler_of(net, 1.0), rng,
                                                     ip_samples);
            std::string csv = (fs::path(ip_out_dir) / ("interp_" + ip_tag + ".csv")).string();
            io::write_interpolation_csv(csv, results);
            io::Manifest m;
            m.command = "interpolate";
            m.seed = ip_seed;
            m.config_hash = io::config_hash(net.cfg);
            m.inputs = {ip_ckpt, ip_pairs};
            m.outputs = {csv};
            io::write_manifest(csv + ".manifest.json", m);
            return kExitOk;
        }
        if (eg->parsed()) {
            auto net = io::load_checkpoint(eg_ckpt);
            auto chains = dataset::chains_from_records(io::read_records_jsonl(eg_chains));
            std::string tag = eg_tag.empty() ? net.cfg.model_tag() : eg_tag;
            auto rep = eval::ged_eud_report(chains, detail::encoder_of(net), tag);
            detail::ensure_dir(eg_out_dir);
            std::string csv = (fs::path(eg_out_dir) / ("report_ged_" + tag + ".csv")).string();
            std::string js = (fs::path(eg_out_dir) / ("report_ged_" + tag + ".json")).string();
            io::write_correlation_report(csv, js, rep);
            std::cout << "mean_rho " << io::format_double(rep.mean_rho) << " mean_tau "
                      << io::format_double(rep.mean_tau) << " skipped "
                      << rep.anchors_skipped << "\n";
            io::Manifest m;
            m.command = "eval-ged";
            m.seed = net.cfg.seed;
            m.config_hash = io::config_hash(net.cfg);
            m.inputs = {eg_ckpt, eg_chains};
            m.outputs = {csv, js};
            io::write_manifest(js + ".manifest.json", m);
            return kExitOk;
        }
        if (ep->parsed()) {
            auto net = io::load_checkpoint(ep_ckpt);
            auto molecules = detail::canonicalize_all(io::read_lines(ep_in));
            detail::ensure_dir(ep_out_dir);
            Rng rng(ep_seed, 0x70726f70ULL);
            auto rep = eval::property_correlation_report(molecules, detail::encoder_of(net),
                                                         rng, ep_draws, ep_draw_size);
            std::string csv = (fs::path(ep_out_dir) / ("prop_" + ep_tag + ".csv")).string();
            std::string proj =
                (fs::path(ep_out_dir) / ("prop_projection_" + ep_tag + ".csv")).string();
            io::write_property_report(csv, proj, rep);
            io::Manifest m;
            m.command = "eval-prop";
            m.seed = ep_seed;
            m.config_hash = io::config_hash(net.cfg);
            m.inputs = {ep_ckpt, ep_in};
            m.outputs = {csv, proj};
            io::write_manifest(csv + ".manifest.json", m);
            return kExitOk;
        }
        if (rp->parsed()) return cmd_reproduce(ra);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

inline int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("salsa");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace salsa::cli
