#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "motiongate/errors.hpp"
#include "motiongate/model_io.hpp"
#include "motiongate/protocols.hpp"
#include "motiongate/rng.hpp"
#include "motiongate/server.hpp"
#include "motiongate/synthgen.hpp"

namespace fs = std::filesystem;
using namespace motiongate;

namespace {

uint64_t default_seed() {
    if (const char* env = std::getenv("MOTIONGATE_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("MOTIONGATE_SEED is not an unsigned integer");
        }
    }
    return 7;
}

WindowSpec parse_window(const std::string& text, const std::string& repr) {
    WindowSpec spec;
    if (!text.empty()) {
        int k = 0, pre = 0, post = 0;
        char c1 = 0, c2 = 0;
        std::istringstream in(text);
        if (!(in >> k >> c1 >> pre >> c2 >> post) || c1 != ',' || c2 != ',' || k < 0 ||
            pre < 0 || post <= 0)
            throw ConfigError("window must be 'k_open,pre,post', e.g. 10,50,100");
        spec.k_open = k;
        spec.pre = pre;
        spec.post = post;
    }
    spec.representation = representation_from_string(repr);
    return spec;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << content;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Fit a deployable spoof-screening detector on the full bona fide set with a
// group-aware out-of-fold calibrated threshold.
ModelArtifact build_spoof_model(const Corpus& corpus, const SpoofRunConfig& cfg,
                                const std::string& model_id) {
    const ChannelSelector selector = ChannelSelector::builtin(cfg.selector);
    const WindowedCorpus windows = window_corpus(corpus, cfg.window, selector);
    if (windows.bonafide.empty()) throw ProtocolError("empty_bonafide_set", "no usable traces");

    std::vector<int> participants;
    for (const Sample& s : windows.bonafide) participants.push_back(*s.participant_id);
    std::sort(participants.begin(), participants.end());
    participants.erase(std::unique(participants.begin(), participants.end()), participants.end());

    Rng rng(Rng::derive(cfg.seed, 0x656d6974ULL).next_u64());
    std::vector<int> order = participants;
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);
    const int folds = std::min<int>(cfg.calib_folds, static_cast<int>(order.size()));
    std::map<int, int> fold_by_id;
    for (size_t i = 0; i < order.size(); ++i) fold_by_id[order[i]] = static_cast<int>(i % folds);

    std::vector<double> calib;
    for (int f = 0; f < folds; ++f) {
        std::vector<Sample> fit_part, score_part;
        for (const Sample& s : windows.bonafide) {
            if (fold_by_id[*s.participant_id] == f)
                score_part.push_back(s);
            else
                fit_part.push_back(s);
        }
        if (fit_part.empty() || score_part.empty()) continue;
        const FittedDetector det =
            FittedDetector::fit(fit_part, cfg.detector, Rng::derive(cfg.seed, 0x6d66ULL + f).next_u64());
        for (const Sample& s : score_part) calib.push_back(det.score(s));
    }

    ModelArtifact artifact;
    artifact.model_id = model_id;
    artifact.window = cfg.window;
    artifact.selector = cfg.selector;
    artifact.threshold = calibrate_threshold(calib, cfg.percentile, Direction::reject_above);
    artifact.detector =
        FittedDetector::fit(windows.bonafide, cfg.detector, Rng::derive(cfg.seed, 0x6d66ULL).next_u64());
    return artifact;
}

int cmd_eval(const std::string& corpus_dir, const std::string& task, const std::string& method,
             const std::string& channels, const std::string& window_text, const std::string& repr,
             int resamples, uint64_t seed, int jobs, int knn_k, double dtw_band, int n_trees,
             int n_kernels, double l2, const std::string& out_dir, const std::string& emit_model) {
    // method/task compatibility gate before any work
    const bool detector_task = task == "spoof" || task == "oneclass";
    if (task != "spoof" && task != "oneclass" && task != "verify")
        throw ConfigError("task must be spoof, oneclass, or verify");
    if (detector_task && !is_detector_kind(method))
        throw ConfigError("task '" + task + "' needs a detector method, got '" + method + "'");
    if (!detector_task && !is_classifier_kind(method))
        throw ConfigError("task 'verify' needs a classifier method, got '" + method + "'");

    const Corpus corpus = load_corpus(corpus_dir);
    EvalReport report;
    std::optional<ModelArtifact> artifact;

    if (task == "spoof") {
        SpoofRunConfig cfg;
        cfg.detector.kind = detector_kind_from_string(method);
        cfg.detector.k = knn_k;
        if (dtw_band > 0.0) cfg.detector.dtw_band = dtw_band;
        if (n_trees > 0) cfg.detector.n_trees = n_trees;
        if (n_kernels > 0) cfg.detector.n_kernels = n_kernels;
        if (!window_text.empty() || repr != "single") cfg.window = parse_window(window_text, repr);
        if (!channels.empty()) cfg.selector = channels;
        if (resamples > 0) cfg.resamples = resamples;
        cfg.seed = seed;
        cfg.jobs = jobs;
        report = spoof_screening_run(corpus, cfg);
        if (!emit_model.empty())
            artifact = build_spoof_model(corpus, cfg, fs::path(emit_model).stem().string());
    } else if (task == "oneclass") {
        OneClassRunConfig cfg;
        cfg.detector.kind = detector_kind_from_string(method);
        cfg.detector.k = knn_k;
        if (dtw_band > 0.0) cfg.detector.dtw_band = dtw_band;
        if (n_trees > 0) cfg.detector.n_trees = n_trees;
        if (n_kernels > 0) cfg.detector.n_kernels = n_kernels;
        if (!window_text.empty() || repr != "single") cfg.window = parse_window(window_text, repr);
        if (!channels.empty()) cfg.selector = channels;
        cfg.seed = seed;
        cfg.jobs = jobs;
        if (!emit_model.empty())
            throw ConfigError("--emit-model is supported for the spoof task only");
        report = oneclass_run(corpus, cfg);
    } else {
        TscRunConfig cfg;
        cfg.classifier.kind = classifier_kind_from_string(method);
        if (n_trees > 0) cfg.classifier.n_trees = n_trees;
        if (n_kernels > 0) cfg.classifier.n_kernels = n_kernels;
        cfg.classifier.l2 = l2;
        if (!window_text.empty() || repr != "double")
            cfg.window = parse_window(window_text, repr.empty() ? "double" : repr);
        if (!channels.empty()) cfg.selector = channels;
        if (resamples > 0) cfg.outer_folds = resamples;
        cfg.seed = seed;
        cfg.jobs = jobs;
        if (!emit_model.empty())
            throw ConfigError("--emit-model is supported for the spoof task only");
        report = tsc_verification_run(corpus, cfg);
    }

    fs::create_directories(out_dir);
    const fs::path json_path = fs::path(out_dir) / "report.json";
    const fs::path md_path = fs::path(out_dir) / "report.md";
    const fs::path csv_path = fs::path(out_dir) / "curves.csv";
    try {
        write_file(json_path, report.to_json().dump(2) + "\n");
        write_file(md_path, report.to_markdown());
        write_file(csv_path, report.curves_csv());
        if (artifact) save_model(*artifact, emit_model);
    } catch (...) {
        // never leave partial outputs behind
        std::error_code ec;
        fs::remove(json_path, ec);
        fs::remove(md_path, ec);
        fs::remove(csv_path, ec);
        if (!emit_model.empty()) fs::remove(emit_model, ec);
        throw;
    }

    std::cerr << "wrote " << json_path.string() << ", report.md, curves.csv";
    if (artifact) std::cerr << ", " << emit_model;
    std::cerr << "\nruntime per probe: " << report.runtime_ms_per_probe << " ms\n";
    std::cout << report.to_markdown();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"motion-based spoof screening and user verification toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "structured config file; flags win");

    uint64_t seed = 0;
    try {
        seed = default_seed();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark corpus");
    std::string synth_out;
    int participants = 30, seqs = 12;
    AttackCounts attacks;
    bool force = false;
    synth->add_option("--out", synth_out, "output corpus directory")->required();
    synth->add_option("--participants", participants, "number of participants");
    synth->add_option("--seqs", seqs, "bona fide sequences per participant");
    synth->add_option("--stationary", attacks.stationary, "stationary attack proxies");
    synth->add_option("--handheld", attacks.handheld, "handheld attack proxies");
    synth->add_option("--tshift", attacks.temporal_shift, "temporal-shift attack proxies");
    synth->add_option("--seed", seed, "master seed");
    synth->add_flag("--force", force, "allow writing into a non-empty directory");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate a corpus and optionally regrid it");
    std::string ingest_in, ingest_out;
    ingest->add_option("--corpus", ingest_in, "corpus directory to validate")->required();
    ingest->add_option("--out", ingest_out, "write the grid-regularized corpus here");

    // eval
    auto* eval = app.add_subcommand("eval", "run a benchmark protocol and emit reports");
    std::string corpus_dir, task, method, channels, window_text, repr = "single", out_dir = ".";
    std::string emit_model;
    int resamples = 0, jobs = 1, knn_k = 3, n_trees = 0, n_kernels = 0;
    double dtw_band = 0.0, l2 = 1.0;
    eval->add_option("--corpus", corpus_dir, "corpus directory")->required();
    eval->add_option("--task", task, "spoof | oneclass | verify")->required();
    eval->add_option("--method", method, "detector or classifier id")->required();
    eval->add_option("--channels", channels, "channel selector name");
    eval->add_option("--window", window_text, "k_open,pre,post sample counts");
    eval->add_option("--repr", repr, "single | concat | double");
    eval->add_option("--resamples", resamples, "resamples (spoof) or outer folds (verify)");
    eval->add_option("--seed", seed, "master seed");
    eval->add_option("--jobs", jobs, "worker cap for parallel work units");
    eval->add_option("--k", knn_k, "nearest-neighbor count");
    eval->add_option("--band", dtw_band, "DTW band fraction (0 = unconstrained)");
    eval->add_option("--trees", n_trees, "tree count for forest methods");
    eval->add_option("--kernels", n_kernels, "kernel count for convolutional methods");
    eval->add_option("--l2", l2, "L2 penalty for kernel_logit");
    eval->add_option("--out", out_dir, "output directory for report files");
    eval->add_option("--emit-model", emit_model, "also save a deployable model artifact (spoof)");

    // score
    auto* score = app.add_subcommand("score", "score one trace with a saved model");
    std::string model_path, trace_path, meta_path;
    int claim = -1;
    score->add_option("--model", model_path, "model artifact file")->required();
    score->add_option("--trace", trace_path, "trace CSV file")->required();
    score->add_option("--meta", meta_path, "trace meta JSON (default: trace path with .json)");
    score->add_option("--claim", claim, "claimed participant id (classifier models)");

    // serve
    auto* serve = app.add_subcommand("serve", "run the HTTP scoring service");
    std::string model_dir, host = "127.0.0.1";
    int port = 8077;
    serve->add_option("--models", model_dir, "model artifact directory")->required();
    serve->add_option("--host", host, "listen address");
    serve->add_option("--port", port, "listen port");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            if (fs::exists(synth_out) && !fs::is_empty(synth_out) && !force)
                throw ConfigError("output directory " + synth_out +
                                  " is not empty; pass --force to overwrite");
            gen_corpus_dir(participants, seqs, attacks, seed, synth_out);
            std::cout << "wrote corpus to " << synth_out << "\n";
            return 0;
        }
        if (ingest->parsed()) {
            Corpus corpus = load_corpus(ingest_in);
            size_t bona = 0, attack = 0;
            for (MotionTrace& t : corpus.traces) {
                t.validate();
                t = regularize_grid(t);
                (t.label == Label::bonafide ? bona : attack) += 1;
            }
            if (!ingest_out.empty()) save_corpus(corpus, ingest_out);
            std::cout << "ok: " << corpus.traces.size() << " traces (" << bona << " bona fide, "
                      << attack << " attack)\n";
            return 0;
        }
        if (eval->parsed()) {
            return cmd_eval(corpus_dir, task, method, channels, window_text, repr, resamples, seed,
                            jobs, knn_k, dtw_band, n_trees, n_kernels, l2, out_dir, emit_model);
        }
        if (score->parsed()) {
            const ModelArtifact artifact = load_model(model_path);
            if (meta_path.empty()) meta_path = fs::path(trace_path).replace_extension(".json").string();
            const MotionTrace trace = parse_trace(read_file(trace_path), read_file(meta_path));
            std::optional<int> claimed;
            if (claim >= 0) claimed = claim;
            const ScoreResult result = score_trace(artifact, trace, claimed);
            nlohmann::ordered_json out;
            out["score"] = result.score;
            out["threshold"] = result.threshold.value;
            out["decision"] = result.accept ? "accept" : "reject";
            out["direction"] = to_string(result.threshold.direction);
            std::cout << out.dump() << "\n";
            return result.accept ? 0 : 2;
        }
        if (serve->parsed()) {
            ScoreServer server(model_dir);
            for (const std::string& s : server.skipped_artifacts())
                std::cerr << "skipped artifact " << s << "\n";
            std::cerr << "serving " << server.model_count() << " model(s) on " << host << ":"
                      << port << "\n";
            if (!server.run(host, port)) throw ConfigError("cannot listen on " + host);
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
