#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "motiongate/errors.hpp"
#include "motiongate/model_io.hpp"
#include "motiongate/protocols.hpp"
#include "motiongate/server.hpp"
#include "motiongate/synthgen.hpp"

using namespace motiongate;

namespace {

const WindowSpec kWindow{10, 50, 100, Representation::single};

ModelArtifact detector_artifact(const Corpus& corpus) {
    const WindowedCorpus wc = window_corpus(corpus, kWindow, ChannelSelector::builtin("acc_xyz"));
    DetectorConfig cfg;
    cfg.kind = DetectorKind::knn_euclid;
    ModelArtifact artifact;
    artifact.model_id = "det_test";
    artifact.window = kWindow;
    artifact.selector = "acc_xyz";
    artifact.detector = FittedDetector::fit(wc.bonafide, cfg, 7);
    std::vector<double> scores;
    for (const Sample& s : wc.bonafide) scores.push_back(artifact.detector->score(s));
    artifact.threshold = calibrate_threshold(scores, 99.0, Direction::reject_above);
    return artifact;
}

ModelArtifact classifier_artifact(const Corpus& corpus) {
    const WindowedCorpus wc = window_corpus(corpus, kWindow, ChannelSelector::builtin("acc_xyz"));
    std::vector<int> labels;
    for (const Sample& s : wc.bonafide) labels.push_back(*s.participant_id);
    ClassifierConfig cfg;
    cfg.kind = ClassifierKind::quant_et;
    cfg.n_trees = 30;
    ModelArtifact artifact;
    artifact.model_id = "clf_test";
    artifact.window = kWindow;
    artifact.selector = "acc_xyz";
    artifact.classifier = FittedClassifier::fit(wc.bonafide, labels, cfg, 7);
    std::vector<double> scores;
    for (size_t i = 0; i < wc.bonafide.size(); ++i)
        scores.push_back(artifact.classifier->verification_score(wc.bonafide[i], labels[i]));
    artifact.threshold = calibrate_threshold(scores, 1.0, Direction::reject_below);
    return artifact;
}

std::string score_request(const std::string& model_id, const MotionTrace& trace,
                          std::optional<int> claimed = std::nullopt) {
    nlohmann::ordered_json req;
    req["model_id"] = model_id;
    if (claimed) req["claimed_id"] = *claimed;
    req["trace"]["csv"] = serialize_trace_csv(trace);
    req["trace"]["meta"] = serialize_trace_meta(trace);
    return req.dump();
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("model artifact save/load round-trips the scoring path") {
    const Corpus corpus = gen_corpus(3, 4, {1, 1, 1}, 7);
    const TempDir dir("mg_test_models_rt");

    for (const ModelArtifact& artifact : {detector_artifact(corpus), classifier_artifact(corpus)}) {
        const auto path = dir.path / (artifact.model_id + ".json");
        save_model(artifact, path);
        const ModelArtifact loaded = load_model(path);
        CHECK(loaded.model_id == artifact.model_id);
        CHECK(loaded.selector == artifact.selector);
        CHECK(loaded.threshold.value == artifact.threshold.value);
        CHECK(loaded.method() == artifact.method());

        const std::optional<int> claimed =
            artifact.classifier ? std::optional<int>(1) : std::nullopt;
        for (const MotionTrace& t : corpus.traces) {
            const ScoreResult a = score_trace(artifact, t, claimed);
            const ScoreResult b = score_trace(loaded, t, claimed);
            CHECK(a.score == b.score);
            CHECK(a.accept == b.accept);
        }
    }
}

TEST_CASE("future format versions are rejected") {
    const Corpus corpus = gen_corpus(2, 3, {0, 0, 0}, 7);
    nlohmann::ordered_json j = model_to_json(detector_artifact(corpus));
    j["format_version"] = kModelFormatVersion + 1;
    const TempDir dir("mg_test_models_ver");
    const auto path = dir.path / "future.json";
    std::ofstream(path) << j.dump();
    CHECK_THROWS_AS(load_model(path), ModelVersionError);

    const auto bad = dir.path / "bad.json";
    std::ofstream(bad) << "{not json";
    CHECK_THROWS_AS(load_model(bad), ParseError);
}

TEST_CASE("score_trace decision semantics") {
    const Corpus corpus = gen_corpus(3, 4, {2, 2, 2}, 7);

    SUBCASE("detector: reject strictly above the threshold") {
        const ModelArtifact artifact = detector_artifact(corpus);
        for (const MotionTrace& t : corpus.traces) {
            const ScoreResult r = score_trace(artifact, t);
            CHECK(r.accept == (r.score <= artifact.threshold.value));
        }
        // stationary attacks sit far outside the calibrated bona fide range
        for (const MotionTrace* t : corpus.attacks())
            if (t->attack_type == AttackType::stationary)
                CHECK_FALSE(score_trace(artifact, *t).accept);
    }

    SUBCASE("classifier: reject strictly below, claimed id required") {
        const ModelArtifact artifact = classifier_artifact(corpus);
        const MotionTrace& probe = corpus.traces.front();
        CHECK_THROWS_AS(score_trace(artifact, probe), ConfigError);
        const ScoreResult r = score_trace(artifact, probe, 1);
        CHECK(r.accept == (r.score >= artifact.threshold.value));
        CHECK_THROWS_AS(score_trace(artifact, probe, 999), ConfigError);
    }
}

TEST_CASE("score server") {
    const Corpus corpus = gen_corpus(3, 4, {1, 1, 1}, 7);
    const TempDir dir("mg_test_server");
    const ModelArtifact det = detector_artifact(corpus);
    const ModelArtifact clf = classifier_artifact(corpus);
    save_model(det, dir.path / "det_test.json");
    save_model(clf, dir.path / "clf_test.json");
    // a future-version artifact must be skipped, not fatal
    nlohmann::ordered_json future = model_to_json(det);
    future["format_version"] = kModelFormatVersion + 1;
    future["model_id"] = "future_model";
    std::ofstream(dir.path / "future.json") << future.dump();

    const ScoreServer server(dir.path);
    CHECK(server.model_count() == 2);
    REQUIRE(server.skipped_artifacts().size() == 1);
    CHECK(server.skipped_artifacts()[0].find("future.json") != std::string::npos);

    SUBCASE("models summary lists loaded models only") {
        const nlohmann::ordered_json summary = server.models_summary();
        REQUIRE(summary["models"].size() == 2);
        CHECK(summary["models"][0]["model_id"] == "clf_test");
        CHECK(summary["models"][1]["model_id"] == "det_test");
    }

    SUBCASE("successful scoring matches the direct path") {
        const MotionTrace& probe = corpus.traces.front();
        auto [status, body] = server.handle_score(score_request("det_test", probe));
        REQUIRE(status == 200);
        const ScoreResult direct = score_trace(det, probe);
        CHECK(body["score"].get<double>() == direct.score);
        CHECK(body["threshold"].get<double>() == direct.threshold.value);
        CHECK(body["decision"] == (direct.accept ? "accept" : "reject"));
        CHECK(body["direction"] == "reject_above");
        CHECK(body["model_id"] == "det_test");
        CHECK(body.contains("latency_ms"));
    }

    SUBCASE("inline sample rows are accepted") {
        const MotionTrace& probe = corpus.traces.front();
        nlohmann::ordered_json req;
        req["model_id"] = "det_test";
        auto& t = req["trace"];
        t["trace_id"] = probe.trace_id;
        t["participant_id"] = *probe.participant_id;
        t["timestamps_ms"] = probe.timestamps_ms;
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (size_t i = 0; i < probe.rows(); ++i) {
            nlohmann::ordered_json row = nlohmann::ordered_json::array();
            for (int c = 0; c < kNumChannels; ++c) row.push_back(probe.at(i, c));
            rows.push_back(std::move(row));
        }
        t["samples"] = std::move(rows);
        t["camera_open_ms"] = probe.camera_open_ms;
        t["capture_ms"] = probe.capture_ms;
        auto [status, body] = server.handle_score(req.dump());
        REQUIRE(status == 200);
        CHECK(body["score"].get<double>() == score_trace(det, probe).score);
    }

    SUBCASE("error statuses") {
        // malformed body
        CHECK(server.handle_score("{oops").first == 400);
        // missing model_id
        CHECK(server.handle_score("{}").first == 400);
        // unknown model
        const MotionTrace& probe = corpus.traces.front();
        CHECK(server.handle_score(score_request("nope", probe)).first == 404);
        // classifier without claimed_id
        CHECK(server.handle_score(score_request("clf_test", probe)).first == 400);
        // broken trace csv
        nlohmann::ordered_json req;
        req["model_id"] = "det_test";
        req["trace"]["csv"] = "bogus";
        CHECK(server.handle_score(req.dump()).first == 400);
        // capture too early for the window: unprocessable, not malformed
        MotionTrace early = probe;
        early.camera_open_ms = 400;
        early.capture_ms = 500;
        CHECK(server.handle_score(score_request("det_test", early)).first == 422);
    }
}

TEST_CASE("score server with an empty model directory") {
    const TempDir dir("mg_test_server_empty");
    const ScoreServer server(dir.path);
    CHECK(server.model_count() == 0);
    CHECK(server.models_summary()["models"].empty());
    CHECK(server.handle_score("{\"model_id\":\"x\"}").first == 404);
}
