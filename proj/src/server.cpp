#include "motiongate/server.hpp"

#include <chrono>

#include <httplib.h>

#include "motiongate/errors.hpp"

namespace motiongate {

namespace {

MotionTrace trace_from_request(const nlohmann::ordered_json& t) {
    if (t.contains("csv")) {
        return parse_trace(t.at("csv").get<std::string>(),
                           t.value("meta", std::string("{}")));
    }
    // inline arrays
    MotionTrace trace;
    trace.trace_id = t.value("trace_id", std::string("inline"));
    if (t.contains("participant_id") && !t["participant_id"].is_null())
        trace.participant_id = t["participant_id"].get<int>();
    trace.timestamps_ms = t.at("timestamps_ms").get<std::vector<int64_t>>();
    const auto& rows = t.at("samples");
    trace.samples.reserve(rows.size() * kNumChannels);
    for (const auto& row : rows) {
        if (row.size() != kNumChannels)
            throw ParseError("row_width", "inline sample row must have 15 values");
        for (const auto& v : row) trace.samples.push_back(v.get<double>());
    }
    trace.camera_open_ms = t.at("camera_open_ms").get<int64_t>();
    trace.capture_ms = t.at("capture_ms").get<int64_t>();
    trace.label = label_from_string(t.value("label", std::string("bonafide")));
    trace.attack_type = attack_type_from_string(t.value("attack_type", std::string("none")));
    trace.validate();
    return trace;
}

nlohmann::ordered_json error_body(const std::string& code, const std::string& message) {
    nlohmann::ordered_json j;
    j["error"] = code;
    j["message"] = message;
    return j;
}

}  // namespace

ScoreServer::ScoreServer(const std::filesystem::path& model_dir) {
    if (std::filesystem::exists(model_dir)) {
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(model_dir))
            if (entry.is_regular_file() && entry.path().extension() == ".json")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& path : files) {
            try {
                ModelArtifact artifact = load_model(path);
                models_.emplace(artifact.model_id, std::move(artifact));
            } catch (const Error& e) {
                skipped_.push_back(path.filename().string() + ": " + e.what());
            }
        }
    }
}

ScoreServer::~ScoreServer() = default;

nlohmann::ordered_json ScoreServer::models_summary() const {
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& [id, m] : models_) {
        nlohmann::ordered_json j;
        j["model_id"] = id;
        j["kind"] = m.detector ? "detector" : "classifier";
        j["method"] = m.method();
        j["window"] = {
            {"k_open", m.window.k_open},
            {"pre", m.window.pre},
            {"post", m.window.post},
            {"representation", to_string(m.window.representation)},
        };
        j["selector"] = m.selector;
        list.push_back(std::move(j));
    }
    nlohmann::ordered_json out;
    out["models"] = std::move(list);
    return out;
}

std::pair<int, nlohmann::ordered_json> ScoreServer::handle_score(const std::string& body) const {
    const auto t0 = std::chrono::steady_clock::now();
    nlohmann::ordered_json req;
    try {
        req = nlohmann::ordered_json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        return {400, error_body("malformed_request", e.what())};
    }

    if (!req.contains("model_id") || !req["model_id"].is_string())
        return {400, error_body("malformed_request", "model_id is required")};
    const std::string model_id = req["model_id"].get<std::string>();
    const auto it = models_.find(model_id);
    if (it == models_.end()) return {404, error_body("unknown_model", model_id)};

    MotionTrace trace;
    try {
        if (!req.contains("trace")) throw ParseError("missing_trace", "request has no trace");
        trace = trace_from_request(req["trace"]);
    } catch (const nlohmann::json::exception& e) {
        return {400, error_body("malformed_trace", e.what())};
    } catch (const ParseError& e) {
        return {400, error_body("malformed_trace", e.what())};
    }

    std::optional<int> claimed_id;
    if (req.contains("claimed_id") && !req["claimed_id"].is_null())
        claimed_id = req["claimed_id"].get<int>();

    try {
        const ScoreResult result = score_trace(it->second, trace, claimed_id);
        const auto t1 = std::chrono::steady_clock::now();
        nlohmann::ordered_json resp;
        resp["score"] = result.score;
        resp["threshold"] = result.threshold.value;
        resp["decision"] = result.accept ? "accept" : "reject";
        resp["direction"] = to_string(result.threshold.direction);
        resp["model_id"] = model_id;
        resp["latency_ms"] =
            std::chrono::duration<double, std::milli>(t1 - t0).count();
        return {200, std::move(resp)};
    } catch (const WindowOutOfRangeError& e) {
        return {422, error_body(e.code, e.what())};
    } catch (const UnrecoverableGapError& e) {
        return {422, error_body(e.code, e.what())};
    } catch (const ConfigError& e) {
        return {400, error_body(e.code, e.what())};
    } catch (const std::exception& e) {
        return {500, error_body("internal", e.what())};
    }
}

bool ScoreServer::run(const std::string& host, int port) {
    http_ = std::make_unique<httplib::Server>();
    http_->Get("/v1/models", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(models_summary().dump(), "application/json");
    });
    http_->Post("/v1/score", [this](const httplib::Request& req, httplib::Response& res) {
        auto [status, body] = handle_score(req.body);
        res.status = status;
        res.set_content(body.dump(), "application/json");
    });
    return http_->listen(host, port);
}

void ScoreServer::stop() {
    if (http_) http_->stop();
}

}  // namespace motiongate
