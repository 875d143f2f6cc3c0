#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "motiongate/model_io.hpp"

namespace httplib {
class Server;
}

namespace motiongate {

// Read-only scoring service. Models load once at construction; request
// handlers share them without mutation, so concurrent handling is safe.
class ScoreServer {
public:
    explicit ScoreServer(const std::filesystem::path& model_dir);
    ~ScoreServer();

    // GET /v1/models body.
    nlohmann::ordered_json models_summary() const;

    // POST /v1/score: returns {http status, response body}. Exposed directly
    // so the decision logic is testable without a socket.
    std::pair<int, nlohmann::ordered_json> handle_score(const std::string& body) const;

    const std::vector<std::string>& skipped_artifacts() const { return skipped_; }
    size_t model_count() const { return models_.size(); }

    // Blocks serving HTTP until stop() is called from another thread.
    bool run(const std::string& host, int port);
    void stop();

private:
    std::map<std::string, ModelArtifact> models_;
    std::vector<std::string> skipped_;  // unreadable or future-version files
    std::unique_ptr<httplib::Server> http_;
};

}  // namespace motiongate
