#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "motiongate/classifiers.hpp"
#include "motiongate/detectors.hpp"
#include "motiongate/protocols.hpp"

namespace motiongate {

inline constexpr int kModelFormatVersion = 1;

// Self-describing, version-checked container for one deployable model:
// fitted state plus everything needed to go from a raw trace to a decision.
struct ModelArtifact {
    std::string model_id;
    WindowSpec window;
    std::string selector;  // builtin channel selector name
    Threshold threshold;
    std::optional<FittedDetector> detector;      // exactly one of these is set
    std::optional<FittedClassifier> classifier;

    std::string method() const;
};

nlohmann::ordered_json model_to_json(const ModelArtifact& artifact);
ModelArtifact model_from_json(const nlohmann::ordered_json& j);

void save_model(const ModelArtifact& artifact, const std::filesystem::path& path);
// Throws ModelVersionError for unknown or future format versions.
ModelArtifact load_model(const std::filesystem::path& path);

struct ScoreResult {
    double score = 0.0;
    Threshold threshold;
    bool accept = false;
};

// Full raw-trace scoring path: regularize, condition, window, score, decide.
// Classifier artifacts require a claimed participant id.
ScoreResult score_trace(const ModelArtifact& artifact, const MotionTrace& trace,
                        std::optional<int> claimed_id = std::nullopt);

}  // namespace motiongate
