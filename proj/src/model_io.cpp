#include "motiongate/model_io.hpp"

#include <fstream>
#include <sstream>

#include "motiongate/errors.hpp"
#include "motiongate/preprocess.hpp"

namespace motiongate {

std::string ModelArtifact::method() const {
    if (detector) return to_string(detector->kind());
    if (classifier) return to_string(classifier->kind());
    return "unset";
}

nlohmann::ordered_json model_to_json(const ModelArtifact& artifact) {
    if (!artifact.detector == !artifact.classifier)
        throw ConfigError("model artifact must hold exactly one fitted model");
    nlohmann::ordered_json j;
    j["format_version"] = kModelFormatVersion;
    j["model_id"] = artifact.model_id;
    j["kind"] = artifact.detector ? "detector" : "classifier";
    j["method"] = artifact.method();
    j["window"] = {
        {"k_open", artifact.window.k_open},
        {"pre", artifact.window.pre},
        {"post", artifact.window.post},
        {"representation", to_string(artifact.window.representation)},
    };
    j["selector"] = artifact.selector;
    j["threshold"] = {
        {"value", artifact.threshold.value},
        {"direction", to_string(artifact.threshold.direction)},
        {"degenerate", artifact.threshold.degenerate},
        {"fallback", artifact.threshold.fallback},
        {"percentile", artifact.threshold.percentile},
        {"n_scores", artifact.threshold.n_scores},
    };
    nlohmann::ordered_json state;
    if (artifact.detector)
        to_json(state, *artifact.detector);
    else
        to_json(state, *artifact.classifier);
    j["state"] = std::move(state);
    return j;
}

ModelArtifact model_from_json(const nlohmann::ordered_json& j) {
    if (!j.contains("format_version") || !j["format_version"].is_number_integer())
        throw ModelVersionError("missing format_version");
    const int version = j["format_version"].get<int>();
    if (version != kModelFormatVersion)
        throw ModelVersionError("unsupported model format version " + std::to_string(version));

    ModelArtifact artifact;
    artifact.model_id = j.at("model_id").get<std::string>();
    const auto& w = j.at("window");
    artifact.window.k_open = w.at("k_open").get<int>();
    artifact.window.pre = w.at("pre").get<int>();
    artifact.window.post = w.at("post").get<int>();
    artifact.window.representation =
        representation_from_string(w.at("representation").get<std::string>());
    artifact.selector = j.at("selector").get<std::string>();
    const auto& t = j.at("threshold");
    artifact.threshold.value = t.at("value").get<double>();
    artifact.threshold.direction = t.at("direction").get<std::string>() == "reject_above"
                                       ? Direction::reject_above
                                       : Direction::reject_below;
    artifact.threshold.degenerate = t.at("degenerate").get<bool>();
    artifact.threshold.fallback = t.at("fallback").get<bool>();
    artifact.threshold.percentile = t.at("percentile").get<double>();
    artifact.threshold.n_scores = t.at("n_scores").get<size_t>();

    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "detector") {
        artifact.detector.emplace();
        from_json(j.at("state"), *artifact.detector);
    } else if (kind == "classifier") {
        artifact.classifier.emplace();
        from_json(j.at("state"), *artifact.classifier);
    } else {
        throw ModelVersionError("unknown model kind '" + kind + "'");
    }
    return artifact;
}

void save_model(const ModelArtifact& artifact, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write model file " + path.string());
    out << model_to_json(artifact).dump(2) << "\n";
}

ModelArtifact load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read model file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("model_json", e.what());
    }
    return model_from_json(j);
}

ScoreResult score_trace(const ModelArtifact& artifact, const MotionTrace& trace,
                        std::optional<int> claimed_id) {
    const ChannelSelector selector = ChannelSelector::builtin(artifact.selector);
    const Sample sample = preprocess_trace(trace, artifact.window, selector);

    ScoreResult result;
    result.threshold = artifact.threshold;
    if (artifact.detector) {
        result.score = artifact.detector->score(sample);
    } else if (artifact.classifier) {
        if (!claimed_id) throw ConfigError("classifier model requires a claimed participant id");
        result.score = artifact.classifier->verification_score(sample, *claimed_id);
    } else {
        throw ConfigError("model artifact holds no fitted model");
    }
    // reject side is strict: anomaly rejects above tau, verification below
    result.accept = artifact.threshold.direction == Direction::reject_above
                        ? result.score <= artifact.threshold.value
                        : result.score >= artifact.threshold.value;
    return result;
}

}  // namespace motiongate
