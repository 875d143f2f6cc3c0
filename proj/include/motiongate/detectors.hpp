#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "motiongate/features.hpp"
#include "motiongate/sample.hpp"

namespace motiongate {

enum class DetectorKind { rockad, iforest_raw, iforest_quant, knn_euclid, knn_dtw, knn_quant };

DetectorKind detector_kind_from_string(const std::string& s);
std::string to_string(DetectorKind k);
bool is_detector_kind(const std::string& s);

struct DetectorConfig {
    DetectorKind kind = DetectorKind::rockad;
    // rockad
    int n_estimators = 24;
    int n_kernels = 1024;
    // nearest neighbors
    int k = 3;
    std::optional<double> dtw_band;
    // isolation forest
    int n_trees = 1500;
    int subsample = 0;  // 0 = automatic, min(256, n)
    QuantConfig quant;
};

enum class Metric { euclid, dtw };

// Mean distance from the probe to its k nearest references. Ties broken by
// reference insertion order (stable).
double knn_score(const std::vector<Sample>& references, const Sample& probe, int k, Metric metric,
                 std::optional<double> dtw_band = std::nullopt);
double knn_score_rows(const FeatureMatrix& references, const double* probe_row, int k);

// --- isolation forest -----------------------------------------------------

struct IsoNode {
    int feature = -1;  // -1 marks a leaf
    double split = 0.0;
    int left = -1;
    int right = -1;
    int size = 0;  // leaf population
    int depth = 0;
};

struct IsoTree {
    std::vector<IsoNode> nodes;
};

struct IsolationForest {
    std::vector<IsoTree> trees;
    size_t subsample_size = 0;
    uint64_t seed = 0;

    static IsolationForest fit(const FeatureMatrix& matrix, int n_trees, int subsample,
                               uint64_t seed);
    double score(const double* row, size_t cols) const;
};

// Average unsuccessful-search path length in a BST of n points.
double iforest_c(size_t n);

// Whole-series anomaly detector; higher score = more anomalous. Immutable
// after fit; scoring never mutates state.
class FittedDetector {
public:
    static FittedDetector fit(const std::vector<Sample>& train, const DetectorConfig& config,
                              uint64_t seed);

    double score(const Sample& probe) const;

    DetectorKind kind() const { return config_.kind; }
    const DetectorConfig& config() const { return config_; }
    uint64_t seed() const { return seed_; }
    size_t input_length() const { return input_length_; }
    size_t input_channels() const { return input_channels_; }

    friend void to_json(nlohmann::ordered_json& j, const FittedDetector& d);
    friend void from_json(const nlohmann::ordered_json& j, FittedDetector& d);

private:
    DetectorConfig config_;
    uint64_t seed_ = 0;
    size_t input_length_ = 0;
    size_t input_channels_ = 0;

    // rockad
    KernelBank bank_;
    PowerTransformParams power_;
    FeatureMatrix references_;                      // transformed / feature rows
    std::vector<std::vector<uint32_t>> bootstrap_;  // per-estimator reference indices

    // isolation forest
    IsolationForest forest_;

    // dtw knn keeps whole samples
    std::vector<Sample> reference_samples_;
};

void to_json(nlohmann::ordered_json& j, const FittedDetector& d);
void from_json(const nlohmann::ordered_json& j, FittedDetector& d);

}  // namespace motiongate
