#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "motiongate/classifiers.hpp"
#include "motiongate/detectors.hpp"
#include "motiongate/preprocess.hpp"
#include "motiongate/trace.hpp"

namespace motiongate {

// --- thresholds & metrics -------------------------------------------------

enum class Direction { reject_above, reject_below };

std::string to_string(Direction d);

struct Threshold {
    double value = 0.0;
    Direction direction = Direction::reject_above;
    bool degenerate = false;  // calibration scores all equal
    bool fallback = false;    // too few scores, min/max used
    double percentile = 0.0;
    size_t n_scores = 0;
};

// Empirical percentile with linear interpolation between order statistics.
Threshold calibrate_threshold(std::vector<double> scores, double percentile, Direction direction);

struct EerResult {
    double eer = 0.0;        // fraction, not percent
    double threshold = 0.0;
};

// Sweeps all distinct scores and midpoints; higher score = more genuine.
// FRR(t) = fraction of genuine < t, FAR(t) = fraction of impostor >= t;
// EER = (FRR+FAR)/2 at the threshold minimizing |FRR-FAR|, ties toward the
// lower threshold.
EerResult compute_eer(const std::vector<double>& genuine, const std::vector<double>& impostor);

// --- splits ---------------------------------------------------------------

struct GroupSplit {
    std::vector<int> train_participants;
    std::vector<int> test_participants;
};

GroupSplit group_split(const std::vector<int>& participants, double train_fraction, uint64_t seed);

// --- windowed corpus ------------------------------------------------------

struct WindowedCorpus {
    std::vector<Sample> bonafide;  // corpus order
    std::vector<Sample> attacks;
    std::vector<std::string> excluded;  // traces whose windows did not fit
};

WindowedCorpus window_corpus(const Corpus& corpus, const WindowSpec& spec,
                             const ChannelSelector& selector,
                             const PreprocessOptions& opts = {});

// --- reports --------------------------------------------------------------

struct CurvePoint {
    double threshold = 0.0;
    double frr = 0.0;  // percent
    double far = 0.0;  // percent
};

struct ResampleResult {
    double frr = 0.0;  // percent
    double far = 0.0;
    std::optional<double> eer;  // percent
    std::map<std::string, double> far_per_type;
    Threshold threshold;
    std::vector<CurvePoint> curve;
    nlohmann::ordered_json detail;  // split composition, per-user breakdown
};

struct EvalReport {
    std::string task;
    nlohmann::ordered_json config;
    std::string config_hash;
    uint64_t seed = 0;
    std::vector<ResampleResult> resamples;
    double frr_mean = 0.0, frr_std = 0.0;
    double far_mean = 0.0, far_std = 0.0;
    std::optional<double> eer_mean, eer_std;
    std::map<std::string, double> far_per_type_mean;
    std::vector<std::string> excluded_traces;
    std::vector<std::string> warnings;
    double runtime_ms_per_probe = 0.0;  // not part of the deterministic report

    nlohmann::ordered_json to_json() const;  // deterministic, excludes runtime
    std::string to_markdown() const;
    std::string curves_csv() const;
};

std::string config_hash(const nlohmann::ordered_json& config);

// --- benchmark tasks ------------------------------------------------------

struct SpoofRunConfig {
    DetectorConfig detector;
    WindowSpec window{10, 50, 100, Representation::single};
    std::string selector = "acc_xyz";
    int resamples = 5;
    double percentile = 99.0;
    double train_fraction = 0.8;
    int calib_folds = 5;
    uint64_t seed = 7;
    int jobs = 1;
};

EvalReport spoof_screening_run(const Corpus& corpus, const SpoofRunConfig& config);

struct OneClassRunConfig {
    DetectorConfig detector;
    WindowSpec window{10, 50, 150, Representation::single};
    std::string selector = "cross_x";
    int enroll = 10;
    int inner_folds = 2;
    int repeats = 5;
    double percentile = 99.0;
    uint64_t seed = 7;
    int jobs = 1;
};

EvalReport oneclass_run(const Corpus& corpus, const OneClassRunConfig& config);

struct TscRunConfig {
    ClassifierConfig classifier;
    WindowSpec window{10, 50, 150, Representation::double_window};
    std::string selector = "nine";
    int outer_folds = 5;
    int max_inner_folds = 3;
    int inner_repeats = 5;
    double target_frr_percent = 1.0;
    uint64_t seed = 7;
    int jobs = 1;
};

EvalReport tsc_verification_run(const Corpus& corpus, const TscRunConfig& config);

}  // namespace motiongate
