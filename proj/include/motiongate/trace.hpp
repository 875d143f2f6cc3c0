#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace motiongate {

inline constexpr int kNumChannels = 15;
inline constexpr int64_t kNominalStepMs = 20;  // 50 Hz
inline constexpr int64_t kMaxGapMs = 200;

// Canonical channel order. Magnetometer channels are raw in a MotionTrace;
// the processed (debiased) stream is produced by the preprocess module.
inline constexpr std::array<const char*, kNumChannels> kChannelNames = {
    "acc_x",  "acc_y",  "acc_z",  "gyr_x",  "gyr_y",
    "gyr_z",  "mag_x",  "mag_y",  "mag_z",  "lacc_x",
    "lacc_y", "lacc_z", "grav_x", "grav_y", "grav_z"};

enum class Label { bonafide, attack };
enum class AttackType { none, stationary, handheld, temporal_shift };

std::string to_string(Label l);
std::string to_string(AttackType t);
Label label_from_string(const std::string& s);
AttackType attack_type_from_string(const std::string& s);

// One capture attempt: T rows x 15 channels plus workflow event timestamps.
struct MotionTrace {
    std::string trace_id;
    std::optional<int> participant_id;  // null for unlabeled attack material
    std::vector<double> samples;        // row-major, T x 15
    std::vector<int64_t> timestamps_ms;
    int64_t camera_open_ms = 0;
    int64_t capture_ms = 0;
    Label label = Label::bonafide;
    AttackType attack_type = AttackType::none;

    size_t rows() const { return timestamps_ms.size(); }
    double at(size_t t, size_t c) const { return samples[t * kNumChannels + c]; }
    double& at(size_t t, size_t c) { return samples[t * kNumChannels + c]; }

    // Throws ParseError if any invariant is violated.
    void validate() const;
};

// Named configuration resolving to an ordered subset of the 15 channels.
// Magnetometer channels in a selection always refer to the processed stream.
struct ChannelSelector {
    std::string name;
    std::vector<int> channels;

    static ChannelSelector builtin(const std::string& name);
    static std::vector<std::string> builtin_names();
    size_t count() const { return channels.size(); }
};

// --- parsing / serialization ---------------------------------------------

MotionTrace parse_trace(const std::string& csv_text, const std::string& meta_json_text);
std::string serialize_trace_csv(const MotionTrace& trace);
std::string serialize_trace_meta(const MotionTrace& trace);

// Linear interpolation onto the exact 20 ms grid anchored at the first
// timestamp. Throws UnrecoverableGapError for gaps above kMaxGapMs.
MotionTrace regularize_grid(const MotionTrace& trace);

// Maps an event timestamp to a grid index, nearest point, ties toward the
// earlier index. Clamped to [0, rows-1].
size_t event_grid_index(const MotionTrace& trace, int64_t event_ms);

// --- corpus on disk -------------------------------------------------------

struct Corpus {
    std::vector<MotionTrace> traces;

    std::vector<const MotionTrace*> bonafide() const;
    std::vector<const MotionTrace*> attacks() const;
};

Corpus load_corpus(const std::filesystem::path& dir);
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

}  // namespace motiongate
