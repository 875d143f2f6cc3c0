#pragma once

#include <cstdint>
#include <filesystem>

#include "motiongate/trace.hpp"

namespace motiongate {

// Per-participant motion template parameters. Same (profile, seed) pair
// always regenerates the identical trace.
struct MotionProfile {
    double baseline_tilt_deg = 45.0;      // device tilt from flat, rest pose
    double tilt_up_amplitude_deg = 30.0;  // added tilt reached at capture
    double tilt_up_duration_s = 0.8;
    double hold_duration_s = 1.0;         // quiescent phase after capture
    double tilt_back_rate_deg_s = 30.0;
    double tremor_acc_std = 0.05;         // m/s^2
    double tremor_gyr_std = 0.02;         // rad/s
    double mag_noise_std = 0.15;          // uT
    double mag_heading_deg = 0.0;
    double mag_field_ut = 45.0;

    // Deterministic per-participant parameter draw.
    static MotionProfile sample(uint64_t seed, uint64_t participant_tag);
};

inline constexpr double kDefaultDurationS = 12.0;
inline constexpr double kDefaultCaptureAtS = 5.0;
inline constexpr double kDefaultCameraOpenAtS = 0.4;

MotionTrace gen_bonafide(const MotionProfile& profile, double duration_s, double capture_at_s,
                         uint64_t seed);

MotionTrace gen_attack(const MotionProfile& profile, AttackType kind, uint64_t seed);

// Regenerates the unshifted motion twin of a temporal-shift attack produced
// with the same (profile, seed).
MotionTrace temporal_shift_twin(const MotionProfile& profile, uint64_t seed);

struct AttackCounts {
    int stationary = 6;
    int handheld = 11;
    int temporal_shift = 18;
};

Corpus gen_corpus(int n_participants, int seqs_per_participant, const AttackCounts& attacks,
                  uint64_t seed);

void gen_corpus_dir(int n_participants, int seqs_per_participant, const AttackCounts& attacks,
                    uint64_t seed, const std::filesystem::path& dir);

}  // namespace motiongate
