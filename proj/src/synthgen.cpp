#include "motiongate/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "motiongate/errors.hpp"
#include "motiongate/rng.hpp"

namespace motiongate {

namespace {

constexpr double kGravity = 9.81;
constexpr double kDeg = M_PI / 180.0;
constexpr double kDt = 0.02;  // 50 Hz

// smooth 0 -> 1 ramp
double ease(double u) { return 0.5 - 0.5 * std::cos(M_PI * std::clamp(u, 0.0, 1.0)); }

struct TiltCurve {
    double baseline, amplitude, up_start, capture, hold_end, back_end;

    // tilt angle from flat, degrees
    double angle(double t) const {
        if (t < up_start) return baseline;
        if (t < capture) return baseline + amplitude * ease((t - up_start) / (capture - up_start));
        if (t < hold_end) return baseline + amplitude;
        if (t < back_end)
            return baseline + amplitude - amplitude * (t - hold_end) / (back_end - hold_end);
        return baseline;
    }

    double rate(double t) const {  // deg/s
        const double h = 1e-4;
        return (angle(t + h) - angle(t - h)) / (2.0 * h);
    }
};

struct Motion {
    double tilt_deg;   // rotation about device x-axis
    double rate_deg_s;
    double roll_deg = 0.0;  // lateral lean, stands only
};

// Fill one row of the trace from an analytic device attitude plus noise.
void fill_row(MotionTrace& trace, size_t i, const Motion& m, const MotionProfile& p, Rng& rng,
              double noise_scale) {
    const double theta = m.tilt_deg * kDeg;
    const double omega = m.rate_deg_s * kDeg;  // rad/s about device x

    // gravity in the device frame; tilt rotates the world z-axis into y/z,
    // roll leaks a lateral component while preserving the norm
    const double phi = m.roll_deg * kDeg;
    const double grav_x = kGravity * std::sin(phi);
    const double grav_y = kGravity * std::cos(phi) * std::sin(theta);
    const double grav_z = kGravity * std::cos(phi) * std::cos(theta);

    // linear acceleration: small translation coupled to the wrist rotation
    const double arm = 0.12;  // m, effective lever
    const double lacc_x = noise_scale * p.tremor_acc_std * rng.normal();
    const double lacc_y = arm * omega * 2.0 + noise_scale * p.tremor_acc_std * rng.normal();
    const double lacc_z = noise_scale * p.tremor_acc_std * rng.normal();

    const double gyr_x = omega + noise_scale * p.tremor_gyr_std * rng.normal();
    const double gyr_y = noise_scale * p.tremor_gyr_std * rng.normal();
    const double gyr_z = noise_scale * p.tremor_gyr_std * rng.normal();

    // earth field rotated into the device frame
    const double h = p.mag_heading_deg * kDeg;
    const double bx = p.mag_field_ut * std::cos(h);
    const double by_w = p.mag_field_ut * std::sin(h) * 0.6;
    const double bz_w = -p.mag_field_ut * 0.8;  // inclination component
    const double mag_x = bx + p.mag_noise_std * rng.normal();
    const double mag_y = by_w * std::cos(theta) - bz_w * std::sin(theta) + p.mag_noise_std * rng.normal();
    const double mag_z = by_w * std::sin(theta) + bz_w * std::cos(theta) + p.mag_noise_std * rng.normal();

    const double vals[kNumChannels] = {
        grav_x + lacc_x, grav_y + lacc_y, grav_z + lacc_z,
        gyr_x,           gyr_y,           gyr_z,
        mag_x,           mag_y,           mag_z,
        lacc_x,          lacc_y,          lacc_z,
        grav_x,          grav_y,          grav_z};
    for (int c = 0; c < kNumChannels; ++c) trace.at(i, c) = vals[c];
}

MotionTrace blank_trace(double duration_s, double capture_at_s) {
    const size_t n = static_cast<size_t>(std::llround(duration_s / kDt));
    MotionTrace trace;
    trace.timestamps_ms.resize(n);
    trace.samples.assign(n * kNumChannels, 0.0);
    for (size_t i = 0; i < n; ++i)
        trace.timestamps_ms[i] = static_cast<int64_t>(i) * kNominalStepMs;
    trace.camera_open_ms = static_cast<int64_t>(std::llround(kDefaultCameraOpenAtS * 1000.0));
    trace.capture_ms = static_cast<int64_t>(std::llround(capture_at_s * 1000.0));
    return trace;
}

}  // namespace

MotionProfile MotionProfile::sample(uint64_t seed, uint64_t participant_tag) {
    Rng rng = Rng::derive(seed, participant_tag);
    MotionProfile p;
    p.baseline_tilt_deg = rng.uniform(41.0, 49.0);
    p.tilt_up_amplitude_deg = rng.uniform(27.0, 33.0);
    p.tilt_up_duration_s = rng.uniform(0.7, 1.0);
    p.hold_duration_s = rng.uniform(0.9, 1.1);
    p.tilt_back_rate_deg_s = rng.uniform(27.0, 33.0);
    p.tremor_acc_std = rng.uniform(0.045, 0.075);
    p.tremor_gyr_std = rng.uniform(0.015, 0.03);
    p.mag_noise_std = rng.uniform(0.08, 0.25);
    p.mag_heading_deg = rng.uniform(0.0, 360.0);
    p.mag_field_ut = rng.uniform(40.0, 55.0);
    return p;
}

MotionTrace gen_bonafide(const MotionProfile& profile, double duration_s, double capture_at_s,
                         uint64_t seed) {
    if (capture_at_s - profile.tilt_up_duration_s <= 0.0 ||
        capture_at_s + profile.hold_duration_s +
                profile.tilt_up_amplitude_deg / profile.tilt_back_rate_deg_s >=
            duration_s)
        throw ConfigError("capture window does not fit inside trace duration");

    MotionTrace trace = blank_trace(duration_s, capture_at_s);
    trace.label = Label::bonafide;
    trace.attack_type = AttackType::none;

    TiltCurve curve;
    curve.baseline = profile.baseline_tilt_deg;
    curve.amplitude = profile.tilt_up_amplitude_deg;
    curve.capture = capture_at_s;
    curve.up_start = capture_at_s - profile.tilt_up_duration_s;
    curve.hold_end = capture_at_s + profile.hold_duration_s;
    curve.back_end = curve.hold_end + profile.tilt_up_amplitude_deg / profile.tilt_back_rate_deg_s;

    Rng rng(seed);
    for (size_t i = 0; i < trace.rows(); ++i) {
        const double t = static_cast<double>(i) * kDt;
        // variability rises again once the capture gesture is over
        double noise_scale = 1.0;
        if (t >= curve.capture && t < curve.hold_end)
            noise_scale = 0.4;  // quiescent hold
        else if (t >= curve.back_end)
            noise_scale = 1.0 + std::min(1.0, (t - curve.back_end) / 2.0);
        fill_row(trace, i, {curve.angle(t), curve.rate(t)}, profile, rng, noise_scale);
    }
    return trace;
}

MotionTrace gen_attack(const MotionProfile& profile, AttackType kind, uint64_t seed) {
    switch (kind) {
        case AttackType::stationary: {
            MotionTrace trace = blank_trace(kDefaultDurationS, kDefaultCaptureAtS);
            trace.label = Label::attack;
            trace.attack_type = AttackType::stationary;
            MotionProfile still = profile;
            still.tremor_acc_std = 0.004;  // sensor noise floor only
            still.tremor_gyr_std = 0.002;
            // a stand props the device flatter and slightly leaned, unlike
            // any mid-gesture hand pose
            const double stand_tilt = 20.0 + (profile.baseline_tilt_deg - 45.0);
            const double stand_roll = 8.0 + (profile.baseline_tilt_deg - 45.0) * 0.5;
            Rng rng(seed);
            for (size_t i = 0; i < trace.rows(); ++i)
                fill_row(trace, i, {stand_tilt, 0.0, stand_roll}, still, rng, 1.0);
            return trace;
        }
        case AttackType::handheld: {
            // tremor without the capture tilt signature
            MotionTrace trace = blank_trace(kDefaultDurationS, kDefaultCaptureAtS);
            trace.label = Label::attack;
            trace.attack_type = AttackType::handheld;
            Rng rng(seed);
            for (size_t i = 0; i < trace.rows(); ++i)
                fill_row(trace, i, {profile.baseline_tilt_deg, 0.0}, profile, rng, 1.2);
            return trace;
        }
        case AttackType::temporal_shift: {
            MotionTrace trace = temporal_shift_twin(profile, seed);
            Rng rng = Rng::derive(seed, 0x74736674ULL);  // shift draw stream
            const int64_t shift = 1500 + static_cast<int64_t>(rng.uniform_int(1501));
            trace.capture_ms += shift;
            trace.label = Label::attack;
            trace.attack_type = AttackType::temporal_shift;
            return trace;
        }
        case AttackType::none:
            break;
    }
    throw ConfigError("gen_attack requires a concrete attack kind");
}

MotionTrace temporal_shift_twin(const MotionProfile& profile, uint64_t seed) {
    return gen_bonafide(profile, kDefaultDurationS, kDefaultCaptureAtS, seed);
}

Corpus gen_corpus(int n_participants, int seqs_per_participant, const AttackCounts& attacks,
                  uint64_t seed) {
    Corpus corpus;
    char buf[64];

    for (int p = 1; p <= n_participants; ++p) {
        const MotionProfile profile = MotionProfile::sample(seed, static_cast<uint64_t>(p));
        for (int s = 0; s < seqs_per_participant; ++s) {
            Rng jitter = Rng::derive(seed, static_cast<uint64_t>(p) * 1000 + s);
            const double capture_at = kDefaultCaptureAtS + jitter.uniform(-0.3, 0.3);
            // repetitions of the gesture vary slightly around the template
            MotionProfile rep = profile;
            rep.baseline_tilt_deg += jitter.uniform(-1.0, 1.0);
            rep.tilt_up_amplitude_deg += jitter.uniform(-1.5, 1.5);
            rep.tilt_up_duration_s += jitter.uniform(-0.05, 0.05);
            rep.hold_duration_s += jitter.uniform(-0.05, 0.05);
            MotionTrace trace = gen_bonafide(rep, kDefaultDurationS, capture_at,
                                             seed ^ (static_cast<uint64_t>(p) << 20 | s));
            std::snprintf(buf, sizeof(buf), "p%02d_s%02d", p, s);
            trace.trace_id = buf;
            trace.participant_id = p;
            corpus.traces.push_back(std::move(trace));
        }
    }

    for (int i = 0; i < attacks.stationary; ++i) {
        const MotionProfile profile = MotionProfile::sample(seed, 5000 + i);
        MotionTrace trace = gen_attack(profile, AttackType::stationary, seed ^ (0x51ULL << 32 | i));
        std::snprintf(buf, sizeof(buf), "attack_stationary_%02d", i);
        trace.trace_id = buf;
        corpus.traces.push_back(std::move(trace));
    }
    for (int i = 0; i < attacks.handheld; ++i) {
        // handheld proxies come from two attacker profiles
        const MotionProfile profile = MotionProfile::sample(seed, 6000 + i % 2);
        MotionTrace trace = gen_attack(profile, AttackType::handheld, seed ^ (0x52ULL << 32 | i));
        std::snprintf(buf, sizeof(buf), "attack_handheld_%02d", i);
        trace.trace_id = buf;
        corpus.traces.push_back(std::move(trace));
    }
    for (int i = 0; i < attacks.temporal_shift; ++i) {
        // genuine motion from three unseen participants, shifted timestamp
        const MotionProfile profile = MotionProfile::sample(seed, 7000 + i % 3);
        MotionTrace trace =
            gen_attack(profile, AttackType::temporal_shift, seed ^ (0x53ULL << 32 | i));
        std::snprintf(buf, sizeof(buf), "attack_tshift_%02d", i);
        trace.trace_id = buf;
        corpus.traces.push_back(std::move(trace));
    }
    return corpus;
}

void gen_corpus_dir(int n_participants, int seqs_per_participant, const AttackCounts& attacks,
                    uint64_t seed, const std::filesystem::path& dir) {
    save_corpus(gen_corpus(n_participants, seqs_per_participant, attacks, seed), dir);
}

}  // namespace motiongate
