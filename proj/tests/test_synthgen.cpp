#include <doctest.h>

#include <cmath>
#include <set>

#include "motiongate/synthgen.hpp"
#include "motiongate/trace.hpp"

using namespace motiongate;

namespace {

MotionProfile noiseless_profile() {
    MotionProfile p = MotionProfile::sample(7, 1);
    p.tremor_acc_std = 0.0;
    p.tremor_gyr_std = 0.0;
    p.mag_noise_std = 0.0;
    return p;
}

// Largest mean of channel c over any contiguous window of `win` rows inside
// [from_row, to_row).
double max_window_mean(const MotionTrace& t, int c, size_t win, size_t from_row, size_t to_row) {
    double best = -1e18;
    for (size_t start = from_row; start + win <= to_row; ++start) {
        double sum = 0.0;
        for (size_t i = start; i < start + win; ++i) sum += t.at(i, c);
        best = std::max(best, sum / static_cast<double>(win));
    }
    return best;
}

double channel_std(const MotionTrace& t, int c) {
    double mean = 0.0;
    for (size_t i = 0; i < t.rows(); ++i) mean += t.at(i, c);
    mean /= static_cast<double>(t.rows());
    double var = 0.0;
    for (size_t i = 0; i < t.rows(); ++i) var += (t.at(i, c) - mean) * (t.at(i, c) - mean);
    return std::sqrt(var / static_cast<double>(t.rows()));
}

}  // namespace

TEST_CASE("gravity channel norm is 9.81 at every sample") {
    const MotionProfile p = MotionProfile::sample(7, 3);
    const MotionTrace bona = gen_bonafide(p, 12.0, 5.0, 11);
    const MotionTrace stat = gen_attack(p, AttackType::stationary, 12);
    for (const MotionTrace* t : {&bona, &stat})
        for (size_t i = 0; i < t->rows(); ++i) {
            const double norm = std::sqrt(t->at(i, 12) * t->at(i, 12) +
                                          t->at(i, 13) * t->at(i, 13) +
                                          t->at(i, 14) * t->at(i, 14));
            CHECK(norm == doctest::Approx(9.81).epsilon(1e-9));
        }
}

TEST_CASE("noiseless accelerometer norm is 9.81 during the quiescent hold") {
    const MotionProfile p = noiseless_profile();
    const MotionTrace t = gen_bonafide(p, 12.0, 5.0, 11);
    // hold phase: capture .. capture + hold_duration
    const size_t from = static_cast<size_t>((5.0 + 0.1) / 0.02);
    const size_t to = static_cast<size_t>((5.0 + p.hold_duration_s - 0.1) / 0.02);
    for (size_t i = from; i < to; ++i) {
        const double norm = std::sqrt(t.at(i, 0) * t.at(i, 0) + t.at(i, 1) * t.at(i, 1) +
                                      t.at(i, 2) * t.at(i, 2));
        CHECK(norm == doctest::Approx(9.81).epsilon(1e-9));
    }
}

TEST_CASE("bona fide shows the capture tilt in the gyroscope, attacks do not") {
    const MotionProfile p = MotionProfile::sample(7, 2);
    const MotionTrace bona = gen_bonafide(p, 12.0, 5.0, 21);
    const MotionTrace hand = gen_attack(p, AttackType::handheld, 22);
    const MotionTrace stat = gen_attack(p, AttackType::stationary, 23);

    // half-second windows inside [capture - 2 s, capture]
    const size_t win = 25;
    const size_t cap = 250;
    CHECK(max_window_mean(bona, 3, win, cap - 100, cap) > 0.3);   // sustained tilt-up rate
    CHECK(max_window_mean(hand, 3, win, cap - 100, cap) < 0.1);   // tremor only
    CHECK(max_window_mean(stat, 3, win, cap - 100, cap) < 0.05);  // noise floor
}

TEST_CASE("stationary attack is nearly still") {
    const MotionTrace t = gen_attack(MotionProfile::sample(7, 9), AttackType::stationary, 31);
    for (int c = 0; c < 3; ++c) CHECK(channel_std(t, c) < 0.02);    // acc
    for (int c = 3; c < 6; ++c) CHECK(channel_std(t, c) < 0.005);   // gyr
    CHECK(t.label == Label::attack);
    CHECK(t.attack_type == AttackType::stationary);
}

TEST_CASE("temporal shift attack replays the twin's motion exactly") {
    const MotionProfile p = MotionProfile::sample(7, 4);
    const MotionTrace attack = gen_attack(p, AttackType::temporal_shift, 17);
    const MotionTrace twin = temporal_shift_twin(p, 17);
    CHECK(attack.samples == twin.samples);
    CHECK(attack.timestamps_ms == twin.timestamps_ms);
    CHECK(attack.camera_open_ms == twin.camera_open_ms);
    const int64_t shift = attack.capture_ms - twin.capture_ms;
    CHECK(shift >= 1500);
    CHECK(shift <= 3000);
    CHECK(attack.label == Label::attack);
    CHECK(twin.label == Label::bonafide);
}

TEST_CASE("corpus generation") {
    SUBCASE("trace counts and unique ids") {
        const Corpus c = gen_corpus(3, 2, {2, 3, 4}, 7);
        CHECK(c.bonafide().size() == 6);
        CHECK(c.attacks().size() == 9);
        std::set<std::string> ids;
        for (const MotionTrace& t : c.traces) ids.insert(t.trace_id);
        CHECK(ids.size() == c.traces.size());
        int stationary = 0, handheld = 0, tshift = 0;
        for (const MotionTrace* t : c.attacks()) {
            if (t->attack_type == AttackType::stationary) ++stationary;
            if (t->attack_type == AttackType::handheld) ++handheld;
            if (t->attack_type == AttackType::temporal_shift) ++tshift;
        }
        CHECK(stationary == 2);
        CHECK(handheld == 3);
        CHECK(tshift == 4);
    }
    SUBCASE("regeneration is identical") {
        const Corpus a = gen_corpus(2, 2, {1, 1, 1}, 7);
        const Corpus b = gen_corpus(2, 2, {1, 1, 1}, 7);
        REQUIRE(a.traces.size() == b.traces.size());
        for (size_t i = 0; i < a.traces.size(); ++i) {
            CHECK(a.traces[i].trace_id == b.traces[i].trace_id);
            CHECK(a.traces[i].samples == b.traces[i].samples);
            CHECK(a.traces[i].capture_ms == b.traces[i].capture_ms);
        }
    }
    SUBCASE("different seeds differ") {
        const Corpus a = gen_corpus(1, 1, {0, 0, 0}, 7);
        const Corpus b = gen_corpus(1, 1, {0, 0, 0}, 8);
        CHECK(a.traces[0].samples != b.traces[0].samples);
    }
    SUBCASE("empty request yields an empty corpus") {
        CHECK(gen_corpus(0, 5, {0, 0, 0}, 7).traces.empty());
    }
    SUBCASE("bona fide traces vary per repetition but share the participant template") {
        const Corpus c = gen_corpus(1, 3, {0, 0, 0}, 7);
        CHECK(c.traces[0].samples != c.traces[1].samples);
        CHECK(c.traces[0].capture_ms != c.traces[1].capture_ms);
    }
}

TEST_CASE("profile sampling is deterministic per (seed, tag)") {
    const MotionProfile a = MotionProfile::sample(7, 5);
    const MotionProfile b = MotionProfile::sample(7, 5);
    CHECK(a.baseline_tilt_deg == b.baseline_tilt_deg);
    CHECK(a.tremor_acc_std == b.tremor_acc_std);
    CHECK(a.mag_heading_deg == b.mag_heading_deg);
    const MotionProfile other = MotionProfile::sample(7, 6);
    CHECK(a.baseline_tilt_deg != other.baseline_tilt_deg);
}

TEST_CASE("generated traces satisfy the trace contract") {
    const Corpus c = gen_corpus(2, 1, {1, 1, 1}, 7);
    for (const MotionTrace& t : c.traces) {
        // reparse through the canonical serialization: any contract violation
        // (events, monotonicity, finite values) would throw
        const MotionTrace back = parse_trace(serialize_trace_csv(t), serialize_trace_meta(t));
        CHECK(back.rows() == t.rows());
        CHECK(t.camera_open_ms <= t.capture_ms);
    }
}
