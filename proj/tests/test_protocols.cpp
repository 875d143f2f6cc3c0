#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "motiongate/errors.hpp"
#include "motiongate/protocols.hpp"
#include "motiongate/rng.hpp"
#include "motiongate/synthgen.hpp"

using namespace motiongate;

namespace {

// Independent EER oracle over the documented candidate set: every distinct
// pooled score and every midpoint between adjacent distinct scores, ascending,
// strict improvement keeps the lowest threshold.
EerResult eer_oracle(const std::vector<double>& genuine, const std::vector<double>& impostor) {
    std::set<double> distinct(genuine.begin(), genuine.end());
    distinct.insert(impostor.begin(), impostor.end());
    std::vector<double> candidates;
    double prev = 0.0;
    bool have_prev = false;
    for (double v : distinct) {
        if (have_prev) candidates.push_back(0.5 * (prev + v));
        candidates.push_back(v);
        prev = v;
        have_prev = true;
    }
    std::sort(candidates.begin(), candidates.end());

    EerResult best;
    double best_gap = 2.0;
    for (double t : candidates) {
        size_t fr = 0, fa = 0;
        for (double g : genuine)
            if (g < t) ++fr;
        for (double i : impostor)
            if (i >= t) ++fa;
        const double frr = static_cast<double>(fr) / genuine.size();
        const double far = static_cast<double>(fa) / impostor.size();
        if (std::abs(frr - far) < best_gap) {
            best_gap = std::abs(frr - far);
            best.eer = 0.5 * (frr + far);
            best.threshold = t;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("compute_eer matches the exhaustive candidate oracle, 500 random cases") {
    Rng rng(13);
    for (int rep = 0; rep < 500; ++rep) {
        const size_t ng = 1 + rng.uniform_int(12);
        const size_t ni = 1 + rng.uniform_int(12);
        std::vector<double> genuine(ng), impostor(ni);
        // coarse values force frequent ties
        for (double& v : genuine) v = static_cast<double>(rng.uniform_int(8));
        for (double& v : impostor) v = static_cast<double>(rng.uniform_int(8));
        const EerResult got = compute_eer(genuine, impostor);
        const EerResult want = eer_oracle(genuine, impostor);
        CHECK(got.eer == want.eer);
        CHECK(got.threshold == want.threshold);
    }
}

TEST_CASE("compute_eer endpoint behavior") {
    SUBCASE("perfect separation gives EER 0") {
        const EerResult r = compute_eer({5.0, 6.0, 7.0}, {1.0, 2.0, 3.0});
        CHECK(r.eer == 0.0);
        CHECK(r.threshold > 3.0);
        CHECK(r.threshold <= 5.0);
    }
    SUBCASE("identical distributions give EER near one half") {
        Rng rng(99);
        std::vector<double> genuine(200), impostor(200);
        for (double& v : genuine) v = rng.normal();
        for (double& v : impostor) v = rng.normal();
        const EerResult r = compute_eer(genuine, impostor);
        CHECK(r.eer > 0.45);
        CHECK(r.eer < 0.55);
    }
    SUBCASE("empty side rejected") {
        CHECK_THROWS_AS(compute_eer({}, {1.0}), ProtocolError);
        CHECK_THROWS_AS(compute_eer({1.0}, {}), ProtocolError);
    }
}

TEST_CASE("calibrate_threshold") {
    SUBCASE("P99 interpolates between the 99th and 100th order statistics") {
        std::vector<double> scores(100);
        for (size_t i = 0; i < 100; ++i) scores[i] = static_cast<double>(i) * 0.5;
        // reversed input: calibration must sort internally
        std::reverse(scores.begin(), scores.end());
        const Threshold t = calibrate_threshold(scores, 99.0, Direction::reject_above);
        // pos = 0.99 * 99 = 98.01 -> s[98] + 0.01 * (s[99] - s[98])
        CHECK(t.value == doctest::Approx(49.0 + 0.01 * 0.5).epsilon(1e-12));
        CHECK_FALSE(t.degenerate);
        CHECK_FALSE(t.fallback);
        CHECK(t.n_scores == 100);
    }
    SUBCASE("percentile endpoints") {
        std::vector<double> scores(20);
        for (size_t i = 0; i < 20; ++i) scores[i] = static_cast<double>(i);
        CHECK(calibrate_threshold(scores, 0.0, Direction::reject_above).value == 0.0);
        CHECK(calibrate_threshold(scores, 100.0, Direction::reject_above).value == 19.0);
    }
    SUBCASE("all-equal scores are flagged degenerate") {
        const Threshold t = calibrate_threshold(std::vector<double>(30, 2.5), 99.0,
                                                Direction::reject_above);
        CHECK(t.degenerate);
        CHECK(t.value == 2.5);
    }
    SUBCASE("fewer than 10 scores falls back to the extreme") {
        const std::vector<double> scores = {3.0, 1.0, 2.0};
        const Threshold hi = calibrate_threshold(scores, 99.0, Direction::reject_above);
        CHECK(hi.fallback);
        CHECK(hi.value == 3.0);
        const Threshold lo = calibrate_threshold(scores, 1.0, Direction::reject_below);
        CHECK(lo.fallback);
        CHECK(lo.value == 1.0);
    }
    SUBCASE("no scores is an error") {
        CHECK_THROWS_AS(calibrate_threshold({}, 99.0, Direction::reject_above), ProtocolError);
    }
}

TEST_CASE("group_split properties") {
    const std::vector<int> participants = {7, 3, 11, 5, 2, 9, 4, 8, 1, 6};

    SUBCASE("partition is disjoint and complete") {
        const GroupSplit s = group_split(participants, 0.8, 42);
        CHECK(s.train_participants.size() == 8);
        CHECK(s.test_participants.size() == 2);
        std::vector<int> all = s.train_participants;
        all.insert(all.end(), s.test_participants.begin(), s.test_participants.end());
        std::sort(all.begin(), all.end());
        std::vector<int> want = participants;
        std::sort(want.begin(), want.end());
        CHECK(all == want);
    }
    SUBCASE("deterministic per seed, varies across seeds") {
        const GroupSplit a = group_split(participants, 0.8, 42);
        const GroupSplit b = group_split(participants, 0.8, 42);
        CHECK(a.train_participants == b.train_participants);
        bool any_differs = false;
        for (uint64_t seed = 0; seed < 20 && !any_differs; ++seed)
            any_differs = group_split(participants, 0.8, seed).train_participants !=
                          a.train_participants;
        CHECK(any_differs);
    }
    SUBCASE("both sides always non-empty") {
        const GroupSplit lo = group_split({1, 2}, 0.01, 7);
        CHECK(lo.train_participants.size() == 1);
        CHECK(lo.test_participants.size() == 1);
        const GroupSplit hi = group_split(participants, 0.999, 7);
        CHECK(hi.test_participants.size() == 1);
    }
    SUBCASE("duplicates collapse; single participant is an error") {
        const GroupSplit s = group_split({4, 4, 4, 9, 9}, 0.5, 7);
        CHECK(s.train_participants.size() + s.test_participants.size() == 2);
        CHECK_THROWS_AS(group_split({3, 3, 3}, 0.5, 7), ProtocolError);
    }
}

TEST_CASE("window_corpus separates labels and excludes unusable traces") {
    Corpus corpus = gen_corpus(3, 3, {1, 1, 1}, 7);
    // cripple one bona fide trace: capture so early the pre-window cannot fit
    corpus.traces[0].capture_ms = corpus.traces[0].camera_open_ms + 20;
    const size_t n_bona = corpus.bonafide().size();
    const size_t n_att = corpus.attacks().size();

    const WindowSpec spec{10, 50, 100, Representation::single};
    const WindowedCorpus wc = window_corpus(corpus, spec, ChannelSelector::builtin("acc_xyz"));
    CHECK(wc.excluded == std::vector<std::string>{corpus.traces[0].trace_id});
    CHECK(wc.bonafide.size() == n_bona - 1);
    CHECK(wc.attacks.size() == n_att);
    for (const Sample& s : wc.bonafide) {
        CHECK(s.length == spec.out_length());
        CHECK(s.label == Label::bonafide);
    }
    for (const Sample& s : wc.attacks) CHECK(s.label == Label::attack);
}

TEST_CASE("spoof screening run on a small corpus") {
    const Corpus corpus = gen_corpus(6, 4, {2, 2, 2}, 7);
    SpoofRunConfig cfg;
    cfg.detector.kind = DetectorKind::knn_euclid;
    cfg.resamples = 3;
    cfg.window = {10, 50, 100, Representation::single};

    const EvalReport report = spoof_screening_run(corpus, cfg);
    CHECK(report.task == "spoof");
    CHECK(report.resamples.size() == 3);
    CHECK(report.config_hash.size() == 16);
    for (const ResampleResult& r : report.resamples) {
        CHECK(r.frr >= 0.0);
        CHECK(r.frr <= 100.0);
        CHECK(r.far >= 0.0);
        CHECK(r.far <= 100.0);
        CHECK(r.far_per_type.size() == 3);
        CHECK(r.threshold.direction == Direction::reject_above);
        CHECK_FALSE(r.curve.empty());
    }

    SUBCASE("report serialization is deterministic and runtime-free") {
        const EvalReport again = spoof_screening_run(corpus, cfg);
        CHECK(report.to_json().dump() == again.to_json().dump());
        CHECK(report.curves_csv() == again.curves_csv());
        CHECK(report.to_json().dump().find("runtime") == std::string::npos);
    }
    SUBCASE("parallel equals serial") {
        SpoofRunConfig par = cfg;
        par.jobs = 4;
        CHECK(spoof_screening_run(corpus, par).to_json().dump() == report.to_json().dump());
    }
    SUBCASE("seed changes the resample splits") {
        SpoofRunConfig other = cfg;
        other.seed = 8;
        CHECK(spoof_screening_run(corpus, other).to_json().dump() != report.to_json().dump());
    }
}

TEST_CASE("one-class run macro-averages across users") {
    const Corpus corpus = gen_corpus(4, 14, {0, 0, 0}, 7);
    OneClassRunConfig cfg;
    cfg.detector.kind = DetectorKind::knn_euclid;
    cfg.window = {10, 50, 100, Representation::single};

    const EvalReport report = oneclass_run(corpus, cfg);
    CHECK(report.task == "oneclass");
    CHECK(report.resamples.size() == 4);  // one per eligible user
    for (const ResampleResult& r : report.resamples) {
        CHECK(r.eer.has_value());
        CHECK(*r.eer >= 0.0);
        CHECK(*r.eer <= 100.0);
    }
    CHECK(report.eer_mean.has_value());

    // participants with too few recordings are not eligible
    const Corpus tiny = gen_corpus(2, 5, {0, 0, 0}, 7);  // < enroll+1 each
    CHECK_THROWS_AS(oneclass_run(tiny, cfg), ProtocolError);
}

TEST_CASE("classification verification run") {
    const Corpus corpus = gen_corpus(4, 10, {0, 0, 0}, 7);
    TscRunConfig cfg;
    cfg.classifier.kind = ClassifierKind::quant_et;
    cfg.classifier.n_trees = 30;
    cfg.window = {10, 50, 100, Representation::single};
    cfg.outer_folds = 2;
    cfg.inner_repeats = 2;

    const EvalReport report = tsc_verification_run(corpus, cfg);
    CHECK(report.task == "verify");
    CHECK(report.resamples.size() == 2);
    for (const ResampleResult& r : report.resamples) {
        CHECK(r.threshold.direction == Direction::reject_below);
        CHECK(r.eer.has_value());
    }

    // too few recordings per user to stratify across folds
    const Corpus tiny = gen_corpus(3, 1, {0, 0, 0}, 7);
    CHECK_THROWS_AS(tsc_verification_run(tiny, cfg), ProtocolError);
}

TEST_CASE("config_hash is stable and content-sensitive") {
    nlohmann::ordered_json a = {{"k", 1}, {"v", "x"}};
    nlohmann::ordered_json b = {{"k", 2}, {"v", "x"}};
    CHECK(config_hash(a) == config_hash(a));
    CHECK(config_hash(a) != config_hash(b));
    CHECK(config_hash(a).size() == 16);
}
