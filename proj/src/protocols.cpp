#include "motiongate/protocols.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "motiongate/errors.hpp"
#include "motiongate/rng.hpp"

namespace motiongate {

namespace {

constexpr const char* kAttackTypeNames[3] = {"stationary", "handheld", "temporal_shift"};

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Deterministic work-unit execution: results land in index order whether the
// units run serially or on a pool.
void run_units(int n, int jobs, const std::function<void(int)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min(jobs, n); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// Candidate thresholds: all distinct scores plus midpoints between
// consecutive distinct scores, ascending.
std::vector<double> sweep_candidates(std::vector<double> scores) {
    std::sort(scores.begin(), scores.end());
    scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
    std::vector<double> out;
    out.reserve(scores.size() * 2);
    for (size_t i = 0; i < scores.size(); ++i) {
        out.push_back(scores[i]);
        if (i + 1 < scores.size()) out.push_back(0.5 * (scores[i] + scores[i + 1]));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// Threshold sweep curve, verification convention (higher = more genuine,
// reject below t). For anomaly scores pass negated values.
std::vector<CurvePoint> sweep_curve(const std::vector<double>& genuine,
                                    const std::vector<double>& impostor) {
    std::vector<double> pool = genuine;
    pool.insert(pool.end(), impostor.begin(), impostor.end());
    std::vector<CurvePoint> curve;
    for (double t : sweep_candidates(std::move(pool))) {
        CurvePoint p;
        p.threshold = t;
        p.frr = 100.0 * static_cast<double>(std::count_if(genuine.begin(), genuine.end(),
                                                          [&](double s) { return s < t; })) /
                static_cast<double>(genuine.size());
        p.far = 100.0 * static_cast<double>(std::count_if(impostor.begin(), impostor.end(),
                                                          [&](double s) { return s >= t; })) /
                static_cast<double>(impostor.size());
        curve.push_back(p);
    }
    return curve;
}

uint64_t unit_seed(uint64_t master, uint64_t tag, uint64_t index) {
    return Rng::derive(master ^ (tag * 0x9e3779b97f4a7c15ULL), index).next_u64();
}

}  // namespace

std::string to_string(Direction d) {
    return d == Direction::reject_above ? "reject_above" : "reject_below";
}

Threshold calibrate_threshold(std::vector<double> scores, double percentile, Direction direction) {
    if (scores.empty()) throw ProtocolError("empty_scores", "cannot calibrate on no scores");
    Threshold t;
    t.direction = direction;
    t.percentile = percentile;
    t.n_scores = scores.size();
    std::sort(scores.begin(), scores.end());
    if (scores.front() == scores.back()) {
        t.value = scores.front();
        t.degenerate = true;
        return t;
    }
    if (scores.size() < 10) {
        t.fallback = true;
        t.value = direction == Direction::reject_above ? scores.back() : scores.front();
        return t;
    }
    const double pos = percentile / 100.0 * static_cast<double>(scores.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    t.value = (lo + 1 < scores.size()) ? scores[lo] + frac * (scores[lo + 1] - scores[lo])
                                       : scores[lo];
    return t;
}

EerResult compute_eer(const std::vector<double>& genuine, const std::vector<double>& impostor) {
    if (genuine.empty() || impostor.empty())
        throw ProtocolError("empty_scores", "compute_eer needs both genuine and impostor scores");
    std::vector<double> pool = genuine;
    pool.insert(pool.end(), impostor.begin(), impostor.end());

    EerResult best;
    double best_gap = std::numeric_limits<double>::infinity();
    for (double t : sweep_candidates(std::move(pool))) {
        const double frr = static_cast<double>(std::count_if(genuine.begin(), genuine.end(),
                                                             [&](double s) { return s < t; })) /
                           static_cast<double>(genuine.size());
        const double far = static_cast<double>(std::count_if(impostor.begin(), impostor.end(),
                                                             [&](double s) { return s >= t; })) /
                           static_cast<double>(impostor.size());
        const double gap = std::abs(frr - far);
        if (gap < best_gap) {  // ties keep the lower threshold seen first
            best_gap = gap;
            best.eer = 0.5 * (frr + far);
            best.threshold = t;
        }
    }
    return best;
}

GroupSplit group_split(const std::vector<int>& participants, double train_fraction, uint64_t seed) {
    std::vector<int> ids = participants;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.size() < 2) throw ProtocolError("too_few_participants", "group split needs >= 2 participants");

    Rng rng(seed);
    for (size_t i = ids.size(); i > 1; --i) {
        const size_t j = rng.uniform_int(i);
        std::swap(ids[i - 1], ids[j]);
    }
    const size_t n_train = std::clamp<size_t>(
        static_cast<size_t>(std::llround(train_fraction * static_cast<double>(ids.size()))), 1,
        ids.size() - 1);
    GroupSplit split;
    split.train_participants.assign(ids.begin(), ids.begin() + n_train);
    split.test_participants.assign(ids.begin() + n_train, ids.end());
    std::sort(split.train_participants.begin(), split.train_participants.end());
    std::sort(split.test_participants.begin(), split.test_participants.end());
    return split;
}

WindowedCorpus window_corpus(const Corpus& corpus, const WindowSpec& spec,
                             const ChannelSelector& selector, const PreprocessOptions& opts) {
    WindowedCorpus out;
    for (const MotionTrace& trace : corpus.traces) {
        try {
            Sample s = preprocess_trace(trace, spec, selector, opts);
            if (trace.label == Label::bonafide)
                out.bonafide.push_back(std::move(s));
            else
                out.attacks.push_back(std::move(s));
        } catch (const WindowOutOfRangeError&) {
            out.excluded.push_back(trace.trace_id);
        }
    }
    return out;
}

std::string config_hash(const nlohmann::ordered_json& config) {
    const std::string s = config.dump();
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// --- report rendering -----------------------------------------------------

namespace {

nlohmann::ordered_json threshold_to_json(const Threshold& t) {
    nlohmann::ordered_json j;
    j["value"] = t.value;
    j["direction"] = to_string(t.direction);
    j["degenerate"] = t.degenerate;
    j["fallback"] = t.fallback;
    j["percentile"] = t.percentile;
    j["n_scores"] = t.n_scores;
    return j;
}

}  // namespace

nlohmann::ordered_json EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["task"] = task;
    j["config"] = config;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    nlohmann::ordered_json agg;
    agg["frr_mean"] = frr_mean;
    agg["frr_std"] = frr_std;
    agg["far_mean"] = far_mean;
    agg["far_std"] = far_std;
    if (eer_mean) {
        agg["eer_mean"] = *eer_mean;
        agg["eer_std"] = *eer_std;
    }
    if (!far_per_type_mean.empty()) {
        nlohmann::ordered_json types;
        for (const char* name : kAttackTypeNames)
            if (far_per_type_mean.count(name)) types[name] = far_per_type_mean.at(name);
        agg["far_per_type_mean"] = types;
    }
    j["aggregate"] = agg;
    nlohmann::ordered_json rs = nlohmann::ordered_json::array();
    for (const ResampleResult& r : resamples) {
        nlohmann::ordered_json rj;
        rj["frr"] = r.frr;
        rj["far"] = r.far;
        if (r.eer) rj["eer"] = *r.eer;
        if (!r.far_per_type.empty()) {
            nlohmann::ordered_json types;
            for (const char* name : kAttackTypeNames)
                if (r.far_per_type.count(name)) types[name] = r.far_per_type.at(name);
            rj["far_per_type"] = types;
        }
        rj["threshold"] = threshold_to_json(r.threshold);
        rj["detail"] = r.detail;
        rs.push_back(std::move(rj));
    }
    j["resamples"] = std::move(rs);
    j["excluded_traces"] = excluded_traces;
    j["warnings"] = warnings;
    return j;
}

std::string EvalReport::to_markdown() const {
    char buf[256];
    std::ostringstream out;
    out << "# " << task << " report\n\n";
    out << "seed " << seed << ", config " << config_hash << "\n\n";
    out << "| Metric | Mean (%) | Std |\n|---|---|---|\n";
    std::snprintf(buf, sizeof(buf), "| FRR | %.2f | %.2f |\n", frr_mean, frr_std);
    out << buf;
    std::snprintf(buf, sizeof(buf), "| FAR | %.2f | %.2f |\n", far_mean, far_std);
    out << buf;
    if (eer_mean) {
        std::snprintf(buf, sizeof(buf), "| EER | %.2f | %.2f |\n", *eer_mean, *eer_std);
        out << buf;
    }
    if (!far_per_type_mean.empty()) {
        out << "\n| Attack type | FAR (%) |\n|---|---|\n";
        for (const char* name : kAttackTypeNames) {
            if (!far_per_type_mean.count(name)) continue;
            std::snprintf(buf, sizeof(buf), "| %s | %.1f |\n", name, far_per_type_mean.at(name));
            out << buf;
        }
    }
    if (!excluded_traces.empty()) out << "\nexcluded traces: " << excluded_traces.size() << "\n";
    for (const auto& w : warnings) out << "\nwarning: " << w << "\n";
    return out.str();
}

std::string EvalReport::curves_csv() const {
    std::string out = "resample,threshold,frr,far\n";
    char buf[128];
    for (size_t r = 0; r < resamples.size(); ++r) {
        for (const CurvePoint& p : resamples[r].curve) {
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", r, p.threshold, p.frr, p.far);
            out += buf;
        }
    }
    return out;
}

// --- spoof screening ------------------------------------------------------

EvalReport spoof_screening_run(const Corpus& corpus, const SpoofRunConfig& config) {
    const ChannelSelector selector = ChannelSelector::builtin(config.selector);
    const WindowedCorpus windows = window_corpus(corpus, config.window, selector);
    if (windows.attacks.empty())
        throw ProtocolError("empty_attack_set", "spoof screening requires attack traces");
    if (windows.bonafide.empty())
        throw ProtocolError("empty_bonafide_set", "spoof screening requires bona fide traces");

    std::vector<int> participants;
    for (const Sample& s : windows.bonafide)
        if (s.participant_id) participants.push_back(*s.participant_id);

    EvalReport report;
    report.task = "spoof";
    report.seed = config.seed;
    report.excluded_traces = windows.excluded;
    report.resamples.resize(config.resamples);

    std::atomic<long> probe_count{0};
    std::atomic<long> probe_ns{0};

    run_units(config.resamples, config.jobs, [&](int r) {
        const uint64_t rs = unit_seed(config.seed, 1, static_cast<uint64_t>(r));
        const GroupSplit split = group_split(participants, config.train_fraction, rs);
        const std::set<int> train_set(split.train_participants.begin(), split.train_participants.end());
        const std::set<int> test_set(split.test_participants.begin(), split.test_participants.end());

        std::vector<Sample> train, test;
        for (const Sample& s : windows.bonafide) {
            if (train_set.count(*s.participant_id))
                train.push_back(s);
            else
                test.push_back(s);
        }

        // leakage guard: participant disjointness, no attacks in training
        for (const Sample& s : train)
            if (test_set.count(*s.participant_id) || s.label != Label::bonafide)
                throw ProtocolError("leakage", "training partition contaminated");

        // inner out-of-fold calibration over the training participants
        std::vector<int> calib_order = split.train_participants;
        Rng fold_rng(unit_seed(config.seed, 2, static_cast<uint64_t>(r)));
        for (size_t i = calib_order.size(); i > 1; --i)
            std::swap(calib_order[i - 1], calib_order[fold_rng.uniform_int(i)]);
        const int folds = std::min<int>(config.calib_folds, static_cast<int>(calib_order.size()));
        std::map<int, int> fold_by_id;
        for (size_t i = 0; i < calib_order.size(); ++i) fold_by_id[calib_order[i]] = static_cast<int>(i % folds);

        std::vector<double> calib_scores;
        for (int f = 0; f < folds; ++f) {
            std::vector<Sample> fit_part, score_part;
            for (const Sample& s : train) {
                if (fold_by_id[*s.participant_id] == f)
                    score_part.push_back(s);
                else
                    fit_part.push_back(s);
            }
            if (fit_part.empty() || score_part.empty()) continue;
            const FittedDetector det =
                FittedDetector::fit(fit_part, config.detector, unit_seed(config.seed, 3, r * 100 + f));
            for (const Sample& s : score_part) calib_scores.push_back(det.score(s));
        }

        ResampleResult& res = report.resamples[r];
        res.threshold = calibrate_threshold(calib_scores, config.percentile, Direction::reject_above);
        const double tau = res.threshold.value;

        const FittedDetector det =
            FittedDetector::fit(train, config.detector, unit_seed(config.seed, 4, r));

        const auto t0 = std::chrono::steady_clock::now();
        std::vector<double> bona_scores, attack_scores;
        for (const Sample& s : test) bona_scores.push_back(det.score(s));
        for (const Sample& s : windows.attacks) attack_scores.push_back(det.score(s));
        const auto t1 = std::chrono::steady_clock::now();
        probe_count += static_cast<long>(bona_scores.size() + attack_scores.size());
        probe_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();

        // reject when score > tau (strict on the reject side)
        res.frr = 100.0 * static_cast<double>(std::count_if(bona_scores.begin(), bona_scores.end(),
                                                            [&](double s) { return s > tau; })) /
                  static_cast<double>(bona_scores.size());

        std::map<std::string, std::pair<int, int>> type_counts;  // accepted, total
        for (size_t i = 0; i < windows.attacks.size(); ++i) {
            const std::string type = to_string(windows.attacks[i].attack_type);
            auto& tc = type_counts[type];
            if (attack_scores[i] <= tau) ++tc.first;
            ++tc.second;
        }
        double far_sum = 0.0;
        for (const auto& [type, tc] : type_counts) {
            const double far = 100.0 * tc.first / tc.second;
            res.far_per_type[type] = far;
            far_sum += far;
        }
        // overall FAR: equal-weight mean across attack types
        res.far = far_sum / static_cast<double>(type_counts.size());

        // negate anomaly scores into the higher-is-genuine convention
        std::vector<double> neg_bona, neg_attack;
        for (double s : bona_scores) neg_bona.push_back(-s);
        for (double s : attack_scores) neg_attack.push_back(-s);
        res.curve = sweep_curve(neg_bona, neg_attack);
        for (CurvePoint& p : res.curve) p.threshold = -p.threshold;

        res.detail["train_participants"] = split.train_participants;
        res.detail["test_participants"] = split.test_participants;
        res.detail["n_train"] = train.size();
        res.detail["n_test"] = test.size();
        res.detail["n_calibration_scores"] = calib_scores.size();
    });

    std::vector<double> frrs, fars;
    std::map<std::string, std::vector<double>> type_fars;
    for (const ResampleResult& r : report.resamples) {
        frrs.push_back(r.frr);
        fars.push_back(r.far);
        for (const auto& [type, far] : r.far_per_type) type_fars[type].push_back(far);
    }
    report.frr_mean = mean_of(frrs);
    report.frr_std = std_of(frrs);
    report.far_mean = mean_of(fars);
    report.far_std = std_of(fars);
    for (const auto& [type, v] : type_fars) report.far_per_type_mean[type] = mean_of(v);
    report.runtime_ms_per_probe =
        probe_count > 0 ? static_cast<double>(probe_ns) / 1e6 / static_cast<double>(probe_count) : 0.0;

    nlohmann::ordered_json cfg;
    cfg["task"] = "spoof";
    cfg["detector"] = to_string(config.detector.kind);
    cfg["selector"] = config.selector;
    cfg["window"] = {config.window.k_open, config.window.pre, config.window.post};
    cfg["representation"] = to_string(config.window.representation);
    cfg["resamples"] = config.resamples;
    cfg["percentile"] = config.percentile;
    cfg["train_fraction"] = config.train_fraction;
    cfg["calib_folds"] = config.calib_folds;
    cfg["seed"] = config.seed;
    report.config = cfg;
    report.config_hash = motiongate::config_hash(cfg);
    return report;
}

// --- 10-shot one-class verification ---------------------------------------

EvalReport oneclass_run(const Corpus& corpus, const OneClassRunConfig& config) {
    const ChannelSelector selector = ChannelSelector::builtin(config.selector);
    const WindowedCorpus windows = window_corpus(corpus, config.window, selector);

    // corpus order defines enrollment order per user
    std::map<int, std::vector<size_t>> by_user;
    std::vector<int> user_order;
    for (size_t i = 0; i < windows.bonafide.size(); ++i) {
        const int pid = *windows.bonafide[i].participant_id;
        if (!by_user.count(pid)) user_order.push_back(pid);
        by_user[pid].push_back(i);
    }

    EvalReport report;
    report.task = "oneclass";
    report.seed = config.seed;
    report.excluded_traces = windows.excluded;

    std::vector<int> eligible;
    for (int pid : user_order) {
        if (static_cast<int>(by_user[pid].size()) >= config.enroll + 1)
            eligible.push_back(pid);
        else
            report.warnings.push_back("participant " + std::to_string(pid) + " excluded: fewer than " +
                                      std::to_string(config.enroll + 1) + " sequences");
    }
    if (eligible.empty()) throw ProtocolError("no_eligible_users", "no participant has enough sequences");

    report.resamples.resize(eligible.size());
    std::atomic<long> probe_count{0};
    std::atomic<long> probe_ns{0};

    run_units(static_cast<int>(eligible.size()), config.jobs, [&](int u) {
        const int pid = eligible[u];
        const auto& idx = by_user[pid];
        std::vector<Sample> enroll, genuine;
        for (size_t i = 0; i < idx.size(); ++i) {
            if (static_cast<int>(i) < config.enroll)
                enroll.push_back(windows.bonafide[idx[i]]);
            else
                genuine.push_back(windows.bonafide[idx[i]]);
        }

        // inner cross-validation over the enrollment set
        std::vector<double> calib_scores;
        for (int rep = 0; rep < config.repeats; ++rep) {
            Rng rng(unit_seed(config.seed, 10, static_cast<uint64_t>(u) * 100 + rep));
            std::vector<size_t> order(enroll.size());
            std::iota(order.begin(), order.end(), 0);
            for (size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[rng.uniform_int(i)]);
            for (int f = 0; f < config.inner_folds; ++f) {
                std::vector<Sample> fit_part, score_part;
                for (size_t i = 0; i < order.size(); ++i) {
                    if (static_cast<int>(i % config.inner_folds) == f)
                        score_part.push_back(enroll[order[i]]);
                    else
                        fit_part.push_back(enroll[order[i]]);
                }
                if (static_cast<int>(fit_part.size()) < std::max(config.detector.k, 2)) continue;
                const FittedDetector det = FittedDetector::fit(
                    fit_part, config.detector, unit_seed(config.seed, 11, u * 1000 + rep * 10 + f));
                for (const Sample& s : score_part) calib_scores.push_back(det.score(s));
            }
        }

        ResampleResult& res = report.resamples[u];
        res.threshold = calibrate_threshold(calib_scores, config.percentile, Direction::reject_above);
        const double tau = res.threshold.value;

        const FittedDetector det =
            FittedDetector::fit(enroll, config.detector, unit_seed(config.seed, 12, u));

        const auto t0 = std::chrono::steady_clock::now();
        std::vector<double> genuine_scores, impostor_scores;
        for (const Sample& s : genuine) genuine_scores.push_back(det.score(s));
        for (int other : eligible) {
            if (other == pid) continue;
            for (size_t i : by_user[other]) impostor_scores.push_back(det.score(windows.bonafide[i]));
        }
        const auto t1 = std::chrono::steady_clock::now();
        probe_count += static_cast<long>(genuine_scores.size() + impostor_scores.size());
        probe_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();

        res.frr = 100.0 *
                  static_cast<double>(std::count_if(genuine_scores.begin(), genuine_scores.end(),
                                                    [&](double s) { return s > tau; })) /
                  static_cast<double>(genuine_scores.size());
        res.far = 100.0 *
                  static_cast<double>(std::count_if(impostor_scores.begin(), impostor_scores.end(),
                                                    [&](double s) { return s <= tau; })) /
                  static_cast<double>(impostor_scores.size());

        std::vector<double> neg_gen, neg_imp;
        for (double s : genuine_scores) neg_gen.push_back(-s);
        for (double s : impostor_scores) neg_imp.push_back(-s);
        const EerResult eer = compute_eer(neg_gen, neg_imp);
        res.eer = 100.0 * eer.eer;
        res.curve = sweep_curve(neg_gen, neg_imp);
        for (CurvePoint& p : res.curve) p.threshold = -p.threshold;

        res.detail["participant"] = pid;
        res.detail["n_enroll"] = enroll.size();
        res.detail["n_genuine_probes"] = genuine_scores.size();
        res.detail["n_impostor_probes"] = impostor_scores.size();
    });

    std::vector<double> frrs, fars, eers;
    for (const ResampleResult& r : report.resamples) {
        frrs.push_back(r.frr);
        fars.push_back(r.far);
        if (r.eer) eers.push_back(*r.eer);
    }
    // macro-average across users
    report.frr_mean = mean_of(frrs);
    report.frr_std = std_of(frrs);
    report.far_mean = mean_of(fars);
    report.far_std = std_of(fars);
    if (!eers.empty()) {
        report.eer_mean = mean_of(eers);
        report.eer_std = std_of(eers);
    }
    report.runtime_ms_per_probe =
        probe_count > 0 ? static_cast<double>(probe_ns) / 1e6 / static_cast<double>(probe_count) : 0.0;

    nlohmann::ordered_json cfg;
    cfg["task"] = "oneclass";
    cfg["detector"] = to_string(config.detector.kind);
    cfg["selector"] = config.selector;
    cfg["window"] = {config.window.k_open, config.window.pre, config.window.post};
    cfg["representation"] = to_string(config.window.representation);
    cfg["enroll"] = config.enroll;
    cfg["inner_folds"] = config.inner_folds;
    cfg["repeats"] = config.repeats;
    cfg["percentile"] = config.percentile;
    cfg["seed"] = config.seed;
    report.config = cfg;
    report.config_hash = motiongate::config_hash(cfg);
    return report;
}

// --- classification-based verification ------------------------------------

namespace {

// Stratified fold assignment: per class, shuffled round-robin.
std::vector<int> stratified_folds(const std::vector<int>& labels, int n_folds, Rng& rng) {
    std::map<int, std::vector<size_t>> by_class;
    for (size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    std::vector<int> fold(labels.size(), 0);
    for (auto& [cls, idx] : by_class) {
        for (size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
        for (size_t i = 0; i < idx.size(); ++i) fold[idx[i]] = static_cast<int>(i % n_folds);
    }
    return fold;
}

}  // namespace

EvalReport tsc_verification_run(const Corpus& corpus, const TscRunConfig& config) {
    const ChannelSelector selector = ChannelSelector::builtin(config.selector);
    const WindowedCorpus windows = window_corpus(corpus, config.window, selector);

    std::vector<int> labels;
    for (const Sample& s : windows.bonafide) {
        if (!s.participant_id) throw ProtocolError("unlabeled", "bonafide trace without participant id");
        labels.push_back(*s.participant_id);
    }
    if (labels.empty()) throw ProtocolError("empty_bonafide_set", "no bona fide traces");

    Rng outer_rng(unit_seed(config.seed, 20, 0));
    const std::vector<int> outer_fold = stratified_folds(labels, config.outer_folds, outer_rng);

    // every class must appear in every outer training fold
    std::set<int> class_set(labels.begin(), labels.end());
    for (int f = 0; f < config.outer_folds; ++f) {
        std::set<int> train_classes;
        for (size_t i = 0; i < labels.size(); ++i)
            if (outer_fold[i] != f) train_classes.insert(labels[i]);
        if (train_classes != class_set)
            throw ProtocolError("stratification",
                                "class missing from outer training fold " + std::to_string(f));
    }

    EvalReport report;
    report.task = "verify";
    report.seed = config.seed;
    report.excluded_traces = windows.excluded;
    report.resamples.resize(config.outer_folds);

    std::atomic<long> probe_count{0};
    std::atomic<long> probe_ns{0};

    run_units(config.outer_folds, config.jobs, [&](int f) {
        std::vector<Sample> train, test;
        std::vector<int> train_labels, test_labels;
        for (size_t i = 0; i < windows.bonafide.size(); ++i) {
            if (outer_fold[i] == f) {
                test.push_back(windows.bonafide[i]);
                test_labels.push_back(labels[i]);
            } else {
                train.push_back(windows.bonafide[i]);
                train_labels.push_back(labels[i]);
            }
        }

        std::map<int, int> train_class_count;
        for (int l : train_labels) ++train_class_count[l];
        int min_count = std::numeric_limits<int>::max();
        for (const auto& [cls, n] : train_class_count) min_count = std::min(min_count, n);
        const int inner_folds = min_count >= 3 ? std::min(3, config.max_inner_folds) : 2;

        // inner out-of-fold genuine scores calibrate the global threshold
        std::vector<double> calib_genuine;
        for (int rep = 0; rep < config.inner_repeats; ++rep) {
            Rng rng(unit_seed(config.seed, 21, static_cast<uint64_t>(f) * 100 + rep));
            const std::vector<int> inner_fold = stratified_folds(train_labels, inner_folds, rng);
            for (int g = 0; g < inner_folds; ++g) {
                std::vector<Sample> fit_part;
                std::vector<int> fit_labels;
                std::vector<size_t> held;
                for (size_t i = 0; i < train.size(); ++i) {
                    if (inner_fold[i] == g) {
                        held.push_back(i);
                    } else {
                        fit_part.push_back(train[i]);
                        fit_labels.push_back(train_labels[i]);
                    }
                }
                const FittedClassifier clf =
                    FittedClassifier::fit(fit_part, fit_labels, config.classifier,
                                          unit_seed(config.seed, 22, f * 1000 + rep * 10 + g));
                for (size_t i : held)
                    calib_genuine.push_back(clf.verification_score(train[i], train_labels[i]));
            }
        }

        ResampleResult& res = report.resamples[f];
        res.threshold =
            calibrate_threshold(calib_genuine, config.target_frr_percent, Direction::reject_below);
        const double tau = res.threshold.value;

        const FittedClassifier clf =
            FittedClassifier::fit(train, train_labels, config.classifier, unit_seed(config.seed, 23, f));

        const auto t0 = std::chrono::steady_clock::now();
        std::vector<std::vector<double>> probas;
        for (const Sample& s : test) probas.push_back(clf.predict_proba(s));
        const auto t1 = std::chrono::steady_clock::now();
        probe_count += static_cast<long>(test.size());
        probe_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();

        const std::vector<int>& classes = clf.class_list();

        // one genuine trial per test sequence, impostor trials for every
        // other identity
        std::vector<double> genuine_trials, impostor_trials;
        std::map<int, std::pair<std::vector<double>, std::vector<double>>> per_user;
        for (size_t i = 0; i < test.size(); ++i) {
            for (size_t c = 0; c < classes.size(); ++c) {
                const double score = probas[i][c];
                if (classes[c] == test_labels[i]) {
                    genuine_trials.push_back(score);
                    per_user[classes[c]].first.push_back(score);
                } else {
                    impostor_trials.push_back(score);
                    per_user[classes[c]].second.push_back(score);
                }
            }
        }

        res.frr = 100.0 *
                  static_cast<double>(std::count_if(genuine_trials.begin(), genuine_trials.end(),
                                                    [&](double s) { return s < tau; })) /
                  static_cast<double>(genuine_trials.size());
        res.far = 100.0 *
                  static_cast<double>(std::count_if(impostor_trials.begin(), impostor_trials.end(),
                                                    [&](double s) { return s >= tau; })) /
                  static_cast<double>(impostor_trials.size());

        // per-user EER, macro-averaged
        std::vector<double> user_eers;
        nlohmann::ordered_json per_user_json;
        for (const auto& [uid, trials] : per_user) {
            if (trials.first.empty() || trials.second.empty()) continue;
            const EerResult e = compute_eer(trials.first, trials.second);
            user_eers.push_back(100.0 * e.eer);
            per_user_json[std::to_string(uid)] = 100.0 * e.eer;
        }
        res.eer = mean_of(user_eers);
        res.curve = sweep_curve(genuine_trials, impostor_trials);

        res.detail["fold"] = f;
        res.detail["inner_folds"] = inner_folds;
        res.detail["n_train"] = train.size();
        res.detail["n_test"] = test.size();
        res.detail["n_calibration_scores"] = calib_genuine.size();
        res.detail["per_user_eer"] = per_user_json;
    });

    std::vector<double> frrs, fars, eers;
    for (const ResampleResult& r : report.resamples) {
        frrs.push_back(r.frr);
        fars.push_back(r.far);
        if (r.eer) eers.push_back(*r.eer);
    }
    report.frr_mean = mean_of(frrs);
    report.frr_std = std_of(frrs);
    report.far_mean = mean_of(fars);
    report.far_std = std_of(fars);
    report.eer_mean = mean_of(eers);
    report.eer_std = std_of(eers);
    report.runtime_ms_per_probe =
        probe_count > 0 ? static_cast<double>(probe_ns) / 1e6 / static_cast<double>(probe_count) : 0.0;

    nlohmann::ordered_json cfg;
    cfg["task"] = "verify";
    cfg["classifier"] = to_string(config.classifier.kind);
    cfg["selector"] = config.selector;
    cfg["window"] = {config.window.k_open, config.window.pre, config.window.post};
    cfg["representation"] = to_string(config.window.representation);
    cfg["outer_folds"] = config.outer_folds;
    cfg["max_inner_folds"] = config.max_inner_folds;
    cfg["inner_repeats"] = config.inner_repeats;
    cfg["target_frr_percent"] = config.target_frr_percent;
    cfg["seed"] = config.seed;
    report.config = cfg;
    report.config_hash = motiongate::config_hash(cfg);
    return report;
}

}  // namespace motiongate
