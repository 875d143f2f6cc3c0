#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "motiongate/classifiers.hpp"
#include "motiongate/errors.hpp"
#include "motiongate/rng.hpp"

using namespace motiongate;

namespace {

Sample class_sample(Rng& rng, int cls) {
    Sample s;
    s.length = 64;
    s.channels = 2;
    s.data.resize(128);
    // classes differ in level and slope, well separated against unit noise
    for (size_t c = 0; c < 2; ++c)
        for (size_t t = 0; t < 64; ++t)
            s.data[c * 64 + t] = 3.0 * cls + 0.05 * cls * static_cast<double>(t) + rng.normal() * 0.3;
    return s;
}

void make_training_set(Rng& rng, int n_classes, int per_class, std::vector<Sample>& samples,
                       std::vector<int>& labels) {
    for (int cls = 0; cls < n_classes; ++cls)
        for (int i = 0; i < per_class; ++i) {
            samples.push_back(class_sample(rng, cls));
            labels.push_back(100 + cls);  // non-contiguous ids
        }
}

}  // namespace

TEST_CASE("logit loss gradient matches central finite differences") {
    Rng rng(31);
    FeatureMatrix x;
    x.rows = 20;
    x.cols = 5;
    x.data.resize(x.rows * x.cols);
    for (double& v : x.data) v = rng.normal();
    std::vector<int> y(x.rows);
    for (int& v : y) v = static_cast<int>(rng.uniform_int(3));

    const size_t dim = 3 * x.cols + 3;
    std::vector<double> params(dim);
    for (double& v : params) v = rng.normal() * 0.5;

    for (double l2 : {0.0, 0.7}) {
        std::vector<double> grad;
        logit_loss_grad(x, y, 3, l2, params, &grad);
        REQUIRE(grad.size() == dim);
        const double h = 1e-6;
        for (size_t i = 0; i < dim; ++i) {
            std::vector<double> plus = params, minus = params;
            plus[i] += h;
            minus[i] -= h;
            const double fd = (logit_loss_grad(x, y, 3, l2, plus, nullptr) -
                               logit_loss_grad(x, y, 3, l2, minus, nullptr)) /
                              (2.0 * h);
            CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("classifiers separate well-spread classes") {
    Rng rng(5);
    std::vector<Sample> samples;
    std::vector<int> labels;
    make_training_set(rng, 3, 8, samples, labels);

    for (ClassifierKind kind : {ClassifierKind::quant_et, ClassifierKind::kernel_logit}) {
        CAPTURE(to_string(kind));
        ClassifierConfig cfg;
        cfg.kind = kind;
        cfg.n_trees = 100;
        cfg.n_kernels = 128;
        const FittedClassifier clf = FittedClassifier::fit(samples, labels, cfg, 7);

        CHECK(clf.class_list() == std::vector<int>{100, 101, 102});

        int correct = 0;
        for (int cls = 0; cls < 3; ++cls)
            for (int i = 0; i < 5; ++i) {
                const Sample probe = class_sample(rng, cls);
                const std::vector<double> p = clf.predict_proba(probe);
                REQUIRE(p.size() == 3);
                double sum = 0.0;
                for (double v : p) {
                    CHECK(v >= 0.0);
                    sum += v;
                }
                CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
                const size_t arg = std::max_element(p.begin(), p.end()) - p.begin();
                if (static_cast<int>(arg) == cls) ++correct;
            }
        CHECK(correct >= 13);  // out of 15 held-out probes
    }
}

TEST_CASE("verification_score returns the claimed class probability") {
    Rng rng(8);
    std::vector<Sample> samples;
    std::vector<int> labels;
    make_training_set(rng, 3, 6, samples, labels);
    ClassifierConfig cfg;
    cfg.n_trees = 50;
    const FittedClassifier clf = FittedClassifier::fit(samples, labels, cfg, 7);

    const Sample probe = class_sample(rng, 1);
    const std::vector<double> p = clf.predict_proba(probe);
    CHECK(clf.verification_score(probe, 100) == p[0]);
    CHECK(clf.verification_score(probe, 101) == p[1]);
    CHECK(clf.verification_score(probe, 102) == p[2]);
    CHECK_THROWS_AS(clf.verification_score(probe, 999), ConfigError);
}

TEST_CASE("class order does not depend on training sample order") {
    Rng rng(9);
    std::vector<Sample> samples;
    std::vector<int> labels;
    make_training_set(rng, 3, 4, samples, labels);
    // reversed presentation of the same set
    std::vector<Sample> rev_samples(samples.rbegin(), samples.rend());
    std::vector<int> rev_labels(labels.rbegin(), labels.rend());

    ClassifierConfig cfg;
    cfg.n_trees = 20;
    const FittedClassifier a = FittedClassifier::fit(samples, labels, cfg, 7);
    const FittedClassifier b = FittedClassifier::fit(rev_samples, rev_labels, cfg, 7);
    CHECK(a.class_list() == b.class_list());
}

TEST_CASE("classifier fit-serialize-reload-score equals fit-score") {
    Rng rng(12);
    std::vector<Sample> samples;
    std::vector<int> labels;
    make_training_set(rng, 3, 6, samples, labels);

    for (ClassifierKind kind : {ClassifierKind::quant_et, ClassifierKind::kernel_logit}) {
        CAPTURE(to_string(kind));
        ClassifierConfig cfg;
        cfg.kind = kind;
        cfg.n_trees = 50;
        cfg.n_kernels = 128;
        const FittedClassifier clf = FittedClassifier::fit(samples, labels, cfg, 7);

        nlohmann::ordered_json j;
        to_json(j, clf);
        const nlohmann::ordered_json parsed = nlohmann::ordered_json::parse(j.dump());
        FittedClassifier loaded;
        from_json(parsed, loaded);

        for (int cls = 0; cls < 3; ++cls) {
            const Sample probe = class_sample(rng, cls);
            const std::vector<double> p1 = clf.predict_proba(probe);
            const std::vector<double> p2 = loaded.predict_proba(probe);
            REQUIRE(p1.size() == p2.size());
            for (size_t i = 0; i < p1.size(); ++i) CHECK(std::abs(p1[i] - p2[i]) <= 1e-12);
        }
    }
}

TEST_CASE("classifier fit preconditions") {
    Rng rng(3);
    std::vector<Sample> samples;
    std::vector<int> labels;
    make_training_set(rng, 2, 4, samples, labels);
    ClassifierConfig cfg;
    cfg.n_trees = 10;

    SUBCASE("label/sample count mismatch") {
        std::vector<int> short_labels(labels.begin(), labels.end() - 1);
        CHECK_THROWS_AS(FittedClassifier::fit(samples, short_labels, cfg, 7), ShapeMismatchError);
    }
    SUBCASE("single class rejected") {
        std::vector<int> one(labels.size(), 5);
        CHECK_THROWS_AS(FittedClassifier::fit(samples, one, cfg, 7), TooFewSamplesError);
    }
    SUBCASE("singleton class rejected") {
        std::vector<Sample> s = samples;
        std::vector<int> l = labels;
        s.push_back(class_sample(rng, 2));
        l.push_back(999);
        CHECK_THROWS_AS(FittedClassifier::fit(s, l, cfg, 7), TooFewSamplesError);
    }
    SUBCASE("probe shape checked") {
        const FittedClassifier clf = FittedClassifier::fit(samples, labels, cfg, 7);
        Sample wrong;
        wrong.length = 32;
        wrong.channels = 2;
        wrong.data.assign(64, 0.0);
        CHECK_THROWS_AS(clf.predict_proba(wrong), ShapeMismatchError);
    }
}
