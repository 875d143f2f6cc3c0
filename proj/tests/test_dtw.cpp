#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "motiongate/dtw.hpp"
#include "motiongate/errors.hpp"
#include "motiongate/rng.hpp"

using namespace motiongate;

namespace {

Sample random_sample(size_t length, size_t channels, Rng& rng) {
    Sample s;
    s.length = length;
    s.channels = channels;
    s.data.resize(length * channels);
    for (double& v : s.data) v = rng.uniform(-3.0, 3.0);
    return s;
}

double row_cost(const Sample& a, size_t i, const Sample& b, size_t j) {
    double d = 0.0;
    for (size_t c = 0; c < a.channels; ++c) {
        const double diff = a.at(i, c) - b.at(j, c);
        d += diff * diff;
    }
    return std::sqrt(d);
}

// Independent top-down oracle over the alignment graph.
double dtw_oracle_rec(const Sample& a, const Sample& b, size_t i, size_t j,
                      std::map<std::pair<size_t, size_t>, double>& memo) {
    if (i == 0 && j == 0) return row_cost(a, 0, b, 0);
    const auto key = std::make_pair(i, j);
    const auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    double best = std::numeric_limits<double>::infinity();
    if (i > 0) best = std::min(best, dtw_oracle_rec(a, b, i - 1, j, memo));
    if (j > 0) best = std::min(best, dtw_oracle_rec(a, b, i, j - 1, memo));
    if (i > 0 && j > 0) best = std::min(best, dtw_oracle_rec(a, b, i - 1, j - 1, memo));
    const double v = best + row_cost(a, i, b, j);
    memo[key] = v;
    return v;
}

double dtw_oracle(const Sample& a, const Sample& b) {
    std::map<std::pair<size_t, size_t>, double> memo;
    return dtw_oracle_rec(a, b, a.length - 1, b.length - 1, memo);
}

// True exhaustive enumeration of every monotone warping path (no memo),
// feasible only for tiny lengths.
void enumerate_paths(const Sample& a, const Sample& b, size_t i, size_t j, double cost,
                     double& best) {
    cost += row_cost(a, i, b, j);
    if (cost >= best) return;
    if (i + 1 == a.length && j + 1 == b.length) {
        best = cost;
        return;
    }
    if (i + 1 < a.length) enumerate_paths(a, b, i + 1, j, cost, best);
    if (j + 1 < b.length) enumerate_paths(a, b, i, j + 1, cost, best);
    if (i + 1 < a.length && j + 1 < b.length) enumerate_paths(a, b, i + 1, j + 1, cost, best);
}

double dtw_exhaustive(const Sample& a, const Sample& b) {
    double best = std::numeric_limits<double>::infinity();
    enumerate_paths(a, b, 0, 0, 0.0, best);
    return best;
}

}  // namespace

TEST_CASE("dtw matches the memoized alignment oracle, 200 random cases") {
    Rng rng(42);
    for (int rep = 0; rep < 200; ++rep) {
        const size_t la = 1 + rng.uniform_int(8);
        const size_t lb = 1 + rng.uniform_int(8);
        const size_t ch = 1 + rng.uniform_int(3);
        const Sample a = random_sample(la, ch, rng);
        const Sample b = random_sample(lb, ch, rng);
        CHECK(dtw_distance(a, b) == dtw_oracle(a, b));
    }
}

TEST_CASE("dtw matches exhaustive path enumeration for tiny inputs") {
    Rng rng(17);
    for (int rep = 0; rep < 50; ++rep) {
        const size_t la = 1 + rng.uniform_int(4);
        const size_t lb = 1 + rng.uniform_int(4);
        const Sample a = random_sample(la, 2, rng);
        const Sample b = random_sample(lb, 2, rng);
        CHECK(dtw_distance(a, b) == doctest::Approx(dtw_exhaustive(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("dtw basic properties") {
    Rng rng(8);
    const Sample a = random_sample(20, 3, rng);
    const Sample b = random_sample(25, 3, rng);

    CHECK(dtw_distance(a, a) == 0.0);
    CHECK(dtw_distance(a, b) == dtw_distance(b, a));
    CHECK(dtw_distance(a, b) >= 0.0);

    // full band equals the unconstrained distance
    CHECK(dtw_distance(a, b, 1.0) == dtw_distance(a, b));

    // a band never decreases the optimal cost
    CHECK(dtw_distance(a, b, 0.2) >= dtw_distance(a, b));
}

TEST_CASE("dtw rejects invalid input") {
    Rng rng(9);
    const Sample a = random_sample(10, 3, rng);
    const Sample b = random_sample(10, 2, rng);
    CHECK_THROWS_AS(dtw_distance(a, b), ShapeMismatchError);
    const Sample c = random_sample(10, 3, rng);
    CHECK_THROWS_AS(dtw_distance(a, c, 0.0), ConfigError);
    CHECK_THROWS_AS(dtw_distance(a, c, 1.5), ConfigError);
}

TEST_CASE("band always admits an end-to-end alignment") {
    Rng rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        const Sample a = random_sample(3 + rng.uniform_int(30), 2, rng);
        const Sample b = random_sample(3 + rng.uniform_int(30), 2, rng);
        const double d = dtw_distance(a, b, 0.05);
        CHECK(std::isfinite(d));
    }
}
