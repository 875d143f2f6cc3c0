#include "motiongate/dtw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "motiongate/errors.hpp"

namespace motiongate {

double dtw_distance(const Sample& a, const Sample& b, std::optional<double> band) {
    if (a.channels != b.channels)
        throw ShapeMismatchError("dtw requires equal channel counts");
    if (band && (*band <= 0.0 || *band > 1.0))
        throw ConfigError("dtw band must lie in (0, 1]");

    const size_t n = a.length, m = b.length;
    const size_t channels = a.channels;
    const double inf = std::numeric_limits<double>::infinity();

    long w = std::numeric_limits<long>::max();
    if (band) {
        w = static_cast<long>(std::ceil(*band * static_cast<double>(std::max(n, m))));
        // the band must at least admit the end-to-end alignment
        w = std::max<long>(w, static_cast<long>(std::max(n, m) - std::min(n, m)));
    }

    std::vector<double> prev(m + 1, inf), curr(m + 1, inf);
    prev[0] = 0.0;

    std::vector<double> row_a(channels);
    for (size_t i = 1; i <= n; ++i) {
        curr.assign(m + 1, inf);
        for (size_t c = 0; c < channels; ++c) row_a[c] = a.at(i - 1, c);

        size_t j_lo = 1, j_hi = m;
        if (band) {
            // warping window around the stretched diagonal
            const double ratio = n > 1 ? static_cast<double>(m - 1) / static_cast<double>(n - 1) : 0.0;
            const double center = 1.0 + static_cast<double>(i - 1) * ratio;
            j_lo = static_cast<size_t>(std::max<double>(1.0, std::ceil(center - static_cast<double>(w))));
            j_hi = static_cast<size_t>(std::min<double>(static_cast<double>(m), std::floor(center + static_cast<double>(w))));
        }
        for (size_t j = j_lo; j <= j_hi; ++j) {
            double d2 = 0.0;
            for (size_t c = 0; c < channels; ++c) {
                const double diff = row_a[c] - b.at(j - 1, c);
                d2 += diff * diff;
            }
            const double best = std::min({prev[j], curr[j - 1], prev[j - 1]});
            curr[j] = std::sqrt(d2) + best;
        }
        std::swap(prev, curr);
    }
    return prev[m];
}

}  // namespace motiongate
