#pragma once

#include <optional>

#include "motiongate/sample.hpp"

namespace motiongate {

// Dependent multivariate DTW: point cost is the Euclidean distance between
// M-channel rows, total cost is the sum along the optimal monotone path.
// band, when set, is a Sakoe-Chiba band as a fraction of max(L1, L2).
double dtw_distance(const Sample& a, const Sample& b, std::optional<double> band = std::nullopt);

}  // namespace motiongate
