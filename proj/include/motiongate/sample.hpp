#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "motiongate/trace.hpp"

namespace motiongate {

// Fixed-length multichannel array, channel blocks with time-major layout
// inside each block: value(t, c) = data[c * length + t].
struct Sample {
    size_t length = 0;
    size_t channels = 0;
    std::vector<double> data;

    std::string trace_id;
    std::optional<int> participant_id;
    Label label = Label::bonafide;
    AttackType attack_type = AttackType::none;

    double at(size_t t, size_t c) const { return data[c * length + t]; }
    double& at(size_t t, size_t c) { return data[c * length + t]; }
    const double* channel(size_t c) const { return data.data() + c * length; }

    bool same_shape(const Sample& other) const {
        return length == other.length && channels == other.channels;
    }
};

}  // namespace motiongate
