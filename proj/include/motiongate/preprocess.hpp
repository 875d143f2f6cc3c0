#pragma once

#include <string>
#include <vector>

#include "motiongate/sample.hpp"
#include "motiongate/trace.hpp"

namespace motiongate {

// --- Butterworth low-pass, zero-phase -------------------------------------

struct ButterworthCoeffs {
    std::vector<double> b;
    std::vector<double> a;  // a[0] == 1
};

// Digital low-pass Butterworth via bilinear transform with pre-warping.
ButterworthCoeffs butterworth_lowpass(int order, double cutoff_hz, double fs_hz);

// Forward-backward (zero-phase) filtering with odd-reflection edge padding
// and steady-state initial conditions. Output length equals input length.
std::vector<double> lowpass_filter(const std::vector<double>& series, double cutoff_hz = 12.5,
                                   double fs_hz = 50.0, int order = 4);

// --- magnetometer debiasing ----------------------------------------------

// Mean-center per channel, then normalize each 3-vector to unit length
// (zero vectors pass through). Rows are x[t*3 + axis].
std::vector<double> mag_center_normalize(const std::vector<double>& mag, size_t rows);

// First-order temporal difference with one zero row prepended.
std::vector<double> mag_diff_prepend(const std::vector<double>& mag, size_t rows);

// Full debias pipeline without filtering: center, normalize, diff, pad.
std::vector<double> debias_magnetometer(const std::vector<double>& mag, size_t rows);

// --- windows --------------------------------------------------------------

enum class Representation { single, concat, double_window };

Representation representation_from_string(const std::string& s);
std::string to_string(Representation r);

struct WindowSpec {
    int k_open = 10;  // W_o sample count
    int pre = 50;     // samples before capture
    int post = 150;   // samples after capture
    Representation representation = Representation::single;

    // Emitted sample length for a given input channel count.
    size_t out_length() const;
    size_t out_channels(size_t m) const;
};

struct PreprocessOptions {
    double cutoff_hz = 12.5;
    double fs_hz = 50.0;
    int filter_order = 4;
};

// Regularized trace -> all 15 channels conditioned: non-magnetometer
// channels low-pass filtered; magnetometer channels centered, normalized,
// filtered, then differenced with a zero row prepended. Returns a T x 15
// row-major array matching the trace layout.
std::vector<double> condition_channels(const MotionTrace& trace, const PreprocessOptions& opts = {});

// Extracts the windowed sample for one trace from conditioned channel data.
// Throws WindowOutOfRangeError when an anchor window does not fit.
Sample extract_windows(const MotionTrace& trace, const std::vector<double>& conditioned,
                       const WindowSpec& spec, const ChannelSelector& selector);

// Convenience: regularize + condition + window in one call.
Sample preprocess_trace(const MotionTrace& trace, const WindowSpec& spec,
                        const ChannelSelector& selector, const PreprocessOptions& opts = {});

}  // namespace motiongate
