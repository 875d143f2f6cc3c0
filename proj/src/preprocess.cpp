#include "motiongate/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "motiongate/errors.hpp"

namespace motiongate {

namespace {

// Expand a monic polynomial from its roots; returns real coefficients,
// highest degree first. Roots must come in conjugate pairs.
std::vector<double> poly_from_roots(const std::vector<std::complex<double>>& roots) {
    std::vector<std::complex<double>> coeffs = {1.0};
    for (const auto& r : roots) {
        std::vector<std::complex<double>> next(coeffs.size() + 1, 0.0);
        for (size_t i = 0; i < coeffs.size(); ++i) {
            next[i] += coeffs[i];
            next[i + 1] -= coeffs[i] * r;
        }
        coeffs = std::move(next);
    }
    std::vector<double> real(coeffs.size());
    for (size_t i = 0; i < coeffs.size(); ++i) real[i] = coeffs[i].real();
    return real;
}

// One pass of direct form II transposed filtering with initial state zi.
std::vector<double> lfilter(const ButterworthCoeffs& c, const std::vector<double>& x,
                            const std::vector<double>& zi) {
    const size_t n = c.a.size();
    std::vector<double> z = zi;  // length n-1
    std::vector<double> y(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        const double yi = c.b[0] * xi + z[0];
        for (size_t j = 0; j < n - 2; ++j)
            z[j] = c.b[j + 1] * xi + z[j + 1] - c.a[j + 1] * yi;
        z[n - 2] = c.b[n - 1] * xi - c.a[n - 1] * yi;
        y[i] = yi;
    }
    return y;
}

// Steady-state initial filter state for unit step input (scipy lfilter_zi).
std::vector<double> steady_state_zi(const ButterworthCoeffs& c) {
    const size_t m = c.a.size() - 1;
    // Solve (I - A^T) zi = B with A the companion matrix of a and
    // B = b[1:] - a[1:] * b[0].
    std::vector<std::vector<double>> mat(m, std::vector<double>(m, 0.0));
    std::vector<double> rhs(m);
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < m; ++j) {
            double a_t = 0.0;  // A^T[i][j] = A[j][i]
            if (j == 0)
                a_t = -c.a[i + 1];
            else if (j == i + 1)
                a_t = 1.0;
            mat[i][j] = (i == j ? 1.0 : 0.0) - a_t;
        }
        rhs[i] = c.b[i + 1] - c.a[i + 1] * c.b[0];
    }
    // Gaussian elimination with partial pivoting.
    for (size_t col = 0; col < m; ++col) {
        size_t piv = col;
        for (size_t r = col + 1; r < m; ++r)
            if (std::abs(mat[r][col]) > std::abs(mat[piv][col])) piv = r;
        std::swap(mat[col], mat[piv]);
        std::swap(rhs[col], rhs[piv]);
        for (size_t r = col + 1; r < m; ++r) {
            const double f = mat[r][col] / mat[col][col];
            for (size_t k = col; k < m; ++k) mat[r][k] -= f * mat[col][k];
            rhs[r] -= f * rhs[col];
        }
    }
    std::vector<double> zi(m);
    for (size_t i = m; i-- > 0;) {
        double s = rhs[i];
        for (size_t j = i + 1; j < m; ++j) s -= mat[i][j] * zi[j];
        zi[i] = s / mat[i][i];
    }
    return zi;
}

}  // namespace

ButterworthCoeffs butterworth_lowpass(int order, double cutoff_hz, double fs_hz) {
    if (cutoff_hz <= 0.0 || cutoff_hz >= fs_hz / 2.0)
        throw ConfigError("cutoff must lie in (0, fs/2)");

    const double warped = std::tan(M_PI * cutoff_hz / fs_hz);

    std::vector<std::complex<double>> zpoles;
    for (int k = 0; k < order; ++k) {
        const double theta = M_PI * (2.0 * k + order + 1.0) / (2.0 * order);
        const std::complex<double> p = warped * std::polar(1.0, theta);
        // bilinear transform, T = 2
        zpoles.push_back((1.0 + p) / (1.0 - p));
    }
    ButterworthCoeffs c;
    c.a = poly_from_roots(zpoles);

    // order zeros at z = -1: binomial coefficients
    c.b.assign(order + 1, 0.0);
    c.b[0] = 1.0;
    for (int i = 0; i < order; ++i)
        for (int j = i + 1; j > 0; --j) c.b[j] += c.b[j - 1];

    // normalize to unit DC gain
    double a_sum = 0.0, b_sum = 0.0;
    for (double v : c.a) a_sum += v;
    for (double v : c.b) b_sum += v;
    const double scale = a_sum / b_sum;
    for (double& v : c.b) v *= scale;
    return c;
}

std::vector<double> lowpass_filter(const std::vector<double>& series, double cutoff_hz,
                                   double fs_hz, int order) {
    const size_t n = series.size();
    if (static_cast<int>(n) < 3 * order)
        throw FilterLengthError("series length " + std::to_string(n) + " < 3*order");

    const ButterworthCoeffs c = butterworth_lowpass(order, cutoff_hz, fs_hz);
    const size_t pad = 3 * (c.a.size() - 1);
    if (n <= pad)
        throw FilterLengthError("series length " + std::to_string(n) + " <= padding " + std::to_string(pad));

    // odd reflection about the endpoints
    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    for (size_t i = pad; i >= 1; --i) ext.push_back(2.0 * series[0] - series[i]);
    ext.insert(ext.end(), series.begin(), series.end());
    for (size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * series[n - 1] - series[n - 1 - i]);

    const std::vector<double> zi = steady_state_zi(c);
    auto scaled = [&](double x0) {
        std::vector<double> z = zi;
        for (double& v : z) v *= x0;
        return z;
    };

    std::vector<double> y = lfilter(c, ext, scaled(ext.front()));
    std::reverse(y.begin(), y.end());
    y = lfilter(c, y, scaled(y.front()));
    std::reverse(y.begin(), y.end());

    return std::vector<double>(y.begin() + pad, y.begin() + pad + n);
}

std::vector<double> mag_center_normalize(const std::vector<double>& mag, size_t rows) {
    if (rows < 2) throw ShapeMismatchError("magnetometer series needs at least 2 rows");
    std::vector<double> out(mag.begin(), mag.begin() + rows * 3);
    for (int axis = 0; axis < 3; ++axis) {
        double mean = 0.0;
        for (size_t t = 0; t < rows; ++t) mean += out[t * 3 + axis];
        mean /= static_cast<double>(rows);
        for (size_t t = 0; t < rows; ++t) out[t * 3 + axis] -= mean;
    }
    for (size_t t = 0; t < rows; ++t) {
        double* v = &out[t * 3];
        const double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        if (norm > 0.0)
            for (int axis = 0; axis < 3; ++axis) v[axis] /= norm;
    }
    return out;
}

std::vector<double> mag_diff_prepend(const std::vector<double>& mag, size_t rows) {
    std::vector<double> out(rows * 3, 0.0);
    for (size_t t = 1; t < rows; ++t)
        for (int axis = 0; axis < 3; ++axis)
            out[t * 3 + axis] = mag[t * 3 + axis] - mag[(t - 1) * 3 + axis];
    return out;
}

std::vector<double> debias_magnetometer(const std::vector<double>& mag, size_t rows) {
    return mag_diff_prepend(mag_center_normalize(mag, rows), rows);
}

Representation representation_from_string(const std::string& s) {
    if (s == "single") return Representation::single;
    if (s == "concat") return Representation::concat;
    if (s == "double") return Representation::double_window;
    throw ConfigError("unknown representation '" + s + "'");
}

std::string to_string(Representation r) {
    switch (r) {
        case Representation::single: return "single";
        case Representation::concat: return "concat";
        case Representation::double_window: return "double";
    }
    return "single";
}

size_t WindowSpec::out_length() const {
    switch (representation) {
        case Representation::single: return static_cast<size_t>(pre + post);
        case Representation::concat: return static_cast<size_t>(k_open + pre + post);
        case Representation::double_window: return static_cast<size_t>(pre + post);
    }
    return 0;
}

size_t WindowSpec::out_channels(size_t m) const {
    return representation == Representation::double_window ? 2 * m : m;
}

std::vector<double> condition_channels(const MotionTrace& trace, const PreprocessOptions& opts) {
    const size_t rows = trace.rows();
    std::vector<double> out(rows * kNumChannels);

    std::vector<double> series(rows);
    for (int c = 0; c < kNumChannels; ++c) {
        if (c >= 6 && c <= 8) continue;  // magnetometer handled below
        for (size_t t = 0; t < rows; ++t) series[t] = trace.at(t, c);
        std::vector<double> filtered =
            lowpass_filter(series, opts.cutoff_hz, opts.fs_hz, opts.filter_order);
        for (size_t t = 0; t < rows; ++t) out[t * kNumChannels + c] = filtered[t];
    }

    // magnetometer: center + normalize, filter, then difference
    std::vector<double> mag(rows * 3);
    for (size_t t = 0; t < rows; ++t)
        for (int axis = 0; axis < 3; ++axis) mag[t * 3 + axis] = trace.at(t, 6 + axis);
    mag = mag_center_normalize(mag, rows);
    for (int axis = 0; axis < 3; ++axis) {
        for (size_t t = 0; t < rows; ++t) series[t] = mag[t * 3 + axis];
        std::vector<double> filtered =
            lowpass_filter(series, opts.cutoff_hz, opts.fs_hz, opts.filter_order);
        for (size_t t = 0; t < rows; ++t) mag[t * 3 + axis] = filtered[t];
    }
    mag = mag_diff_prepend(mag, rows);
    for (size_t t = 0; t < rows; ++t)
        for (int axis = 0; axis < 3; ++axis) out[t * kNumChannels + 6 + axis] = mag[t * 3 + axis];

    return out;
}

Sample extract_windows(const MotionTrace& trace, const std::vector<double>& conditioned,
                       const WindowSpec& spec, const ChannelSelector& selector) {
    const size_t rows = trace.rows();
    const long capture = static_cast<long>(event_grid_index(trace, trace.capture_ms));
    const long open = static_cast<long>(event_grid_index(trace, trace.camera_open_ms));

    if (capture - spec.pre < 0 || capture + spec.post > static_cast<long>(rows))
        throw WindowOutOfRangeError(trace.trace_id + ": capture window [" +
                                    std::to_string(capture - spec.pre) + ", " +
                                    std::to_string(capture + spec.post) + ") outside trace of " +
                                    std::to_string(rows) + " samples");
    const bool needs_open = spec.representation != Representation::single;
    if (needs_open && open + spec.k_open > static_cast<long>(rows))
        throw WindowOutOfRangeError(trace.trace_id + ": camera-open window outside trace");

    const size_t m = selector.count();
    Sample s;
    s.length = spec.out_length();
    s.channels = spec.out_channels(m);
    s.data.assign(s.length * s.channels, 0.0);
    s.trace_id = trace.trace_id;
    s.participant_id = trace.participant_id;
    s.label = trace.label;
    s.attack_type = trace.attack_type;

    auto value = [&](long t, int ch) { return conditioned[static_cast<size_t>(t) * kNumChannels + ch]; };

    const long wc_len = spec.pre + spec.post;
    for (size_t ci = 0; ci < m; ++ci) {
        const int ch = selector.channels[ci];
        switch (spec.representation) {
            case Representation::single:
                for (long i = 0; i < wc_len; ++i) s.at(i, ci) = value(capture - spec.pre + i, ch);
                break;
            case Representation::concat:
                for (long i = 0; i < spec.k_open; ++i) s.at(i, ci) = value(open + i, ch);
                for (long i = 0; i < wc_len; ++i)
                    s.at(spec.k_open + i, ci) = value(capture - spec.pre + i, ch);
                break;
            case Representation::double_window:
                for (long i = 0; i < wc_len; ++i) s.at(i, ci) = value(capture - spec.pre + i, ch);
                // W_o channels, zero-padded at the tail
                for (long i = 0; i < spec.k_open && i < wc_len; ++i)
                    s.at(i, m + ci) = value(open + i, ch);
                break;
        }
    }
    return s;
}

Sample preprocess_trace(const MotionTrace& trace, const WindowSpec& spec,
                        const ChannelSelector& selector, const PreprocessOptions& opts) {
    const MotionTrace regular = regularize_grid(trace);
    return extract_windows(regular, condition_channels(regular, opts), spec, selector);
}

}  // namespace motiongate
