#include "motiongate/features.hpp"

#include <algorithm>
#include <cmath>

#include "motiongate/errors.hpp"
#include "motiongate/rng.hpp"

namespace motiongate {

namespace {

constexpr int kKernelLengths[3] = {7, 9, 11};

void check_same_shape(const std::vector<Sample>& samples) {
    if (samples.empty()) throw TooFewSamplesError("no samples");
    for (const auto& s : samples)
        if (!s.same_shape(samples.front()))
            throw ShapeMismatchError("samples disagree on shape: " + s.trace_id);
}

}  // namespace

KernelBank KernelBank::generate(size_t input_length, size_t input_channels, int n_kernels,
                                uint64_t seed) {
    if (input_length < 2) throw ShapeMismatchError("input length too short for kernels");
    KernelBank bank;
    bank.n_kernels = n_kernels;
    bank.input_length = input_length;
    bank.input_channels = input_channels;
    bank.seed = seed;
    bank.kernels.reserve(n_kernels);

    const size_t subset = std::max<size_t>(1, static_cast<size_t>(std::sqrt(static_cast<double>(input_channels))));

    for (int k = 0; k < n_kernels; ++k) {
        Rng rng = Rng::derive(seed, static_cast<uint64_t>(k));
        Kernel kernel;

        const int len = kKernelLengths[rng.uniform_int(3)];
        kernel.weights.resize(len);
        double mean = 0.0;
        for (double& w : kernel.weights) {
            w = rng.normal();
            mean += w;
        }
        mean /= len;
        for (double& w : kernel.weights) w -= mean;

        kernel.bias = rng.uniform(-1.0, 1.0);

        // dilation exponentially sampled so the dilated kernel fits
        const double max_exp =
            std::log2(static_cast<double>(input_length - 1) / static_cast<double>(len - 1));
        const double e = rng.uniform(0.0, std::max(0.0, max_exp));
        kernel.dilation = static_cast<int>(std::pow(2.0, e));

        kernel.padding = (rng.uniform_int(2) == 1);

        std::vector<int> pool(input_channels);
        for (size_t i = 0; i < input_channels; ++i) pool[i] = static_cast<int>(i);
        for (size_t i = 0; i < subset; ++i) {
            const size_t j = i + rng.uniform_int(pool.size() - i);
            std::swap(pool[i], pool[j]);
            kernel.channels.push_back(pool[i]);
        }

        bank.kernels.push_back(std::move(kernel));
    }
    return bank;
}

void kernel_transform_row(const Sample& sample, const KernelBank& bank, double* out) {
    if (sample.length != bank.input_length || sample.channels != bank.input_channels)
        throw ShapeMismatchError("sample shape does not match kernel bank");

    const long len = static_cast<long>(sample.length);
    for (int k = 0; k < bank.n_kernels; ++k) {
        const Kernel& kernel = bank.kernels[k];
        const long klen = static_cast<long>(kernel.weights.size());
        const long d = kernel.dilation;
        const long span = (klen - 1) * d;
        const long pad = kernel.padding ? span / 2 : 0;
        const long out_len = len + 2 * pad - span;

        double max_v = -std::numeric_limits<double>::infinity();
        long positive = 0;
        for (long i = 0; i < out_len; ++i) {
            const long start = i - pad;
            double acc = kernel.bias;
            for (int ch : kernel.channels) {
                const double* x = sample.channel(static_cast<size_t>(ch));
                for (long j = 0; j < klen; ++j) {
                    const long t = start + j * d;
                    if (t >= 0 && t < len) acc += kernel.weights[j] * x[t];
                }
            }
            if (acc > 0.0) ++positive;
            if (acc > max_v) max_v = acc;
        }
        out[2 * k] = out_len > 0 ? static_cast<double>(positive) / static_cast<double>(out_len) : 0.0;
        out[2 * k + 1] = out_len > 0 ? max_v : 0.0;
    }
}

FeatureMatrix kernel_transform(const std::vector<Sample>& samples, const KernelBank& bank) {
    check_same_shape(samples);
    FeatureMatrix m;
    m.rows = samples.size();
    m.cols = 2 * static_cast<size_t>(bank.n_kernels);
    m.data.resize(m.rows * m.cols);
    m.provenance = "kernel";
    for (size_t r = 0; r < m.rows; ++r) kernel_transform_row(samples[r], bank, &m.data[r * m.cols]);
    return m;
}

// --- QUANT ----------------------------------------------------------------

namespace {

struct Interval {
    size_t start;
    size_t len;
};

// Dyadic intervals for a series of the given length: level d uses intervals
// of length ceil(L / 2^(d-1)) tiled from 0; at every second level also
// tiled from an offset of half an interval.
std::vector<Interval> quant_intervals(size_t length, int depth) {
    std::vector<Interval> out;
    for (int d = 1; d <= depth; ++d) {
        const size_t w = (length + (1u << (d - 1)) - 1) / (1u << (d - 1));
        if (w < 1) break;
        for (size_t start = 0; start < length; start += w)
            out.push_back({start, std::min(w, length - start)});
        if (d % 2 == 0 && w / 2 > 0 && w / 2 < length) {
            for (size_t start = w / 2; start < length; start += w)
                out.push_back({start, std::min(w, length - start)});
        }
    }
    return out;
}

size_t quant_count_for_length(size_t length, const QuantConfig& config) {
    size_t n = 0;
    for (const Interval& iv : quant_intervals(length, config.depth))
        n += (iv.len + config.divisor - 1) / config.divisor;
    return n;
}

void quant_channel(const double* x, size_t length, const QuantConfig& config, double*& out) {
    for (const Interval& iv : quant_intervals(length, config.depth)) {
        std::vector<double> vals(x + iv.start, x + iv.start + iv.len);
        std::sort(vals.begin(), vals.end());
        const size_t k = (iv.len + config.divisor - 1) / config.divisor;
        for (size_t j = 0; j < k; ++j) {
            const double q = (k == 1) ? 0.5 : static_cast<double>(j) / static_cast<double>(k - 1);
            const double pos = q * static_cast<double>(vals.size() - 1);
            const size_t lo = static_cast<size_t>(pos);
            const double frac = pos - static_cast<double>(lo);
            *out++ = (lo + 1 < vals.size()) ? vals[lo] + frac * (vals[lo + 1] - vals[lo]) : vals[lo];
        }
    }
}

}  // namespace

double empirical_quantile(std::vector<double> values, double q) {
    if (values.empty()) throw TooFewSamplesError("quantile of empty set");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    return (lo + 1 < values.size()) ? values[lo] + frac * (values[lo + 1] - values[lo]) : values[lo];
}

size_t quant_feature_count(size_t length, size_t channels, const QuantConfig& config) {
    const size_t per_channel = quant_count_for_length(length, config) +
                               quant_count_for_length(length - 1, config) +
                               quant_count_for_length(length - 2, config);
    return per_channel * channels;
}

void quant_transform_row(const Sample& sample, const QuantConfig& config, double* out) {
    const size_t L = sample.length;
    if (L < (1u << (config.depth - 1)))
        throw ShapeMismatchError("sample length " + std::to_string(L) + " too short for depth " +
                                 std::to_string(config.depth));
    double* cursor = out;
    std::vector<double> diff1(L - 1), diff2(L - 2);
    for (size_t c = 0; c < sample.channels; ++c) {
        const double* x = sample.channel(c);
        for (size_t t = 0; t + 1 < L; ++t) diff1[t] = x[t + 1] - x[t];
        for (size_t t = 0; t + 2 < L; ++t) diff2[t] = diff1[t + 1] - diff1[t];
        quant_channel(x, L, config, cursor);
        quant_channel(diff1.data(), L - 1, config, cursor);
        quant_channel(diff2.data(), L - 2, config, cursor);
    }
}

FeatureMatrix quant_transform(const std::vector<Sample>& samples, const QuantConfig& config) {
    check_same_shape(samples);
    FeatureMatrix m;
    m.rows = samples.size();
    m.cols = quant_feature_count(samples.front().length, samples.front().channels, config);
    m.data.resize(m.rows * m.cols);
    m.provenance = "quant";
    for (size_t r = 0; r < m.rows; ++r) quant_transform_row(samples[r], config, &m.data[r * m.cols]);
    return m;
}

FeatureMatrix flatten_raw(const std::vector<Sample>& samples) {
    check_same_shape(samples);
    FeatureMatrix m;
    m.rows = samples.size();
    m.cols = samples.front().length * samples.front().channels;
    m.data.resize(m.rows * m.cols);
    m.provenance = "raw-flat";
    // channel blocks, time-major inside each block: the Sample layout itself
    for (size_t r = 0; r < m.rows; ++r)
        std::copy(samples[r].data.begin(), samples[r].data.end(), m.data.begin() + r * m.cols);
    return m;
}

// --- Yeo-Johnson ----------------------------------------------------------

double yeo_johnson(double x, double lambda) {
    if (x >= 0.0) {
        if (std::abs(lambda) < 1e-12) return std::log1p(x);
        return (std::pow(x + 1.0, lambda) - 1.0) / lambda;
    }
    if (std::abs(lambda - 2.0) < 1e-12) return -std::log1p(-x);
    return -(std::pow(1.0 - x, 2.0 - lambda) - 1.0) / (2.0 - lambda);
}

namespace {

double yj_log_likelihood(const std::vector<double>& col, double lambda) {
    const size_t n = col.size();
    double mean = 0.0;
    std::vector<double> psi(n);
    for (size_t i = 0; i < n; ++i) {
        psi[i] = yeo_johnson(col[i], lambda);
        mean += psi[i];
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : psi) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    if (!(var > 0.0) || !std::isfinite(var)) return -std::numeric_limits<double>::infinity();
    double jac = 0.0;
    for (double x : col) jac += (x >= 0.0 ? 1.0 : -1.0) * std::log1p(std::abs(x));
    return -0.5 * static_cast<double>(n) * std::log(var) + (lambda - 1.0) * jac;
}

double fit_lambda(const std::vector<double>& col) {
    // golden-section maximization on [-5, 5]
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = -5.0, b = 5.0;
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = yj_log_likelihood(col, c);
    double fd = yj_log_likelihood(col, d);
    while (b - a > 1e-4) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = yj_log_likelihood(col, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = yj_log_likelihood(col, d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

PowerTransformParams power_transform_fit(const FeatureMatrix& matrix) {
    if (matrix.rows < 2) throw TooFewSamplesError("power transform needs at least 2 rows");
    PowerTransformParams p;
    p.lambdas.resize(matrix.cols);
    p.means.resize(matrix.cols);
    p.stds.resize(matrix.cols);
    p.skipped.resize(matrix.cols);

    std::vector<double> col(matrix.rows);
    for (size_t c = 0; c < matrix.cols; ++c) {
        double mean = 0.0;
        for (size_t r = 0; r < matrix.rows; ++r) {
            col[r] = matrix.at(r, c);
            mean += col[r];
        }
        mean /= static_cast<double>(matrix.rows);
        double var = 0.0;
        for (double v : col) var += (v - mean) * (v - mean);
        var /= static_cast<double>(matrix.rows);

        if (var <= 1e-24) {
            p.skipped[c] = 1;
            p.lambdas[c] = 1.0;
            p.means[c] = mean;
            p.stds[c] = 1.0;
            continue;
        }
        p.skipped[c] = 0;
        const double lambda = fit_lambda(col);
        p.lambdas[c] = lambda;
        double tmean = 0.0;
        for (size_t r = 0; r < matrix.rows; ++r) {
            col[r] = yeo_johnson(matrix.at(r, c), lambda);
            tmean += col[r];
        }
        tmean /= static_cast<double>(matrix.rows);
        double tvar = 0.0;
        for (double v : col) tvar += (v - tmean) * (v - tmean);
        tvar /= static_cast<double>(matrix.rows);
        p.means[c] = tmean;
        p.stds[c] = tvar > 0.0 ? std::sqrt(tvar) : 1.0;
    }
    return p;
}

FeatureMatrix power_transform_apply(const FeatureMatrix& matrix, const PowerTransformParams& params) {
    if (matrix.cols != params.lambdas.size())
        throw ShapeMismatchError("power transform params have wrong column count");
    FeatureMatrix out = matrix;
    for (size_t c = 0; c < matrix.cols; ++c) {
        for (size_t r = 0; r < matrix.rows; ++r) {
            const double x = matrix.at(r, c);
            out.at(r, c) = params.skipped[c]
                               ? x - params.means[c]
                               : (yeo_johnson(x, params.lambdas[c]) - params.means[c]) / params.stds[c];
        }
    }
    return out;
}

}  // namespace motiongate
