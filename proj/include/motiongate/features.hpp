#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "motiongate/sample.hpp"

namespace motiongate {

// rows x cols feature matrix, row-major.
struct FeatureMatrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;
    std::string provenance;  // kernel | quant | raw-flat

    double at(size_t r, size_t c) const { return data[r * cols + c]; }
    double& at(size_t r, size_t c) { return data[r * cols + c]; }
    const double* row(size_t r) const { return data.data() + r * cols; }
};

// --- random convolutional kernels ----------------------------------------

struct Kernel {
    std::vector<double> weights;  // mean-centered draws, shared across assigned channels
    double bias = 0.0;
    int dilation = 1;
    bool padding = false;
    std::vector<int> channels;  // assigned input channels
};

struct KernelBank {
    int n_kernels = 1024;
    size_t input_length = 0;
    size_t input_channels = 0;
    uint64_t seed = 0;
    std::vector<Kernel> kernels;

    // Per-kernel RNG streams derived from (seed, kernel index).
    static KernelBank generate(size_t input_length, size_t input_channels, int n_kernels,
                               uint64_t seed);
};

// Two features per kernel: proportion of positive values and max of the
// (bias-shifted) convolution output.
FeatureMatrix kernel_transform(const std::vector<Sample>& samples, const KernelBank& bank);
void kernel_transform_row(const Sample& sample, const KernelBank& bank, double* out);

// --- quantile-interval features ------------------------------------------

struct QuantConfig {
    int depth = 6;
    int divisor = 4;
};

size_t quant_feature_count(size_t length, size_t channels, const QuantConfig& config);
FeatureMatrix quant_transform(const std::vector<Sample>& samples, const QuantConfig& config);
void quant_transform_row(const Sample& sample, const QuantConfig& config, double* out);

// Empirical quantile with linear interpolation between order statistics;
// q in [0, 1]. Input is sorted in place by the caller's copy.
double empirical_quantile(std::vector<double> values, double q);

// --- raw flattening -------------------------------------------------------

FeatureMatrix flatten_raw(const std::vector<Sample>& samples);

// --- Yeo-Johnson power transform + standardization ------------------------

struct PowerTransformParams {
    std::vector<double> lambdas;
    std::vector<double> means;   // post-transform
    std::vector<double> stds;    // post-transform
    std::vector<uint8_t> skipped;  // zero-variance columns: centered pass-through
};

double yeo_johnson(double x, double lambda);
PowerTransformParams power_transform_fit(const FeatureMatrix& matrix);
FeatureMatrix power_transform_apply(const FeatureMatrix& matrix, const PowerTransformParams& params);

}  // namespace motiongate
