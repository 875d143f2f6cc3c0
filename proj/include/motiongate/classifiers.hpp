#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "motiongate/features.hpp"
#include "motiongate/sample.hpp"

namespace motiongate {

enum class ClassifierKind { quant_et, kernel_logit };

ClassifierKind classifier_kind_from_string(const std::string& s);
std::string to_string(ClassifierKind k);
bool is_classifier_kind(const std::string& s);

struct ClassifierConfig {
    ClassifierKind kind = ClassifierKind::quant_et;
    // quant_et
    int n_trees = 200;
    QuantConfig quant;
    // kernel_logit
    int n_kernels = 1024;
    double l2 = 1.0;
    int max_iterations = 1000;
    double gradient_tolerance = 1e-6;
};

// --- extremely randomized trees ------------------------------------------

struct EtNode {
    int feature = -1;  // -1 marks a leaf
    double split = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> class_freq;  // leaves only
};

struct EtTree {
    std::vector<EtNode> nodes;
};

// --- multinomial logistic regression -------------------------------------

struct LogitModel {
    size_t n_features = 0;
    size_t n_classes = 0;
    std::vector<double> weights;  // n_classes x n_features
    std::vector<double> biases;   // n_classes
};

// L2-penalized multinomial cross-entropy loss and gradient; exposed for the
// finite-difference oracle in the tests.
double logit_loss_grad(const FeatureMatrix& x, const std::vector<int>& y, size_t n_classes,
                       double l2, const std::vector<double>& params, std::vector<double>* grad);

// Closed-set participant identifier; predict_proba rows sum to 1.
class FittedClassifier {
public:
    static FittedClassifier fit(const std::vector<Sample>& samples, const std::vector<int>& labels,
                                const ClassifierConfig& config, uint64_t seed);

    // Probability per class, in class_list order.
    std::vector<double> predict_proba(const Sample& probe) const;

    // Probability assigned to the claimed identity; higher = more genuine.
    double verification_score(const Sample& probe, int claimed_id) const;

    const std::vector<int>& class_list() const { return classes_; }
    ClassifierKind kind() const { return config_.kind; }
    const ClassifierConfig& config() const { return config_; }

    friend void to_json(nlohmann::ordered_json& j, const FittedClassifier& c);
    friend void from_json(const nlohmann::ordered_json& j, FittedClassifier& c);

private:
    ClassifierConfig config_;
    uint64_t seed_ = 0;
    size_t input_length_ = 0;
    size_t input_channels_ = 0;
    std::vector<int> classes_;

    // quant_et
    std::vector<EtTree> trees_;

    // kernel_logit
    KernelBank bank_;
    PowerTransformParams power_;
    LogitModel logit_;
};

void to_json(nlohmann::ordered_json& j, const FittedClassifier& c);
void from_json(const nlohmann::ordered_json& j, FittedClassifier& c);

}  // namespace motiongate
