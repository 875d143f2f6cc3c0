#include "motiongate/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "motiongate/errors.hpp"
#include "motiongate/rng.hpp"

namespace motiongate {

namespace {

double entropy(const std::vector<double>& counts, double total) {
    double h = 0.0;
    for (double c : counts) {
        if (c <= 0.0) continue;
        const double p = c / total;
        h -= p * std::log2(p);
    }
    return h;
}

struct EtBuilder {
    const FeatureMatrix& m;
    const std::vector<int>& y;  // class indices
    size_t n_classes;
    size_t n_candidates;
    Rng& rng;
    EtTree& tree;

    int build(std::vector<uint32_t>& idx, size_t lo, size_t hi) {
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});

        std::vector<double> counts(n_classes, 0.0);
        for (size_t i = lo; i < hi; ++i) counts[y[idx[i]]] += 1.0;
        const double total = static_cast<double>(hi - lo);
        const size_t present = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; });

        if (hi - lo < 2 || present < 2) {
            make_leaf(node_id, counts, total);
            return node_id;
        }

        // one uniform random threshold per candidate feature, best by
        // information gain
        const double parent_h = entropy(counts, total);
        int best_feature = -1;
        double best_split = 0.0, best_gain = -1.0;
        for (size_t c = 0; c < n_candidates; ++c) {
            const int f = static_cast<int>(rng.uniform_int(m.cols));
            double minv = m.at(idx[lo], f), maxv = minv;
            for (size_t i = lo + 1; i < hi; ++i) {
                const double v = m.at(idx[i], f);
                minv = std::min(minv, v);
                maxv = std::max(maxv, v);
            }
            if (minv == maxv) continue;
            const double split = rng.uniform(minv, maxv);

            std::vector<double> left(n_classes, 0.0);
            double nl = 0.0;
            for (size_t i = lo; i < hi; ++i) {
                if (m.at(idx[i], f) < split) {
                    left[y[idx[i]]] += 1.0;
                    nl += 1.0;
                }
            }
            const double nr = total - nl;
            if (nl == 0.0 || nr == 0.0) continue;
            std::vector<double> right(n_classes);
            for (size_t k = 0; k < n_classes; ++k) right[k] = counts[k] - left[k];
            const double gain = parent_h - (nl / total) * entropy(left, nl) - (nr / total) * entropy(right, nr);
            if (gain > best_gain) {
                best_gain = gain;
                best_feature = f;
                best_split = split;
            }
        }

        if (best_feature < 0) {
            make_leaf(node_id, counts, total);
            return node_id;
        }

        auto mid_it = std::stable_partition(idx.begin() + lo, idx.begin() + hi, [&](uint32_t r) {
            return m.at(r, best_feature) < best_split;
        });
        const size_t mid = static_cast<size_t>(mid_it - idx.begin());
        tree.nodes[node_id].feature = best_feature;
        tree.nodes[node_id].split = best_split;
        const int left = build(idx, lo, mid);
        tree.nodes[node_id].left = left;
        const int right = build(idx, mid, hi);
        tree.nodes[node_id].right = right;
        return node_id;
    }

    void make_leaf(int node_id, const std::vector<double>& counts, double total) {
        auto& freq = tree.nodes[node_id].class_freq;
        freq.resize(n_classes);
        for (size_t k = 0; k < n_classes; ++k) freq[k] = counts[k] / total;
    }
};

void softmax_inplace(std::vector<double>& z) {
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - m);
        sum += v;
    }
    for (double& v : z) v /= sum;
}

}  // namespace

ClassifierKind classifier_kind_from_string(const std::string& s) {
    if (s == "quant_et") return ClassifierKind::quant_et;
    if (s == "kernel_logit") return ClassifierKind::kernel_logit;
    throw ConfigError("unknown classifier kind '" + s + "'");
}

std::string to_string(ClassifierKind k) {
    return k == ClassifierKind::quant_et ? "quant_et" : "kernel_logit";
}

bool is_classifier_kind(const std::string& s) {
    return s == "quant_et" || s == "kernel_logit";
}

double logit_loss_grad(const FeatureMatrix& x, const std::vector<int>& y, size_t n_classes,
                       double l2, const std::vector<double>& params, std::vector<double>* grad) {
    const size_t n = x.rows, f = x.cols, k = n_classes;
    const double* w = params.data();          // k x f
    const double* b = params.data() + k * f;  // k
    if (grad) grad->assign(params.size(), 0.0);

    double loss = 0.0;
    std::vector<double> z(k);
    for (size_t i = 0; i < n; ++i) {
        const double* xi = x.row(i);
        for (size_t c = 0; c < k; ++c) {
            double s = b[c];
            const double* wc = w + c * f;
            for (size_t j = 0; j < f; ++j) s += wc[j] * xi[j];
            z[c] = s;
        }
        softmax_inplace(z);
        loss -= std::log(std::max(z[y[i]], 1e-300));
        if (grad) {
            for (size_t c = 0; c < k; ++c) {
                const double delta = (z[c] - (static_cast<int>(c) == y[i] ? 1.0 : 0.0)) / n;
                double* gw = grad->data() + c * f;
                for (size_t j = 0; j < f; ++j) gw[j] += delta * xi[j];
                (*grad)[k * f + c] += delta;
            }
        }
    }
    loss /= static_cast<double>(n);

    double penalty = 0.0;
    for (size_t i = 0; i < k * f; ++i) penalty += w[i] * w[i];
    loss += 0.5 * l2 * penalty;
    if (grad)
        for (size_t i = 0; i < k * f; ++i) (*grad)[i] += l2 * w[i];
    return loss;
}

namespace {

// L-BFGS with Armijo backtracking; converges to gradient 2-norm below tol.
LogitModel fit_logit(const FeatureMatrix& x, const std::vector<int>& y, size_t n_classes,
                     double l2, int max_iter, double tol) {
    const size_t dim = n_classes * x.cols + n_classes;
    std::vector<double> params(dim, 0.0), grad;
    double loss = logit_loss_grad(x, y, n_classes, l2, params, &grad);

    const int history = 10;
    std::vector<std::vector<double>> s_hist, y_hist;
    std::vector<double> rho_hist;

    auto norm2 = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double e : v) s += e * e;
        return std::sqrt(s);
    };

    for (int iter = 0; iter < max_iter; ++iter) {
        if (norm2(grad) < tol) {
            LogitModel model;
            model.n_features = x.cols;
            model.n_classes = n_classes;
            model.weights.assign(params.begin(), params.begin() + n_classes * x.cols);
            model.biases.assign(params.begin() + n_classes * x.cols, params.end());
            return model;
        }

        // two-loop recursion
        std::vector<double> q = grad;
        std::vector<double> alpha(s_hist.size());
        for (size_t i = s_hist.size(); i-- > 0;) {
            double dot = 0.0;
            for (size_t j = 0; j < dim; ++j) dot += s_hist[i][j] * q[j];
            alpha[i] = rho_hist[i] * dot;
            for (size_t j = 0; j < dim; ++j) q[j] -= alpha[i] * y_hist[i][j];
        }
        if (!s_hist.empty()) {
            double sy = 0.0, yy = 0.0;
            for (size_t j = 0; j < dim; ++j) {
                sy += s_hist.back()[j] * y_hist.back()[j];
                yy += y_hist.back()[j] * y_hist.back()[j];
            }
            const double gamma = sy / yy;
            for (double& v : q) v *= gamma;
        }
        for (size_t i = 0; i < s_hist.size(); ++i) {
            double dot = 0.0;
            for (size_t j = 0; j < dim; ++j) dot += y_hist[i][j] * q[j];
            const double beta = rho_hist[i] * dot;
            for (size_t j = 0; j < dim; ++j) q[j] += (alpha[i] - beta) * s_hist[i][j];
        }

        // descent direction
        std::vector<double> dir(dim);
        double gd = 0.0;
        for (size_t j = 0; j < dim; ++j) {
            dir[j] = -q[j];
            gd += grad[j] * dir[j];
        }
        if (gd >= 0.0) {  // fall back to steepest descent
            gd = 0.0;
            for (size_t j = 0; j < dim; ++j) {
                dir[j] = -grad[j];
                gd -= grad[j] * grad[j];
            }
        }

        double step = 1.0;
        std::vector<double> next(dim), next_grad;
        double next_loss = 0.0;
        bool ok = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (size_t j = 0; j < dim; ++j) next[j] = params[j] + step * dir[j];
            next_loss = logit_loss_grad(x, y, n_classes, l2, next, &next_grad);
            if (next_loss <= loss + 1e-4 * step * gd) {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if (!ok)
            throw ConvergenceError("line search failed at iteration " + std::to_string(iter) +
                                   ", loss " + std::to_string(loss));

        std::vector<double> s_vec(dim), y_vec(dim);
        for (size_t j = 0; j < dim; ++j) {
            s_vec[j] = next[j] - params[j];
            y_vec[j] = next_grad[j] - grad[j];
        }
        double sy = 0.0;
        for (size_t j = 0; j < dim; ++j) sy += s_vec[j] * y_vec[j];
        if (sy > 1e-12) {
            s_hist.push_back(std::move(s_vec));
            y_hist.push_back(std::move(y_vec));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > history) {
                s_hist.erase(s_hist.begin());
                y_hist.erase(y_hist.begin());
                rho_hist.erase(rho_hist.begin());
            }
        }
        params = std::move(next);
        grad = std::move(next_grad);
        loss = next_loss;
    }
    throw ConvergenceError("gradient norm " + std::to_string(norm2(grad)) + " after " +
                           std::to_string(max_iter) + " iterations");
}

}  // namespace

FittedClassifier FittedClassifier::fit(const std::vector<Sample>& samples,
                                       const std::vector<int>& labels,
                                       const ClassifierConfig& config, uint64_t seed) {
    if (samples.size() != labels.size())
        throw ShapeMismatchError("label count does not match sample count");
    if (samples.empty()) throw TooFewSamplesError("no training samples");

    FittedClassifier c;
    c.config_ = config;
    c.seed_ = seed;
    c.input_length_ = samples.front().length;
    c.input_channels_ = samples.front().channels;

    c.classes_ = labels;
    std::sort(c.classes_.begin(), c.classes_.end());
    c.classes_.erase(std::unique(c.classes_.begin(), c.classes_.end()), c.classes_.end());
    if (c.classes_.size() < 2) throw TooFewSamplesError("need at least 2 classes");

    std::vector<int> y(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) {
        const auto it = std::lower_bound(c.classes_.begin(), c.classes_.end(), labels[i]);
        y[i] = static_cast<int>(it - c.classes_.begin());
    }
    std::vector<size_t> per_class(c.classes_.size(), 0);
    for (int cls : y) ++per_class[cls];
    for (size_t cls = 0; cls < per_class.size(); ++cls)
        if (per_class[cls] < 2)
            throw TooFewSamplesError("class " + std::to_string(c.classes_[cls]) +
                                     " has fewer than 2 samples");

    if (config.kind == ClassifierKind::quant_et) {
        const FeatureMatrix feats = quant_transform(samples, config.quant);
        const size_t candidates =
            std::max<size_t>(1, static_cast<size_t>(std::sqrt(static_cast<double>(feats.cols))));
        c.trees_.resize(config.n_trees);
        for (int t = 0; t < config.n_trees; ++t) {
            Rng rng = Rng::derive(seed, static_cast<uint64_t>(t));
            std::vector<uint32_t> idx(feats.rows);
            std::iota(idx.begin(), idx.end(), 0);
            EtBuilder builder{feats, y, c.classes_.size(), candidates, rng, c.trees_[t]};
            builder.build(idx, 0, idx.size());
        }
    } else {
        c.bank_ = KernelBank::generate(c.input_length_, c.input_channels_, config.n_kernels, seed);
        FeatureMatrix feats = kernel_transform(samples, c.bank_);
        c.power_ = power_transform_fit(feats);
        feats = power_transform_apply(feats, c.power_);
        c.logit_ = fit_logit(feats, y, c.classes_.size(), config.l2, config.max_iterations,
                             config.gradient_tolerance);
    }
    return c;
}

std::vector<double> FittedClassifier::predict_proba(const Sample& probe) const {
    if (probe.length != input_length_ || probe.channels != input_channels_)
        throw ShapeMismatchError("probe shape does not match fitted classifier");
    const size_t k = classes_.size();

    if (config_.kind == ClassifierKind::quant_et) {
        std::vector<double> feat(quant_feature_count(probe.length, probe.channels, config_.quant));
        quant_transform_row(probe, config_.quant, feat.data());
        std::vector<double> proba(k, 0.0);
        for (const EtTree& tree : trees_) {
            int node = 0;
            while (tree.nodes[node].feature >= 0) {
                const EtNode& nd = tree.nodes[node];
                node = feat[nd.feature] < nd.split ? nd.left : nd.right;
            }
            for (size_t c = 0; c < k; ++c) proba[c] += tree.nodes[node].class_freq[c];
        }
        for (double& p : proba) p /= static_cast<double>(trees_.size());
        return proba;
    }

    std::vector<double> feat(2 * static_cast<size_t>(config_.n_kernels));
    kernel_transform_row(probe, bank_, feat.data());
    for (size_t c = 0; c < feat.size(); ++c) {
        feat[c] = power_.skipped[c]
                      ? feat[c] - power_.means[c]
                      : (yeo_johnson(feat[c], power_.lambdas[c]) - power_.means[c]) / power_.stds[c];
    }
    std::vector<double> z(k);
    for (size_t c = 0; c < k; ++c) {
        double s = logit_.biases[c];
        const double* wc = logit_.weights.data() + c * logit_.n_features;
        for (size_t j = 0; j < logit_.n_features; ++j) s += wc[j] * feat[j];
        z[c] = s;
    }
    softmax_inplace(z);
    return z;
}

double FittedClassifier::verification_score(const Sample& probe, int claimed_id) const {
    const auto it = std::lower_bound(classes_.begin(), classes_.end(), claimed_id);
    if (it == classes_.end() || *it != claimed_id)
        throw ConfigError("unknown claimed id " + std::to_string(claimed_id));
    return predict_proba(probe)[it - classes_.begin()];
}

// --- serialization --------------------------------------------------------

void to_json(nlohmann::ordered_json& j, const FittedClassifier& c) {
    j["kind"] = to_string(c.config_.kind);
    j["seed"] = c.seed_;
    j["input_length"] = c.input_length_;
    j["input_channels"] = c.input_channels_;
    j["classes"] = c.classes_;
    nlohmann::ordered_json cfg;
    cfg["n_trees"] = c.config_.n_trees;
    cfg["quant_depth"] = c.config_.quant.depth;
    cfg["quant_divisor"] = c.config_.quant.divisor;
    cfg["n_kernels"] = c.config_.n_kernels;
    cfg["l2"] = c.config_.l2;
    j["config"] = cfg;

    if (c.config_.kind == ClassifierKind::quant_et) {
        nlohmann::ordered_json trees = nlohmann::ordered_json::array();
        for (const EtTree& tree : c.trees_) {
            nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
            for (const EtNode& nd : tree.nodes)
                nodes.push_back({nd.feature, nd.split, nd.left, nd.right, nd.class_freq});
            trees.push_back(std::move(nodes));
        }
        j["trees"] = std::move(trees);
    } else {
        nlohmann::ordered_json bank;
        bank["n_kernels"] = c.bank_.n_kernels;
        bank["input_length"] = c.bank_.input_length;
        bank["input_channels"] = c.bank_.input_channels;
        bank["seed"] = c.bank_.seed;
        j["bank"] = bank;
        nlohmann::ordered_json power;
        power["lambdas"] = c.power_.lambdas;
        power["means"] = c.power_.means;
        power["stds"] = c.power_.stds;
        power["skipped"] = c.power_.skipped;
        j["power"] = power;
        nlohmann::ordered_json logit;
        logit["n_features"] = c.logit_.n_features;
        logit["n_classes"] = c.logit_.n_classes;
        logit["weights"] = c.logit_.weights;
        logit["biases"] = c.logit_.biases;
        j["logit"] = logit;
    }
}

void from_json(const nlohmann::ordered_json& j, FittedClassifier& c) {
    c.config_.kind = classifier_kind_from_string(j.at("kind").get<std::string>());
    c.seed_ = j.at("seed").get<uint64_t>();
    c.input_length_ = j.at("input_length").get<size_t>();
    c.input_channels_ = j.at("input_channels").get<size_t>();
    c.classes_ = j.at("classes").get<std::vector<int>>();
    const auto& cfg = j.at("config");
    c.config_.n_trees = cfg.at("n_trees").get<int>();
    c.config_.quant.depth = cfg.at("quant_depth").get<int>();
    c.config_.quant.divisor = cfg.at("quant_divisor").get<int>();
    c.config_.n_kernels = cfg.at("n_kernels").get<int>();
    c.config_.l2 = cfg.at("l2").get<double>();

    if (c.config_.kind == ClassifierKind::quant_et) {
        c.trees_.clear();
        for (const auto& tnodes : j.at("trees")) {
            EtTree tree;
            for (const auto& nd : tnodes) {
                EtNode n;
                n.feature = nd.at(0).get<int>();
                n.split = nd.at(1).get<double>();
                n.left = nd.at(2).get<int>();
                n.right = nd.at(3).get<int>();
                n.class_freq = nd.at(4).get<std::vector<double>>();
                tree.nodes.push_back(std::move(n));
            }
            c.trees_.push_back(std::move(tree));
        }
    } else {
        const auto& bank = j.at("bank");
        c.bank_ = KernelBank::generate(bank.at("input_length").get<size_t>(),
                                       bank.at("input_channels").get<size_t>(),
                                       bank.at("n_kernels").get<int>(),
                                       bank.at("seed").get<uint64_t>());
        const auto& power = j.at("power");
        c.power_.lambdas = power.at("lambdas").get<std::vector<double>>();
        c.power_.means = power.at("means").get<std::vector<double>>();
        c.power_.stds = power.at("stds").get<std::vector<double>>();
        c.power_.skipped = power.at("skipped").get<std::vector<uint8_t>>();
        const auto& logit = j.at("logit");
        c.logit_.n_features = logit.at("n_features").get<size_t>();
        c.logit_.n_classes = logit.at("n_classes").get<size_t>();
        c.logit_.weights = logit.at("weights").get<std::vector<double>>();
        c.logit_.biases = logit.at("biases").get<std::vector<double>>();
    }
}

}  // namespace motiongate
