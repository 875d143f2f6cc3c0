#include "motiongate/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "motiongate/dtw.hpp"
#include "motiongate/errors.hpp"
#include "motiongate/rng.hpp"

namespace motiongate {

namespace {

constexpr uint64_t kBootstrapTag = 1ULL << 32;
constexpr double kEulerGamma = 0.5772156649015328606;

double euclid_rows(const double* a, const double* b, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// Mean of the k smallest distances; stable order breaks ties.
double mean_k_smallest(std::vector<double>& dist, int k) {
    std::vector<size_t> idx(dist.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](size_t i, size_t j) { return dist[i] < dist[j]; });
    double s = 0.0;
    for (int i = 0; i < k; ++i) s += dist[idx[i]];
    return s / k;
}

}  // namespace

DetectorKind detector_kind_from_string(const std::string& s) {
    if (s == "rockad") return DetectorKind::rockad;
    if (s == "iforest_raw") return DetectorKind::iforest_raw;
    if (s == "iforest_quant") return DetectorKind::iforest_quant;
    if (s == "knn_euclid") return DetectorKind::knn_euclid;
    if (s == "knn_dtw") return DetectorKind::knn_dtw;
    if (s == "knn_quant") return DetectorKind::knn_quant;
    throw ConfigError("unknown detector kind '" + s + "'");
}

std::string to_string(DetectorKind k) {
    switch (k) {
        case DetectorKind::rockad: return "rockad";
        case DetectorKind::iforest_raw: return "iforest_raw";
        case DetectorKind::iforest_quant: return "iforest_quant";
        case DetectorKind::knn_euclid: return "knn_euclid";
        case DetectorKind::knn_dtw: return "knn_dtw";
        case DetectorKind::knn_quant: return "knn_quant";
    }
    return "rockad";
}

bool is_detector_kind(const std::string& s) {
    try {
        detector_kind_from_string(s);
        return true;
    } catch (const ConfigError&) {
        return false;
    }
}

double knn_score(const std::vector<Sample>& references, const Sample& probe, int k, Metric metric,
                 std::optional<double> dtw_band) {
    if (static_cast<int>(references.size()) < k)
        throw TooFewSamplesError("knn needs at least k references");
    std::vector<double> dist(references.size());
    for (size_t i = 0; i < references.size(); ++i) {
        if (metric == Metric::euclid) {
            if (!references[i].same_shape(probe))
                throw ShapeMismatchError("euclidean knn requires equal shapes");
            dist[i] = euclid_rows(references[i].data.data(), probe.data.data(), probe.data.size());
        } else {
            dist[i] = dtw_distance(references[i], probe, dtw_band);
        }
    }
    return mean_k_smallest(dist, k);
}

double knn_score_rows(const FeatureMatrix& references, const double* probe_row, int k) {
    if (static_cast<int>(references.rows) < k)
        throw TooFewSamplesError("knn needs at least k references");
    std::vector<double> dist(references.rows);
    for (size_t i = 0; i < references.rows; ++i)
        dist[i] = euclid_rows(references.row(i), probe_row, references.cols);
    return mean_k_smallest(dist, k);
}

// --- isolation forest -----------------------------------------------------

double iforest_c(size_t n) {
    if (n <= 1) return 0.0;
    if (n == 2) return 1.0;
    const double nn = static_cast<double>(n);
    return 2.0 * (std::log(nn - 1.0) + kEulerGamma) - 2.0 * (nn - 1.0) / nn;
}

namespace {

int build_iso_node(IsoTree& tree, const FeatureMatrix& m, Rng& rng, std::vector<uint32_t>& idx,
                   size_t lo, size_t hi, int depth, int depth_cap) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes[node_id].depth = depth;
    tree.nodes[node_id].size = static_cast<int>(hi - lo);

    if (depth >= depth_cap || hi - lo <= 1) return node_id;

    const int feature = static_cast<int>(rng.uniform_int(m.cols));
    double minv = m.at(idx[lo], feature), maxv = minv;
    for (size_t i = lo + 1; i < hi; ++i) {
        const double v = m.at(idx[i], feature);
        minv = std::min(minv, v);
        maxv = std::max(maxv, v);
    }
    if (minv == maxv) return node_id;

    const double split = rng.uniform(minv, maxv);
    auto mid_it = std::stable_partition(idx.begin() + lo, idx.begin() + hi,
                                        [&](uint32_t r) { return m.at(r, feature) < split; });
    const size_t mid = static_cast<size_t>(mid_it - idx.begin());
    if (mid == lo || mid == hi) return node_id;

    tree.nodes[node_id].feature = feature;
    tree.nodes[node_id].split = split;
    const int left = build_iso_node(tree, m, rng, idx, lo, mid, depth + 1, depth_cap);
    tree.nodes[node_id].left = left;
    const int right = build_iso_node(tree, m, rng, idx, mid, hi, depth + 1, depth_cap);
    tree.nodes[node_id].right = right;
    return node_id;
}

}  // namespace

IsolationForest IsolationForest::fit(const FeatureMatrix& matrix, int n_trees, int subsample,
                                     uint64_t seed) {
    if (matrix.rows < 2) throw TooFewSamplesError("isolation forest needs at least 2 rows");
    IsolationForest forest;
    forest.seed = seed;
    const size_t n = matrix.rows;
    const size_t sub = subsample > 0 ? std::min<size_t>(subsample, n) : std::min<size_t>(256, n);
    forest.subsample_size = sub;
    const int depth_cap = static_cast<int>(std::ceil(std::log2(static_cast<double>(sub))));

    forest.trees.resize(n_trees);
    for (int t = 0; t < n_trees; ++t) {
        Rng rng = Rng::derive(seed, static_cast<uint64_t>(t));
        std::vector<uint32_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        if (sub < n) {
            for (size_t i = 0; i < sub; ++i) {
                const size_t j = i + rng.uniform_int(n - i);
                std::swap(idx[i], idx[j]);
            }
            idx.resize(sub);
        }
        build_iso_node(forest.trees[t], matrix, rng, idx, 0, idx.size(), 0, depth_cap);
    }
    return forest;
}

double IsolationForest::score(const double* row, size_t /*cols*/) const {
    double total = 0.0;
    for (const IsoTree& tree : trees) {
        int node = 0;
        while (tree.nodes[node].feature >= 0) {
            const IsoNode& nd = tree.nodes[node];
            node = row[nd.feature] < nd.split ? nd.left : nd.right;
        }
        total += tree.nodes[node].depth + iforest_c(static_cast<size_t>(tree.nodes[node].size));
    }
    const double avg = total / static_cast<double>(trees.size());
    return std::pow(2.0, -avg / iforest_c(subsample_size));
}

// --- FittedDetector -------------------------------------------------------

FittedDetector FittedDetector::fit(const std::vector<Sample>& train, const DetectorConfig& config,
                                   uint64_t seed) {
    if (train.empty()) throw TooFewSamplesError("no training samples");
    for (const auto& s : train)
        if (!s.same_shape(train.front()))
            throw ShapeMismatchError("training samples disagree on shape");

    FittedDetector d;
    d.config_ = config;
    d.seed_ = seed;
    d.input_length_ = train.front().length;
    d.input_channels_ = train.front().channels;

    switch (config.kind) {
        case DetectorKind::rockad: {
            if (static_cast<int>(train.size()) < config.k + 1)
                throw TooFewSamplesError("rockad needs at least k+1 training samples");
            d.bank_ = KernelBank::generate(d.input_length_, d.input_channels_, config.n_kernels, seed);
            FeatureMatrix feats = kernel_transform(train, d.bank_);
            d.power_ = power_transform_fit(feats);
            d.references_ = power_transform_apply(feats, d.power_);
            d.bootstrap_.resize(config.n_estimators);
            const size_t n = train.size();
            for (int e = 0; e < config.n_estimators; ++e) {
                Rng rng = Rng::derive(seed, kBootstrapTag + static_cast<uint64_t>(e));
                d.bootstrap_[e].resize(n);
                for (size_t i = 0; i < n; ++i)
                    d.bootstrap_[e][i] = static_cast<uint32_t>(rng.uniform_int(n));
            }
            break;
        }
        case DetectorKind::iforest_raw:
            d.forest_ = IsolationForest::fit(flatten_raw(train), config.n_trees, config.subsample, seed);
            break;
        case DetectorKind::iforest_quant:
            d.forest_ = IsolationForest::fit(quant_transform(train, config.quant), config.n_trees,
                                             config.subsample, seed);
            break;
        case DetectorKind::knn_euclid:
            if (static_cast<int>(train.size()) < config.k)
                throw TooFewSamplesError("knn needs at least k references");
            d.references_ = flatten_raw(train);
            break;
        case DetectorKind::knn_quant:
            if (static_cast<int>(train.size()) < config.k)
                throw TooFewSamplesError("knn needs at least k references");
            d.references_ = quant_transform(train, config.quant);
            break;
        case DetectorKind::knn_dtw:
            if (static_cast<int>(train.size()) < config.k)
                throw TooFewSamplesError("knn needs at least k references");
            d.reference_samples_ = train;
            break;
    }
    return d;
}

double FittedDetector::score(const Sample& probe) const {
    if (probe.length != input_length_ || probe.channels != input_channels_)
        throw ShapeMismatchError("probe shape does not match fitted detector");

    switch (config_.kind) {
        case DetectorKind::rockad: {
            std::vector<double> feat(2 * static_cast<size_t>(config_.n_kernels));
            kernel_transform_row(probe, bank_, feat.data());
            for (size_t c = 0; c < feat.size(); ++c) {
                feat[c] = power_.skipped[c]
                              ? feat[c] - power_.means[c]
                              : (yeo_johnson(feat[c], power_.lambdas[c]) - power_.means[c]) / power_.stds[c];
            }
            double total = 0.0;
            std::vector<double> dist;
            for (const auto& boot : bootstrap_) {
                dist.resize(boot.size());
                for (size_t i = 0; i < boot.size(); ++i)
                    dist[i] = euclid_rows(references_.row(boot[i]), feat.data(), references_.cols);
                total += mean_k_smallest(dist, config_.k);
            }
            return total / static_cast<double>(bootstrap_.size());
        }
        case DetectorKind::iforest_raw: {
            return forest_.score(probe.data.data(), probe.data.size());
        }
        case DetectorKind::iforest_quant: {
            std::vector<double> feat(quant_feature_count(probe.length, probe.channels, config_.quant));
            quant_transform_row(probe, config_.quant, feat.data());
            return forest_.score(feat.data(), feat.size());
        }
        case DetectorKind::knn_euclid:
            return knn_score_rows(references_, probe.data.data(), config_.k);
        case DetectorKind::knn_quant: {
            std::vector<double> feat(quant_feature_count(probe.length, probe.channels, config_.quant));
            quant_transform_row(probe, config_.quant, feat.data());
            return knn_score_rows(references_, feat.data(), config_.k);
        }
        case DetectorKind::knn_dtw:
            return knn_score(reference_samples_, probe, config_.k, Metric::dtw, config_.dtw_band);
    }
    throw ConfigError("unreachable detector kind");
}

// --- serialization --------------------------------------------------------

namespace {

nlohmann::ordered_json sample_to_json(const Sample& s) {
    nlohmann::ordered_json j;
    j["length"] = s.length;
    j["channels"] = s.channels;
    j["data"] = s.data;
    j["trace_id"] = s.trace_id;
    return j;
}

Sample sample_from_json(const nlohmann::ordered_json& j) {
    Sample s;
    s.length = j.at("length").get<size_t>();
    s.channels = j.at("channels").get<size_t>();
    s.data = j.at("data").get<std::vector<double>>();
    s.trace_id = j.at("trace_id").get<std::string>();
    return s;
}

nlohmann::ordered_json matrix_to_json(const FeatureMatrix& m) {
    nlohmann::ordered_json j;
    j["rows"] = m.rows;
    j["cols"] = m.cols;
    j["data"] = m.data;
    j["provenance"] = m.provenance;
    return j;
}

FeatureMatrix matrix_from_json(const nlohmann::ordered_json& j) {
    FeatureMatrix m;
    m.rows = j.at("rows").get<size_t>();
    m.cols = j.at("cols").get<size_t>();
    m.data = j.at("data").get<std::vector<double>>();
    m.provenance = j.at("provenance").get<std::string>();
    return m;
}

}  // namespace

void to_json(nlohmann::ordered_json& j, const FittedDetector& d) {
    j["kind"] = to_string(d.config_.kind);
    j["seed"] = d.seed_;
    j["input_length"] = d.input_length_;
    j["input_channels"] = d.input_channels_;
    nlohmann::ordered_json cfg;
    cfg["n_estimators"] = d.config_.n_estimators;
    cfg["n_kernels"] = d.config_.n_kernels;
    cfg["k"] = d.config_.k;
    if (d.config_.dtw_band)
        cfg["dtw_band"] = *d.config_.dtw_band;
    else
        cfg["dtw_band"] = nullptr;
    cfg["n_trees"] = d.config_.n_trees;
    cfg["subsample"] = d.config_.subsample;
    cfg["quant_depth"] = d.config_.quant.depth;
    cfg["quant_divisor"] = d.config_.quant.divisor;
    j["config"] = cfg;

    switch (d.config_.kind) {
        case DetectorKind::rockad: {
            nlohmann::ordered_json bank;
            bank["n_kernels"] = d.bank_.n_kernels;
            bank["input_length"] = d.bank_.input_length;
            bank["input_channels"] = d.bank_.input_channels;
            bank["seed"] = d.bank_.seed;
            j["bank"] = bank;  // regenerated from seed on load
            nlohmann::ordered_json power;
            power["lambdas"] = d.power_.lambdas;
            power["means"] = d.power_.means;
            power["stds"] = d.power_.stds;
            power["skipped"] = d.power_.skipped;
            j["power"] = power;
            j["references"] = matrix_to_json(d.references_);
            j["bootstrap"] = d.bootstrap_;
            break;
        }
        case DetectorKind::iforest_raw:
        case DetectorKind::iforest_quant: {
            nlohmann::ordered_json forest;
            forest["subsample_size"] = d.forest_.subsample_size;
            forest["seed"] = d.forest_.seed;
            nlohmann::ordered_json trees = nlohmann::ordered_json::array();
            for (const IsoTree& tree : d.forest_.trees) {
                nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
                for (const IsoNode& nd : tree.nodes)
                    nodes.push_back({nd.feature, nd.split, nd.left, nd.right, nd.size, nd.depth});
                trees.push_back(std::move(nodes));
            }
            forest["trees"] = std::move(trees);
            j["forest"] = std::move(forest);
            break;
        }
        case DetectorKind::knn_euclid:
        case DetectorKind::knn_quant:
            j["references"] = matrix_to_json(d.references_);
            break;
        case DetectorKind::knn_dtw: {
            nlohmann::ordered_json refs = nlohmann::ordered_json::array();
            for (const Sample& s : d.reference_samples_) refs.push_back(sample_to_json(s));
            j["reference_samples"] = std::move(refs);
            break;
        }
    }
}

void from_json(const nlohmann::ordered_json& j, FittedDetector& d) {
    d.config_.kind = detector_kind_from_string(j.at("kind").get<std::string>());
    d.seed_ = j.at("seed").get<uint64_t>();
    d.input_length_ = j.at("input_length").get<size_t>();
    d.input_channels_ = j.at("input_channels").get<size_t>();
    const auto& cfg = j.at("config");
    d.config_.n_estimators = cfg.at("n_estimators").get<int>();
    d.config_.n_kernels = cfg.at("n_kernels").get<int>();
    d.config_.k = cfg.at("k").get<int>();
    if (!cfg.at("dtw_band").is_null()) d.config_.dtw_band = cfg.at("dtw_band").get<double>();
    d.config_.n_trees = cfg.at("n_trees").get<int>();
    d.config_.subsample = cfg.at("subsample").get<int>();
    d.config_.quant.depth = cfg.at("quant_depth").get<int>();
    d.config_.quant.divisor = cfg.at("quant_divisor").get<int>();

    switch (d.config_.kind) {
        case DetectorKind::rockad: {
            const auto& bank = j.at("bank");
            d.bank_ = KernelBank::generate(bank.at("input_length").get<size_t>(),
                                           bank.at("input_channels").get<size_t>(),
                                           bank.at("n_kernels").get<int>(),
                                           bank.at("seed").get<uint64_t>());
            const auto& power = j.at("power");
            d.power_.lambdas = power.at("lambdas").get<std::vector<double>>();
            d.power_.means = power.at("means").get<std::vector<double>>();
            d.power_.stds = power.at("stds").get<std::vector<double>>();
            d.power_.skipped = power.at("skipped").get<std::vector<uint8_t>>();
            d.references_ = matrix_from_json(j.at("references"));
            d.bootstrap_ = j.at("bootstrap").get<std::vector<std::vector<uint32_t>>>();
            break;
        }
        case DetectorKind::iforest_raw:
        case DetectorKind::iforest_quant: {
            const auto& forest = j.at("forest");
            d.forest_.subsample_size = forest.at("subsample_size").get<size_t>();
            d.forest_.seed = forest.at("seed").get<uint64_t>();
            d.forest_.trees.clear();
            for (const auto& tnodes : forest.at("trees")) {
                IsoTree tree;
                for (const auto& nd : tnodes) {
                    IsoNode n;
                    n.feature = nd.at(0).get<int>();
                    n.split = nd.at(1).get<double>();
                    n.left = nd.at(2).get<int>();
                    n.right = nd.at(3).get<int>();
                    n.size = nd.at(4).get<int>();
                    n.depth = nd.at(5).get<int>();
                    tree.nodes.push_back(n);
                }
                d.forest_.trees.push_back(std::move(tree));
            }
            break;
        }
        case DetectorKind::knn_euclid:
        case DetectorKind::knn_quant:
            d.references_ = matrix_from_json(j.at("references"));
            break;
        case DetectorKind::knn_dtw:
            d.reference_samples_.clear();
            for (const auto& s : j.at("reference_samples"))
                d.reference_samples_.push_back(sample_from_json(s));
            break;
    }
}

}  // namespace motiongate
