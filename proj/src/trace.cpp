#include "motiongate/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "motiongate/errors.hpp"

namespace motiongate {

namespace {

const std::string kCsvHeader =
    "t_ms,acc_x,acc_y,acc_z,gyr_x,gyr_y,gyr_z,mag_x,mag_y,mag_z,"
    "lacc_x,lacc_y,lacc_z,grav_x,grav_y,grav_z";

// Shortest round-trip representation, identical on every run.
std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double_cell(const std::string& cell, size_t line) {
    double v = 0.0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw ParseError("bad_cell", "line " + std::to_string(line) + ": cannot parse '" + cell + "'");
    if (!std::isfinite(v))
        throw ParseError("non_finite_value", "line " + std::to_string(line) + ": non-finite value");
    return v;
}

}  // namespace

std::string to_string(Label l) { return l == Label::bonafide ? "bonafide" : "attack"; }

std::string to_string(AttackType t) {
    switch (t) {
        case AttackType::none: return "none";
        case AttackType::stationary: return "stationary";
        case AttackType::handheld: return "handheld";
        case AttackType::temporal_shift: return "temporal_shift";
    }
    return "none";
}

Label label_from_string(const std::string& s) {
    if (s == "bonafide") return Label::bonafide;
    if (s == "attack") return Label::attack;
    throw ParseError("bad_label", "unknown label '" + s + "'");
}

AttackType attack_type_from_string(const std::string& s) {
    if (s == "none") return AttackType::none;
    if (s == "stationary") return AttackType::stationary;
    if (s == "handheld") return AttackType::handheld;
    if (s == "temporal_shift") return AttackType::temporal_shift;
    throw ParseError("bad_attack_type", "unknown attack_type '" + s + "'");
}

void MotionTrace::validate() const {
    if (timestamps_ms.empty())
        throw ParseError("empty_trace", trace_id + ": no samples");
    if (samples.size() != timestamps_ms.size() * kNumChannels)
        throw ParseError("shape", trace_id + ": sample/timestamp count mismatch");
    for (size_t i = 1; i < timestamps_ms.size(); ++i)
        if (timestamps_ms[i] < timestamps_ms[i - 1])
            throw ParseError("non_monotonic_timestamps",
                             trace_id + ": timestamp decreases at row " + std::to_string(i));
    if (camera_open_ms > capture_ms)
        throw ParseError("event_order", trace_id + ": capture_ms before camera_open_ms");
    if (label == Label::bonafide && attack_type != AttackType::none)
        throw ParseError("label_attack_type", trace_id + ": bonafide with attack_type set");
    if (label == Label::attack && attack_type == AttackType::none)
        throw ParseError("label_attack_type", trace_id + ": attack without attack_type");
    for (double v : samples)
        if (!std::isfinite(v))
            throw ParseError("non_finite_value", trace_id + ": non-finite sample value");
}

ChannelSelector ChannelSelector::builtin(const std::string& name) {
    if (name == "acc_x" || name == "1ch") return {"acc_x", {0}};
    if (name == "acc_xyz" || name == "3acc") return {"acc_xyz", {0, 1, 2}};
    if (name == "cross_x" || name == "3ch") return {"cross_x", {0, 3, 6}};
    if (name == "nine" || name == "9ch") return {"nine", {0, 1, 2, 3, 4, 5, 6, 7, 8}};
    if (name == "lacc_xyz") return {"lacc_xyz", {9, 10, 11}};
    if (name == "grav_xyz") return {"grav_xyz", {12, 13, 14}};
    if (name == "mag_xyz") return {"mag_xyz", {6, 7, 8}};
    if (name == "gyr_xyz") return {"gyr_xyz", {3, 4, 5}};
    if (name == "all") return {"all", {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14}};
    throw ConfigError("unknown channel selector '" + name + "'");
}

std::vector<std::string> ChannelSelector::builtin_names() {
    return {"acc_x", "acc_xyz", "cross_x", "nine", "lacc_xyz", "grav_xyz", "mag_xyz", "gyr_xyz", "all"};
}

MotionTrace parse_trace(const std::string& csv_text, const std::string& meta_json_text) {
    MotionTrace trace;

    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(meta_json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad_meta_json", e.what());
    }
    for (const char* key : {"trace_id", "participant_id", "camera_open_ms", "capture_ms", "label", "attack_type"})
        if (!meta.contains(key))
            throw ParseError("missing_meta_field", std::string("meta missing '") + key + "'");
    trace.trace_id = meta["trace_id"].get<std::string>();
    if (!meta["participant_id"].is_null())
        trace.participant_id = meta["participant_id"].get<int>();
    trace.camera_open_ms = meta["camera_open_ms"].get<int64_t>();
    trace.capture_ms = meta["capture_ms"].get<int64_t>();
    trace.label = label_from_string(meta["label"].get<std::string>());
    trace.attack_type = attack_type_from_string(meta["attack_type"].get<std::string>());

    std::istringstream in(csv_text);
    std::string line;
    if (!std::getline(in, line))
        throw ParseError("empty_csv", trace.trace_id + ": empty CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader)
        throw ParseError("header_mismatch", trace.trace_id + ": unexpected CSV header");

    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        size_t start = 0;
        while (true) {
            size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (cells.size() != kNumChannels + 1)
            throw ParseError("bad_row", trace.trace_id + ": line " + std::to_string(lineno) +
                                            " has " + std::to_string(cells.size()) + " columns");
        int64_t t = 0;
        auto res = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), t);
        if (res.ec != std::errc() || res.ptr != cells[0].data() + cells[0].size())
            throw ParseError("bad_timestamp", trace.trace_id + ": line " + std::to_string(lineno));
        trace.timestamps_ms.push_back(t);
        for (int c = 0; c < kNumChannels; ++c)
            trace.samples.push_back(parse_double_cell(cells[c + 1], lineno));
    }

    trace.validate();
    return trace;
}

std::string serialize_trace_csv(const MotionTrace& trace) {
    std::string out = kCsvHeader + "\n";
    for (size_t t = 0; t < trace.rows(); ++t) {
        out += std::to_string(trace.timestamps_ms[t]);
        for (int c = 0; c < kNumChannels; ++c) {
            out += ',';
            out += format_double(trace.at(t, c));
        }
        out += '\n';
    }
    return out;
}

std::string serialize_trace_meta(const MotionTrace& trace) {
    nlohmann::ordered_json meta;
    meta["trace_id"] = trace.trace_id;
    if (trace.participant_id)
        meta["participant_id"] = *trace.participant_id;
    else
        meta["participant_id"] = nullptr;
    meta["camera_open_ms"] = trace.camera_open_ms;
    meta["capture_ms"] = trace.capture_ms;
    meta["label"] = to_string(trace.label);
    meta["attack_type"] = to_string(trace.attack_type);
    return meta.dump(2) + "\n";
}

MotionTrace regularize_grid(const MotionTrace& trace) {
    trace.validate();
    const auto& ts = trace.timestamps_ms;
    for (size_t i = 1; i < ts.size(); ++i)
        if (ts[i] - ts[i - 1] > kMaxGapMs)
            throw UnrecoverableGapError(trace.trace_id + ": " + std::to_string(ts[i] - ts[i - 1]) +
                                        " ms gap at row " + std::to_string(i));

    const int64_t t0 = ts.front();
    const int64_t span = ts.back() - t0;
    const size_t n = static_cast<size_t>(span / kNominalStepMs) + 1;

    MotionTrace out = trace;
    out.timestamps_ms.assign(n, 0);
    out.samples.assign(n * kNumChannels, 0.0);

    size_t seg = 0;  // ts[seg] <= t < ts[seg+1]
    for (size_t i = 0; i < n; ++i) {
        const int64_t t = t0 + static_cast<int64_t>(i) * kNominalStepMs;
        out.timestamps_ms[i] = t;
        while (seg + 1 < ts.size() && ts[seg + 1] <= t) ++seg;
        if (seg + 1 >= ts.size() || ts[seg] == t) {
            for (int c = 0; c < kNumChannels; ++c) out.at(i, c) = trace.at(seg, c);
            continue;
        }
        const double w = static_cast<double>(t - ts[seg]) / static_cast<double>(ts[seg + 1] - ts[seg]);
        for (int c = 0; c < kNumChannels; ++c)
            out.at(i, c) = trace.at(seg, c) + w * (trace.at(seg + 1, c) - trace.at(seg, c));
    }
    return out;
}

size_t event_grid_index(const MotionTrace& trace, int64_t event_ms) {
    const int64_t t0 = trace.timestamps_ms.front();
    const int64_t delta = event_ms - t0;
    int64_t idx;
    if (delta <= 0) {
        idx = 0;
    } else {
        // nearest grid point, exact half-step ties toward the earlier index
        idx = (delta + kNominalStepMs / 2 - 1) / kNominalStepMs;
    }
    const int64_t last = static_cast<int64_t>(trace.rows()) - 1;
    return static_cast<size_t>(std::clamp<int64_t>(idx, 0, last));
}

std::vector<const MotionTrace*> Corpus::bonafide() const {
    std::vector<const MotionTrace*> out;
    for (const auto& t : traces)
        if (t.label == Label::bonafide) out.push_back(&t);
    return out;
}

std::vector<const MotionTrace*> Corpus::attacks() const {
    std::vector<const MotionTrace*> out;
    for (const auto& t : traces)
        if (t.label == Label::attack) out.push_back(&t);
    return out;
}

namespace {
std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ParseError("io", "cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}
}  // namespace

Corpus load_corpus(const std::filesystem::path& dir) {
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad_manifest", e.what());
    }
    Corpus corpus;
    for (const auto& id : manifest["trace_ids"]) {
        const std::string tid = id.get<std::string>();
        corpus.traces.push_back(parse_trace(read_file(dir / (tid + ".csv")),
                                            read_file(dir / (tid + ".json"))));
        if (corpus.traces.back().trace_id != tid)
            throw ParseError("manifest_mismatch", "manifest id '" + tid + "' != meta trace_id");
    }
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json manifest;
    manifest["trace_ids"] = nlohmann::json::array();
    for (const auto& t : corpus.traces) {
        manifest["trace_ids"].push_back(t.trace_id);
        std::ofstream csv(dir / (t.trace_id + ".csv"), std::ios::binary);
        csv << serialize_trace_csv(t);
        std::ofstream meta(dir / (t.trace_id + ".json"), std::ios::binary);
        meta << serialize_trace_meta(t);
    }
    std::ofstream mf(dir / "manifest.json", std::ios::binary);
    mf << manifest.dump(2) << "\n";
}

}  // namespace motiongate
