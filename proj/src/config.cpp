#include "cider/config.hpp"

#include "cider/error.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>
#include <vector>

namespace cider {

void ProtocolConfig::validate() const {
    spectrogram.validate();
    model.validate();
    train.validate();
    baseline.validate();
    if (runs < 1) throw Error(ErrorKind::InvalidConfig, "runs must be >= 1");
    if (!(ci_level > 0.0 && ci_level < 1.0)) throw Error(ErrorKind::InvalidConfig, "ci_level must be in (0, 1)");
    if (threads < 0) throw Error(ErrorKind::InvalidConfig, "threads must be >= 0");
}

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    throw Error(ErrorKind::InvalidConfig, "bad value for " + key + ": '" + value + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* begin = value.data();
    const char* end = begin + value.size();
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end) bad_value(key, value);
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    bad_value(key, value);
}

std::array<int, 4> parse_int4(const std::string& key, const std::string& value) {
    const auto items = split_list(value);
    if (items.size() != 4) bad_value(key, value);
    std::array<int, 4> out{};
    for (std::size_t i = 0; i < 4; ++i) out[i] = parse_number<int>(key, items[i]);
    return out;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename C>
std::string join(const C& values) {
    std::string out;
    for (const auto& v : values) {
        if (!out.empty()) out += ',';
        if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>) {
            out += fmt_double(v);
        } else {
            out += std::to_string(v);
        }
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> canonical_settings(const ProtocolConfig& c) {
    const auto& s = c.spectrogram;
    const auto& t = c.train;
    const auto& b = c.baseline;
    return {
        {"fft_n", std::to_string(s.fft_n)},
        {"hop", std::to_string(s.hop)},
        {"sr", std::to_string(s.sr)},
        {"segment_seconds", std::to_string(s.segment_seconds)},
        {"amin", fmt_double(s.amin)},
        {"top_db", fmt_double(s.top_db)},
        {"channels", join(c.model.channels)},
        {"kernel", std::to_string(c.model.kernel)},
        {"strides", join(c.model.strides)},
        {"stem_stride", std::to_string(c.model.stem_stride)},
        {"learning_rate", fmt_double(t.learning_rate)},
        {"batch_size", std::to_string(t.batch_size)},
        {"max_epochs", std::to_string(t.max_epochs)},
        {"adam_beta1", fmt_double(t.adam_beta1)},
        {"adam_beta2", fmt_double(t.adam_beta2)},
        {"adam_eps", fmt_double(t.adam_eps)},
        {"class_weights", t.auto_class_weights ? "auto" : fmt_double(t.w_pos) + "," + fmt_double(t.w_neg)},
        {"selection_metric", t.selection == SelectionMetric::Auc ? "auc" : "uar"},
        {"runs", std::to_string(c.runs)},
        {"seed", std::to_string(c.seed)},
        {"ci_level", fmt_double(c.ci_level)},
        {"threads", std::to_string(c.threads)},
        {"baseline_pca_k", std::to_string(b.pca_k)},
        {"baseline_c_grid", join(b.c_grid)},
        {"baseline_iterations", std::to_string(b.iterations)},
        {"baseline_balanced", b.balanced ? "true" : "false"},
        {"feature_sr", std::to_string(b.features.sr)},
        {"feature_frame_seconds", fmt_double(b.features.frame_seconds)},
        {"feature_hop_seconds", fmt_double(b.features.hop_seconds)},
        {"feature_fft_n", std::to_string(b.features.fft_n)},
    };
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& source) {
    std::map<std::string, std::string> out;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::InvalidConfig, source + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw Error(ErrorKind::InvalidConfig, source + ":" + std::to_string(line_no) + ": empty key");
        if (out.contains(key)) {
            throw Error(ErrorKind::InvalidConfig, source + ":" + std::to_string(line_no) + ": duplicate key " + key);
        }
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

void apply_setting(ProtocolConfig& c, const std::string& key, const std::string& v) {
    auto& s = c.spectrogram;
    auto& t = c.train;
    auto& b = c.baseline;
    if (key == "fft_n") s.fft_n = parse_number<int>(key, v);
    else if (key == "hop") s.hop = parse_number<int>(key, v);
    else if (key == "sr") s.sr = parse_number<int>(key, v);
    else if (key == "segment_seconds") s.segment_seconds = parse_number<int>(key, v);
    else if (key == "amin") s.amin = parse_number<double>(key, v);
    else if (key == "top_db") s.top_db = parse_number<double>(key, v);
    else if (key == "channels") c.model.channels = parse_int4(key, v);
    else if (key == "kernel") c.model.kernel = parse_number<int>(key, v);
    else if (key == "strides") c.model.strides = parse_int4(key, v);
    else if (key == "stem_stride") c.model.stem_stride = parse_number<int>(key, v);
    else if (key == "learning_rate") t.learning_rate = parse_number<double>(key, v);
    else if (key == "batch_size") t.batch_size = parse_number<int>(key, v);
    else if (key == "max_epochs") t.max_epochs = parse_number<int>(key, v);
    else if (key == "adam_beta1") t.adam_beta1 = parse_number<double>(key, v);
    else if (key == "adam_beta2") t.adam_beta2 = parse_number<double>(key, v);
    else if (key == "adam_eps") t.adam_eps = parse_number<double>(key, v);
    else if (key == "class_weights") {
        if (v == "auto") {
            t.auto_class_weights = true;
        } else {
            const auto items = split_list(v);
            if (items.size() != 2) bad_value(key, v);
            t.auto_class_weights = false;
            t.w_pos = parse_number<double>(key, items[0]);
            t.w_neg = parse_number<double>(key, items[1]);
        }
    } else if (key == "selection_metric") {
        if (v == "auc") t.selection = SelectionMetric::Auc;
        else if (v == "uar") t.selection = SelectionMetric::Uar;
        else bad_value(key, v);
    } else if (key == "runs") c.runs = parse_number<int>(key, v);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
    else if (key == "ci_level") c.ci_level = parse_number<double>(key, v);
    else if (key == "threads") c.threads = parse_number<int>(key, v);
    else if (key == "baseline_pca_k") b.pca_k = parse_number<int>(key, v);
    else if (key == "baseline_c_grid") {
        b.c_grid.clear();
        for (const auto& item : split_list(v)) b.c_grid.push_back(parse_number<double>(key, item));
    } else if (key == "baseline_iterations") b.iterations = parse_number<std::int64_t>(key, v);
    else if (key == "baseline_balanced") b.balanced = parse_bool(key, v);
    else if (key == "feature_sr") b.features.sr = parse_number<int>(key, v);
    else if (key == "feature_frame_seconds") b.features.frame_seconds = parse_number<double>(key, v);
    else if (key == "feature_hop_seconds") b.features.hop_seconds = parse_number<double>(key, v);
    else if (key == "feature_fft_n") b.features.fft_n = parse_number<int>(key, v);
    else throw Error(ErrorKind::InvalidConfig, "unknown config key " + key);
}

ProtocolConfig load_config(const std::filesystem::path& path, ProtocolConfig base) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingFile, "cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    for (const auto& [k, v] : parse_key_values(buf.str(), path.string())) apply_setting(base, k, v);
    base.validate();
    return base;
}

std::string config_to_text(const ProtocolConfig& config) {
    std::string out;
    for (const auto& [k, v] : canonical_settings(config)) out += k + " = " + v + "\n";
    return out;
}

nlohmann::ordered_json protocol_config_to_json(const ProtocolConfig& config) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : canonical_settings(config)) j[k] = v;
    return j;
}

}  // namespace cider
