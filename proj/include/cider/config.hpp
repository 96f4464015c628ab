#pragma once

#include "cider/baseline.hpp"
#include "cider/dsp.hpp"
#include "cider/model.hpp"
#include "cider/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

namespace cider {

/// Everything a protocol run depends on.
struct ProtocolConfig {
    SpectrogramConfig spectrogram;
    CiderConfig model;
    TrainConfig train;
    BaselineConfig baseline;
    int runs = 3;
    std::uint64_t seed = 0;
    double ci_level = 0.95;
    int threads = 0;  // 0 = CIDER_THREADS or hardware concurrency

    void validate() const;
};

/// Flat "key = value" text; '#' starts a comment. Keys:
///   fft_n hop sr segment_seconds amin top_db
///   channels kernel strides stem_stride            (lists comma-separated)
///   learning_rate batch_size max_epochs adam_beta1 adam_beta2 adam_eps
///   class_weights = auto | <w_pos>,<w_neg>
///   selection_metric = auc | uar
///   runs seed ci_level threads
///   baseline_pca_k baseline_c_grid baseline_iterations baseline_balanced
///   feature_sr feature_frame_seconds feature_hop_seconds feature_fft_n
std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& source = "config");

/// Applies one setting; throws InvalidConfig for unknown keys or bad values.
void apply_setting(ProtocolConfig& config, const std::string& key, const std::string& value);

ProtocolConfig load_config(const std::filesystem::path& path, ProtocolConfig base = {});

/// Canonical key=value rendering; load_config of this text reproduces `config`.
std::string config_to_text(const ProtocolConfig& config);
nlohmann::ordered_json protocol_config_to_json(const ProtocolConfig& config);

}  // namespace cider
