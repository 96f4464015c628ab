#pragma once

#include "cider/audio_io.hpp"
#include "cider/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cider {

/// Frame-level descriptors summarized by functionals. Per file: 18 low-level
/// descriptors (log energy, zero-crossing rate, spectral centroid, roll-off,
/// flux, 13 MFCCs) times 10 functionals (mean, std, min, max, range,
/// skewness, kurtosis, quartiles 1-3) = 180 values.
struct FeatureConfig {
    int sr = 24000;
    double frame_seconds = 0.025;
    double hop_seconds = 0.010;
    int fft_n = 1024;
    int n_mels = 26;
    int n_mfcc = 13;
    double rolloff = 0.85;
    double energy_floor = 1e-10;

    int frame_length() const;
    int hop_length() const;
    void validate() const;
};

inline constexpr int kLowLevelDescriptors = 18;
inline constexpr int kFunctionals = 10;
inline constexpr int kFeaturesPerFile = kLowLevelDescriptors * kFunctionals;
inline constexpr int kFeaturesPerPair = 2 * kFeaturesPerFile;

enum Lld : int { kLogEnergy = 0, kZcr = 1, kCentroid = 2, kRolloff = 3, kFlux = 4, kMfcc0 = 5 };
enum Functional : int {
    kMean = 0, kStd, kMin, kMax, kRange, kSkewness, kKurtosis, kQuartile1, kQuartile2, kQuartile3
};

/// Index of (descriptor, functional) inside a 180-value file vector.
constexpr int feature_index(int lld, int functional) { return lld * kFunctionals + functional; }

/// Descriptor matrix: frames x 18, row-major.
struct DescriptorTrack {
    int frames = 0;
    std::vector<double> values;

    double at(int frame, int lld) const { return values[static_cast<std::size_t>(frame) * kLowLevelDescriptors + lld]; }
};

DescriptorTrack frame_descriptors(std::span<const double> samples, const FeatureConfig& config);

/// Population moments; skewness and excess kurtosis are 0 for constant
/// input. Quartiles use linear interpolation between order statistics.
std::vector<double> functionals(std::span<const double> values);

/// 180 values for one clip (resampled to config.sr first).
std::vector<double> file_features(const AudioClip& clip, const FeatureConfig& config);

struct FeatureVector {
    std::string recording_id;
    std::vector<double> values;  // breath then cough, 360 values
};

/// Throws on decode errors or non-finite features.
FeatureVector extract_features(const RecordingPair& pair, const FeatureConfig& config,
                               const std::string& recording_id = {});

/// "FEAT" cache: magic, u32 N, u32 D, N*D float64 row-major, then N ids
/// (u32 length + bytes). All little-endian.
void write_feature_cache(const std::filesystem::path& path, const std::vector<FeatureVector>& rows);
std::vector<FeatureVector> read_feature_cache(const std::filesystem::path& path);

}  // namespace cider
