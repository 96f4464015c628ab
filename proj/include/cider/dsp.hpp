#pragma once

#include "cider/audio_io.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace cider {

/// STFT/log-magnitude settings. Defaults: fft_n=1024, sr=24 kHz, 8 s
/// segments; hop=fft_n/2 with a periodic Hann window and centered,
/// reflect-padded frames.
struct SpectrogramConfig {
    int fft_n = 1024;
    int hop = 512;
    int sr = 24000;
    int segment_seconds = 8;
    double amin = 1e-5;
    double top_db = 80.0;

    std::size_t segment_length() const { return static_cast<std::size_t>(sr) * segment_seconds; }
    int freq_bins() const { return fft_n / 2 + 1; }
    int frames() const { return 1 + static_cast<int>(segment_length() / static_cast<std::size_t>(hop)); }

    /// Throws InvalidConfig when an invariant is violated.
    void validate() const;
};

/// F x W decibel matrix, row-major (frequency rows, time columns). Values lie
/// in [-top_db, 0], referenced to the segment maximum.
struct LogSpectrogram {
    int freq_bins = 0;
    int frames = 0;
    std::vector<double> values;

    double at(int f, int w) const { return values[static_cast<std::size_t>(f) * frames + w]; }
};

/// Breath/cough pair stacked depth-wise. Stored channel-planar (2 x F x W,
/// float) which is the layout the network consumes; at(f, w, c) gives the
/// F x W x 2 view.
struct ModelInput {
    static constexpr int kBreathChannel = 0;
    static constexpr int kCoughChannel = 1;

    int freq_bins = 0;
    int frames = 0;
    std::vector<float> data;

    float at(int f, int w, int c) const {
        return data[(static_cast<std::size_t>(c) * freq_bins + f) * frames + w];
    }
    std::span<const float> channel(int c) const {
        const std::size_t plane = static_cast<std::size_t>(freq_bins) * frames;
        return {data.data() + c * plane, plane};
    }
};

using Segment = std::vector<double>;

/// Split into s-second segments of sr*s samples each, zero-padding the last.
std::vector<Segment> chunk(const AudioClip& clip, int segment_seconds);

/// Magnitude in dB relative to the segment maximum, clamped below at -top_db.
/// A segment whose maximum magnitude is at most amin maps to -top_db everywhere.
LogSpectrogram log_spectrogram(std::span<const double> segment, const SpectrogramConfig& config);

/// Magnitude STFT only (no dB conversion); exposed for tests and features.
std::vector<double> stft_magnitude(std::span<const double> segment, const SpectrogramConfig& config,
                                   int* frames_out = nullptr);

ModelInput assemble_input(const LogSpectrogram& breath, const LogSpectrogram& cough);

/// Chunk breath and cough independently; the shorter list is cycled from
/// its start so every chunk of the longer recording is used once.
std::vector<ModelInput> pair_segments(const AudioClip& breath, const AudioClip& cough,
                                      const SpectrogramConfig& config);

/// Resample to config.sr when needed.
AudioClip conform_rate(const AudioClip& clip, const SpectrogramConfig& config);

/// "CSPC" flat export: 16-byte header (magic, u32 F, u32 W, u32 reserved)
/// then F*W little-endian float32, row-major.
void write_spectrogram(const std::filesystem::path& path, const LogSpectrogram& spec);
LogSpectrogram read_spectrogram(const std::filesystem::path& path);

}  // namespace cider
