#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cider {

/// Mono audio in [-1, 1] at a fixed sample rate.
struct AudioClip {
    std::vector<double> samples;
    int sample_rate = 0;
    std::string source_path;

    double duration_seconds() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

/// Decode a RIFF/WAVE file. Accepts PCM 8/16/24/32-bit integer and 32-bit
/// IEEE float, mono or stereo; stereo is averaged to mono. Chunks other than
/// `fmt ` and `data` are skipped.
AudioClip read_wav(const std::filesystem::path& path);

/// Decode from an in-memory byte buffer (same rules as read_wav).
AudioClip decode_wav(std::span<const std::uint8_t> bytes, const std::string& source = {});

/// Canonical 44-byte-header 16-bit PCM mono WAV. Samples are clamped to
/// [-1, 1] and quantized as round(x * 32768) saturated to int16.
std::vector<std::uint8_t> encode_wav16(std::span<const double> samples, int sample_rate);
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

/// Band-limited polyphase windowed-sinc resampling (32 taps per phase,
/// Hann window). Output length is round(n * target / source).
AudioClip resample(const AudioClip& clip, int target_sr);

}  // namespace cider
