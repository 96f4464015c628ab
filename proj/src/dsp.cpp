#include "cider/dsp.hpp"

#include "cider/error.hpp"
#include "cider/fft.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace cider {

namespace {

constexpr double kPi = 3.14159265358979323846;

// numpy-style "reflect" padding index (edge sample not repeated), folded as
// many times as needed for very short inputs.
std::size_t reflect_index(std::int64_t i, std::int64_t n) {
    if (n == 1) return 0;
    const std::int64_t period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    if (i >= n) i = period - i;
    return static_cast<std::size_t>(i);
}

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(const unsigned char* b) {
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void SpectrogramConfig::validate() const {
    if (fft_n <= 0 || !is_power_of_two(static_cast<std::size_t>(fft_n))) {
        throw Error(ErrorKind::InvalidConfig, "fft_n must be a power of two");
    }
    if (hop <= 0 || hop > fft_n) {
        throw Error(ErrorKind::InvalidConfig, "hop must be in [1, fft_n]");
    }
    if (sr <= 0 || segment_seconds <= 0) {
        throw Error(ErrorKind::InvalidConfig, "sr and segment_seconds must be positive");
    }
    if (!(amin > 0.0) || !(top_db > 0.0)) {
        throw Error(ErrorKind::InvalidConfig, "amin and top_db must be positive");
    }
}

std::vector<Segment> chunk(const AudioClip& clip, int segment_seconds) {
    if (clip.samples.empty()) {
        throw Error(ErrorKind::EmptyClip, "cannot chunk an empty clip: " + clip.source_path);
    }
    if (segment_seconds < 1 || clip.sample_rate <= 0) {
        throw Error(ErrorKind::InvalidArgument, "segment_seconds and sample_rate must be positive");
    }
    const std::size_t len = static_cast<std::size_t>(clip.sample_rate) * segment_seconds;
    const std::size_t count = (clip.samples.size() + len - 1) / len;
    std::vector<Segment> segments(count, Segment(len, 0.0));
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t begin = i * len;
        const std::size_t end = std::min(begin + len, clip.samples.size());
        std::copy(clip.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                  clip.samples.begin() + static_cast<std::ptrdiff_t>(end), segments[i].begin());
    }
    return segments;
}

std::vector<double> stft_magnitude(std::span<const double> segment, const SpectrogramConfig& config,
                                   int* frames_out) {
    config.validate();
    const auto n = static_cast<std::int64_t>(segment.size());
    if (n == 0) {
        throw Error(ErrorKind::EmptyClip, "empty segment");
    }
    const int fft_n = config.fft_n;
    const int bins = fft_n / 2 + 1;
    const int frames = 1 + static_cast<int>(n / config.hop);
    const std::int64_t pad = fft_n / 2;

    std::vector<double> window(static_cast<std::size_t>(fft_n));
    for (int i = 0; i < fft_n; ++i) {
        window[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / fft_n);
    }

    const FftPlan plan(static_cast<std::size_t>(fft_n));
    std::vector<double> frame(static_cast<std::size_t>(fft_n));
    std::vector<double> column(static_cast<std::size_t>(bins));
    std::vector<std::complex<double>> scratch;
    std::vector<double> mag(static_cast<std::size_t>(bins) * frames);

    for (int t = 0; t < frames; ++t) {
        const std::int64_t start = static_cast<std::int64_t>(t) * config.hop - pad;
        for (int i = 0; i < fft_n; ++i) {
            frame[i] = segment[reflect_index(start + i, n)] * window[i];
        }
        plan.real_magnitude(frame, column, scratch);
        for (int f = 0; f < bins; ++f) {
            mag[static_cast<std::size_t>(f) * frames + t] = column[f];
        }
    }
    if (frames_out) *frames_out = frames;
    return mag;
}

LogSpectrogram log_spectrogram(std::span<const double> segment, const SpectrogramConfig& config) {
    config.validate();
    if (segment.size() != config.segment_length()) {
        throw Error(ErrorKind::LengthMismatch, "segment has " + std::to_string(segment.size()) +
                                                   " samples, expected " +
                                                   std::to_string(config.segment_length()));
    }
    LogSpectrogram spec;
    spec.freq_bins = config.freq_bins();
    spec.values = stft_magnitude(segment, config, &spec.frames);

    double ref = 0.0;
    for (double m : spec.values) ref = std::max(ref, m);
    // A segment entirely under amin carries no signal and maps to the clamp.
    if (ref <= config.amin) {
        std::fill(spec.values.begin(), spec.values.end(), -config.top_db);
        return spec;
    }
    // The floor is taken relative to the segment maximum so that scaling the
    // input never changes the output.
    for (double& v : spec.values) {
        v = v > 0.0 ? std::max(20.0 * std::log10(v / ref), -config.top_db) : -config.top_db;
    }
    return spec;
}

ModelInput assemble_input(const LogSpectrogram& breath, const LogSpectrogram& cough) {
    if (breath.freq_bins != cough.freq_bins || breath.frames != cough.frames) {
        throw Error(ErrorKind::ShapeMismatch, "breath and cough spectrograms differ in shape");
    }
    ModelInput input;
    input.freq_bins = breath.freq_bins;
    input.frames = breath.frames;
    const std::size_t plane = breath.values.size();
    input.data.resize(2 * plane);
    for (std::size_t i = 0; i < plane; ++i) {
        input.data[i] = static_cast<float>(breath.values[i]);
        input.data[plane + i] = static_cast<float>(cough.values[i]);
    }
    return input;
}

AudioClip conform_rate(const AudioClip& clip, const SpectrogramConfig& config) {
    return clip.sample_rate == config.sr ? clip : resample(clip, config.sr);
}

std::vector<ModelInput> pair_segments(const AudioClip& breath, const AudioClip& cough,
                                      const SpectrogramConfig& config) {
    if (breath.sample_rate != config.sr || cough.sample_rate != config.sr) {
        throw Error(ErrorKind::InvalidArgument, "clips must be at the configured sample rate");
    }
    const auto breath_chunks = chunk(breath, config.segment_seconds);
    const auto cough_chunks = chunk(cough, config.segment_seconds);

    std::vector<LogSpectrogram> breath_specs;
    std::vector<LogSpectrogram> cough_specs;
    for (const auto& s : breath_chunks) breath_specs.push_back(log_spectrogram(s, config));
    for (const auto& s : cough_chunks) cough_specs.push_back(log_spectrogram(s, config));

    const std::size_t count = std::max(breath_specs.size(), cough_specs.size());
    std::vector<ModelInput> inputs;
    inputs.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        inputs.push_back(assemble_input(breath_specs[i % breath_specs.size()], cough_specs[i % cough_specs.size()]));
    }
    return inputs;
}

void write_spectrogram(const std::filesystem::path& path, const LogSpectrogram& spec) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
    out.write("CSPC", 4);
    put_u32(out, static_cast<std::uint32_t>(spec.freq_bins));
    put_u32(out, static_cast<std::uint32_t>(spec.frames));
    put_u32(out, 0);
    for (double v : spec.values) {
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    if (!out) throw Error(ErrorKind::IoFailure, "short write to " + path.string());
}

LogSpectrogram read_spectrogram(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
    unsigned char header[16];
    if (!in.read(reinterpret_cast<char*>(header), 16) || std::memcmp(header, "CSPC", 4) != 0) {
        throw Error(ErrorKind::MalformedHeader, "not a CSPC file: " + path.string());
    }
    LogSpectrogram spec;
    spec.freq_bins = static_cast<int>(get_u32(header + 4));
    spec.frames = static_cast<int>(get_u32(header + 8));
    const std::size_t count = static_cast<std::size_t>(spec.freq_bins) * spec.frames;
    spec.values.resize(count);
    unsigned char b[4];
    for (std::size_t i = 0; i < count; ++i) {
        if (!in.read(reinterpret_cast<char*>(b), 4)) {
            throw Error(ErrorKind::TruncatedData, "CSPC payload too short: " + path.string());
        }
        spec.values[i] = std::bit_cast<float>(get_u32(b));
    }
    return spec;
}

}  // namespace cider
