#include "cider/audio_io.hpp"

#include "cider/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace cider {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t le32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
    }
}

struct Format {
    std::uint16_t tag = 0;
    std::uint16_t channels = 0;
    std::uint32_t rate = 0;
    std::uint16_t block_align = 0;
    std::uint16_t bits = 0;
};

double decode_sample(const std::uint8_t* p, const Format& fmt) {
    if (fmt.tag == kFormatFloat) {
        float f;
        const std::uint32_t bits = le32(p);
        std::memcpy(&f, &bits, sizeof f);
        return std::clamp(static_cast<double>(f), -1.0, 1.0);
    }
    switch (fmt.bits) {
        case 8:
            return (static_cast<int>(p[0]) - 128) / 128.0;
        case 16:
            return static_cast<std::int16_t>(le16(p)) / 32768.0;
        case 24: {
            std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
            if (v & 0x800000) v -= 0x1000000;
            return v / 8388608.0;
        }
        case 32:
            return static_cast<std::int32_t>(le32(p)) / 2147483648.0;
        default:
            throw Error(ErrorKind::UnsupportedEncoding, "unsupported bit depth " + std::to_string(fmt.bits));
    }
}

}  // namespace

AudioClip decode_wav(std::span<const std::uint8_t> bytes, const std::string& source) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw Error(ErrorKind::MalformedHeader, "not a RIFF/WAVE file: " + source);
    }

    Format fmt;
    bool have_fmt = false;
    const std::uint8_t* data = nullptr;
    std::size_t data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::uint8_t* hdr = bytes.data() + pos;
        const std::uint32_t size = le32(hdr + 4);
        const std::size_t body = pos + 8;
        if (std::memcmp(hdr, "fmt ", 4) == 0) {
            if (size < 16 || body + 16 > bytes.size()) {
                throw Error(ErrorKind::MalformedHeader, "short fmt chunk: " + source);
            }
            const std::uint8_t* f = bytes.data() + body;
            fmt.tag = le16(f);
            fmt.channels = le16(f + 2);
            fmt.rate = le32(f + 4);
            fmt.block_align = le16(f + 12);
            fmt.bits = le16(f + 14);
            if (fmt.tag == kFormatExtensible) {
                if (size < 40 || body + 40 > bytes.size()) {
                    throw Error(ErrorKind::MalformedHeader, "short extensible fmt chunk: " + source);
                }
                // First two bytes of the sub-format GUID carry the actual format tag.
                fmt.tag = le16(f + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            if (body + size > bytes.size()) {
                throw Error(ErrorKind::TruncatedData,
                            "data chunk declares " + std::to_string(size) + " bytes, " +
                                std::to_string(bytes.size() - body) + " present: " + source);
            }
            data = bytes.data() + body;
            data_size = size;
            break;
        }
        pos = body + size + (size & 1u);
    }

    if (!have_fmt) {
        throw Error(ErrorKind::MalformedHeader, "missing fmt chunk: " + source);
    }
    if (data == nullptr) {
        throw Error(ErrorKind::MalformedHeader, "missing data chunk: " + source);
    }
    if (fmt.tag != kFormatPcm && fmt.tag != kFormatFloat) {
        throw Error(ErrorKind::UnsupportedEncoding, "format tag " + std::to_string(fmt.tag) + ": " + source);
    }
    if (fmt.tag == kFormatFloat && fmt.bits != 32) {
        throw Error(ErrorKind::UnsupportedEncoding, "float WAV must be 32-bit: " + source);
    }
    if (fmt.tag == kFormatPcm && fmt.bits != 8 && fmt.bits != 16 && fmt.bits != 24 && fmt.bits != 32) {
        throw Error(ErrorKind::UnsupportedEncoding, "PCM bit depth " + std::to_string(fmt.bits));
    }
    if (fmt.channels != 1 && fmt.channels != 2) {
        throw Error(ErrorKind::UnsupportedEncoding, std::to_string(fmt.channels) + " channels: " + source);
    }
    if (fmt.rate == 0) {
        throw Error(ErrorKind::MalformedHeader, "zero sample rate: " + source);
    }

    const std::size_t bytes_per_sample = fmt.bits / 8;
    const std::size_t frame = bytes_per_sample * fmt.channels;
    const std::size_t frames = data_size / frame;
    if (frames == 0) {
        throw Error(ErrorKind::TruncatedData, "no sample frames: " + source);
    }

    AudioClip clip;
    clip.sample_rate = static_cast<int>(fmt.rate);
    clip.source_path = source;
    clip.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        const std::uint8_t* p = data + i * frame;
        double acc = 0.0;
        for (std::size_t c = 0; c < fmt.channels; ++c) {
            acc += decode_sample(p + c * bytes_per_sample, fmt);
        }
        clip.samples[i] = acc / fmt.channels;
    }
    return clip;
}

AudioClip read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_wav(bytes, path.string());
}

std::vector<std::uint8_t> encode_wav16(std::span<const double> samples, int sample_rate) {
    const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    std::vector<std::uint8_t> out;
    out.reserve(44 + data_bytes);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    put32(out, 36 + data_bytes);
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    put32(out, 16);
    put16(out, kFormatPcm);
    put16(out, 1);
    put32(out, static_cast<std::uint32_t>(sample_rate));
    put32(out, static_cast<std::uint32_t>(sample_rate) * 2);
    put16(out, 2);
    put16(out, 16);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    put32(out, data_bytes);
    for (double x : samples) {
        const double q = std::round(std::clamp(x, -1.0, 1.0) * 32768.0);
        const auto v = static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0));
        put16(out, static_cast<std::uint16_t>(v));
    }
    return out;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
    const auto bytes = encode_wav16(clip.samples, clip.sample_rate);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error(ErrorKind::IoFailure, "short write to " + path.string());
    }
}

AudioClip resample(const AudioClip& clip, int target_sr) {
    if (target_sr <= 0 || clip.sample_rate <= 0) {
        throw Error(ErrorKind::InvalidArgument, "sample rates must be positive");
    }
    if (target_sr == clip.sample_rate) {
        return clip;
    }

    constexpr int kTaps = 32;
    constexpr int kHalf = kTaps / 2;
    constexpr double kPi = 3.14159265358979323846;

    const std::int64_t g = std::gcd<std::int64_t>(clip.sample_rate, target_sr);
    const std::int64_t up = target_sr / g;          // phases
    const std::int64_t down = clip.sample_rate / g;  // input step per `up` outputs
    const double cutoff = std::min(1.0, static_cast<double>(target_sr) / clip.sample_rate);

    // Phase p places the output at input position base + p/up. Tap j covers
    // input index base - kHalf + 1 + j, at offset x = (j - kHalf + 1) - p/up.
    std::vector<double> table(static_cast<std::size_t>(up * kTaps));
    for (std::int64_t p = 0; p < up; ++p) {
        const double frac = static_cast<double>(p) / static_cast<double>(up);
        double sum = 0.0;
        double* row = table.data() + p * kTaps;
        for (int j = 0; j < kTaps; ++j) {
            const double x = (j - kHalf + 1) - frac;
            const double arg = cutoff * x;
            const double sinc = arg == 0.0 ? 1.0 : std::sin(kPi * arg) / (kPi * arg);
            const double window = 0.5 + 0.5 * std::cos(kPi * x / kHalf);
            row[j] = cutoff * sinc * window;
            sum += row[j];
        }
        for (int j = 0; j < kTaps; ++j) {
            row[j] /= sum;
        }
    }

    const auto n_in = static_cast<std::int64_t>(clip.samples.size());
    const auto n_out = static_cast<std::int64_t>(
        std::llround(static_cast<double>(n_in) * target_sr / clip.sample_rate));

    AudioClip out;
    out.sample_rate = target_sr;
    out.source_path = clip.source_path;
    out.samples.resize(static_cast<std::size_t>(n_out));
    for (std::int64_t n = 0; n < n_out; ++n) {
        const std::int64_t pos = n * down;
        const std::int64_t base = pos / up;
        const std::int64_t phase = pos % up;
        const double* row = table.data() + phase * kTaps;
        double acc = 0.0;
        for (int j = 0; j < kTaps; ++j) {
            const std::int64_t idx = base - kHalf + 1 + j;
            if (idx >= 0 && idx < n_in) {
                acc += row[j] * clip.samples[static_cast<std::size_t>(idx)];
            }
        }
        out.samples[static_cast<std::size_t>(n)] = std::clamp(acc, -1.0, 1.0);
    }
    return out;
}

}  // namespace cider
