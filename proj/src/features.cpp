#include "cider/features.hpp"

#include "cider/error.hpp"
#include "cider/fft.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace cider {

int FeatureConfig::frame_length() const { return static_cast<int>(std::lround(frame_seconds * sr)); }
int FeatureConfig::hop_length() const { return static_cast<int>(std::lround(hop_seconds * sr)); }

void FeatureConfig::validate() const {
    if (sr <= 0) throw Error(ErrorKind::InvalidConfig, "feature sr must be positive");
    if (frame_length() < 2 || hop_length() < 1) throw Error(ErrorKind::InvalidConfig, "frame/hop too short");
    if (!is_power_of_two(static_cast<std::size_t>(fft_n)) || fft_n < frame_length()) {
        throw Error(ErrorKind::InvalidConfig, "feature fft_n must be a power of two >= frame length");
    }
    if (n_mfcc != kLowLevelDescriptors - kMfcc0) throw Error(ErrorKind::InvalidConfig, "n_mfcc must be 13");
    if (n_mels < n_mfcc) throw Error(ErrorKind::InvalidConfig, "n_mels must be >= n_mfcc");
    if (!(rolloff > 0.0 && rolloff < 1.0)) throw Error(ErrorKind::InvalidConfig, "rolloff must be in (0, 1)");
    if (!(energy_floor > 0.0)) throw Error(ErrorKind::InvalidConfig, "energy_floor must be positive");
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular filters on the power spectrum, edges equally spaced in mel from 0 to sr/2.
std::vector<std::vector<double>> mel_filterbank(const FeatureConfig& c) {
    const int bins = c.fft_n / 2 + 1;
    const double top = hz_to_mel(c.sr / 2.0);
    std::vector<double> edges(static_cast<std::size_t>(c.n_mels) + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(c.n_mels + 1));
    }
    std::vector<std::vector<double>> bank(static_cast<std::size_t>(c.n_mels), std::vector<double>(bins, 0.0));
    for (int m = 0; m < c.n_mels; ++m) {
        const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
        for (int k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * c.sr / c.fft_n;
            double w = 0.0;
            if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
            else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
            bank[m][k] = w;
        }
    }
    return bank;
}

}  // namespace

DescriptorTrack frame_descriptors(std::span<const double> samples, const FeatureConfig& config) {
    config.validate();
    const int len = config.frame_length();
    const int hop = config.hop_length();
    const int bins = config.fft_n / 2 + 1;
    const std::size_t n = samples.size();
    const int frames = n <= static_cast<std::size_t>(len) ? 1 : 1 + static_cast<int>((n - len) / hop);

    std::vector<double> window(len);
    for (int i = 0; i < len; ++i) window[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (len - 1));
    const auto bank = mel_filterbank(config);

    FftPlan plan(static_cast<std::size_t>(config.fft_n));
    std::vector<std::complex<double>> scratch;
    std::vector<double> frame(config.fft_n), mag(bins), power(bins), prev_norm(bins, 0.0), norm(bins);
    std::vector<double> log_mel(config.n_mels);

    DescriptorTrack track;
    track.frames = frames;
    track.values.assign(static_cast<std::size_t>(frames) * kLowLevelDescriptors, 0.0);

    for (int t = 0; t < frames; ++t) {
        const std::size_t start = static_cast<std::size_t>(t) * hop;
        double energy = 0.0;
        int crossings = 0;
        std::fill(frame.begin(), frame.end(), 0.0);
        for (int i = 0; i < len; ++i) {
            const double x = start + i < n ? samples[start + i] : 0.0;
            energy += x * x;
            if (i > 0) {
                const double p = start + i - 1 < n ? samples[start + i - 1] : 0.0;
                if ((p < 0.0) != (x < 0.0)) ++crossings;
            }
            frame[i] = x * window[i];
        }
        plan.real_magnitude(frame, mag, scratch);

        double total = 0.0, weighted = 0.0;
        for (int k = 0; k < bins; ++k) {
            power[k] = mag[k] * mag[k];
            total += power[k];
            weighted += power[k] * static_cast<double>(k) * config.sr / config.fft_n;
        }
        double rolloff_hz = 0.0;
        if (total > 0.0) {
            double cum = 0.0;
            for (int k = 0; k < bins; ++k) {
                cum += power[k];
                if (cum >= config.rolloff * total) {
                    rolloff_hz = static_cast<double>(k) * config.sr / config.fft_n;
                    break;
                }
            }
        }
        const double mag_norm = std::sqrt(total);
        for (int k = 0; k < bins; ++k) norm[k] = mag_norm > 0.0 ? mag[k] / mag_norm : 0.0;
        double flux = 0.0;
        if (t > 0) {
            for (int k = 0; k < bins; ++k) flux += (norm[k] - prev_norm[k]) * (norm[k] - prev_norm[k]);
        }
        prev_norm = norm;

        for (int m = 0; m < config.n_mels; ++m) {
            double e = 0.0;
            for (int k = 0; k < bins; ++k) e += bank[m][k] * power[k];
            log_mel[m] = std::log(std::max(e, config.energy_floor));
        }

        double* row = track.values.data() + static_cast<std::size_t>(t) * kLowLevelDescriptors;
        row[kLogEnergy] = std::log(std::max(energy, config.energy_floor));
        row[kZcr] = static_cast<double>(crossings) / static_cast<double>(len - 1);
        row[kCentroid] = total > 0.0 ? weighted / total : 0.0;
        row[kRolloff] = rolloff_hz;
        row[kFlux] = flux;
        // Orthonormal DCT-II of the log mel energies.
        const double m_count = static_cast<double>(config.n_mels);
        for (int q = 0; q < config.n_mfcc; ++q) {
            double acc = 0.0;
            for (int m = 0; m < config.n_mels; ++m) {
                acc += log_mel[m] * std::cos(std::numbers::pi * q * (m + 0.5) / m_count);
            }
            row[kMfcc0 + q] = acc * std::sqrt((q == 0 ? 1.0 : 2.0) / m_count);
        }
    }
    return track;
}

std::vector<double> functionals(std::span<const double> values) {
    if (values.empty()) throw Error(ErrorKind::EmptyList, "functionals of an empty track");
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : values) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    const double sd = std::sqrt(m2);

    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double q) {
        const double pos = q * (n - 1.0);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    };

    std::vector<double> out(kFunctionals);
    out[kMean] = mean;
    out[kStd] = sd;
    out[kMin] = sorted.front();
    out[kMax] = sorted.back();
    out[kRange] = sorted.back() - sorted.front();
    // Relative guard keeps rounding noise on constant tracks from producing huge moments.
    const bool flat = sd <= 1e-12 * std::max(1.0, std::abs(mean));
    out[kSkewness] = flat ? 0.0 : m3 / (m2 * sd);
    out[kKurtosis] = flat ? 0.0 : m4 / (m2 * m2) - 3.0;
    out[kQuartile1] = quantile(0.25);
    out[kQuartile2] = quantile(0.5);
    out[kQuartile3] = quantile(0.75);
    return out;
}

std::vector<double> file_features(const AudioClip& clip, const FeatureConfig& config) {
    if (clip.samples.empty()) throw Error(ErrorKind::EmptyClip, "no samples in " + clip.source_path);
    const AudioClip at_rate = clip.sample_rate == config.sr ? clip : resample(clip, config.sr);
    const DescriptorTrack track = frame_descriptors(at_rate.samples, config);
    std::vector<double> out;
    out.reserve(kFeaturesPerFile);
    std::vector<double> column(static_cast<std::size_t>(track.frames));
    for (int d = 0; d < kLowLevelDescriptors; ++d) {
        for (int t = 0; t < track.frames; ++t) column[t] = track.at(t, d);
        const auto f = functionals(column);
        out.insert(out.end(), f.begin(), f.end());
    }
    return out;
}

FeatureVector extract_features(const RecordingPair& pair, const FeatureConfig& config,
                               const std::string& recording_id) {
    FeatureVector fv;
    fv.recording_id = recording_id;
    fv.values = file_features(read_wav(pair.breath_path), config);
    const auto cough = file_features(read_wav(pair.cough_path), config);
    fv.values.insert(fv.values.end(), cough.begin(), cough.end());
    for (double v : fv.values) {
        if (!std::isfinite(v)) {
            throw Error(ErrorKind::InvalidArgument, "non-finite feature for " + pair.breath_path.string());
        }
    }
    return fv;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, 8);
}

std::uint64_t get_le(std::istream& in, int bytes, const std::string& path) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), bytes)) {
        throw Error(ErrorKind::TruncatedData, "feature cache ends early: " + path);
    }
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void write_feature_cache(const std::filesystem::path& path, const std::vector<FeatureVector>& rows) {
    const std::size_t d = rows.empty() ? 0 : rows.front().values.size();
    for (const auto& r : rows) {
        if (r.values.size() != d) throw Error(ErrorKind::DimensionMismatch, "ragged feature rows");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
    out.write("FEAT", 4);
    put_u32(out, static_cast<std::uint32_t>(rows.size()));
    put_u32(out, static_cast<std::uint32_t>(d));
    for (const auto& r : rows) {
        for (double v : r.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
    for (const auto& r : rows) {
        put_u32(out, static_cast<std::uint32_t>(r.recording_id.size()));
        out.write(r.recording_id.data(), static_cast<std::streamsize>(r.recording_id.size()));
    }
    if (!out) throw Error(ErrorKind::IoFailure, "short write to " + path.string());
}

std::vector<FeatureVector> read_feature_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::MissingFile, "cannot open " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "FEAT", 4) != 0) {
        throw Error(ErrorKind::MalformedHeader, "not a FEAT file: " + path.string());
    }
    const auto n = static_cast<std::size_t>(get_le(in, 4, path.string()));
    const auto d = static_cast<std::size_t>(get_le(in, 4, path.string()));
    std::vector<FeatureVector> rows(n);
    for (auto& r : rows) {
        r.values.resize(d);
        for (auto& v : r.values) v = std::bit_cast<double>(get_le(in, 8, path.string()));
    }
    for (auto& r : rows) {
        const auto len = static_cast<std::size_t>(get_le(in, 4, path.string()));
        r.recording_id.resize(len);
        if (len > 0 && !in.read(r.recording_id.data(), static_cast<std::streamsize>(len))) {
            throw Error(ErrorKind::TruncatedData, "feature cache ids truncated: " + path.string());
        }
    }
    return rows;
}

}  // namespace cider
