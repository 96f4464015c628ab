#include "cider/synth.hpp"

#include "cider/error.hpp"
#include "cider/fft.hpp"
#include "cider/parallel.hpp"
#include "cider/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace cider {

std::map<Stratum, int> default_cohort_counts() {
    return {{Stratum::HealthyNoSymptoms, 245},
            {Stratum::HealthyWithCough, 30},
            {Stratum::AsthmaWithCough, 19},
            {Stratum::CovidNoCough, 39},
            {Stratum::CovidCough, 23}};
}

int SynthConfig::participants() const {
    int n = 0;
    for (const auto& [s, c] : counts) n += c;
    return n;
}

void SynthConfig::validate() const {
    for (const auto& [s, c] : counts) {
        if (c < 0) throw Error(ErrorKind::InvalidConfig, "negative participant count");
    }
    if (participants() == 0) throw Error(ErrorKind::InvalidConfig, "synthetic cohort is empty");
    if (sr <= 0) throw Error(ErrorKind::InvalidConfig, "sr must be positive");
    if (!(min_seconds >= 1.0 && max_seconds <= 48.0 && min_seconds <= max_seconds)) {
        throw Error(ErrorKind::InvalidConfig, "duration range must lie within [1, 48] s");
    }
    if (band_lo < 0.0 || band_hi < band_lo || band_hi >= sr / 2.0) {
        throw Error(ErrorKind::InvalidConfig, "signature band must satisfy 0 <= lo <= hi < sr/2");
    }
}

namespace {

// RBJ biquad, direct form I.
struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;

    double step(double x) {
        const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = x;
        y2 = y1;
        y1 = y;
        return y;
    }
};

Biquad bandpass(double f0, double q, int sr) {
    const double w0 = 2.0 * std::numbers::pi * f0 / sr;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    Biquad bq;
    bq.b0 = alpha / a0;
    bq.b1 = 0.0;
    bq.b2 = -alpha / a0;
    bq.a1 = -2.0 * std::cos(w0) / a0;
    bq.a2 = (1.0 - alpha) / a0;
    return bq;
}

Biquad lowpass(double f0, int sr) {
    const double w0 = 2.0 * std::numbers::pi * f0 / sr;
    const double alpha = std::sin(w0) / std::numbers::sqrt2;  // Q = 1/sqrt(2)
    const double cw = std::cos(w0);
    const double a0 = 1.0 + alpha;
    Biquad bq;
    bq.b0 = (1.0 - cw) / 2.0 / a0;
    bq.b1 = (1.0 - cw) / a0;
    bq.b2 = (1.0 - cw) / 2.0 / a0;
    bq.a1 = -2.0 * cw / a0;
    bq.a2 = (1.0 - alpha) / a0;
    return bq;
}

double mean_square(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

void normalize_peak(std::vector<double>& x, double peak) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    if (m > 0.0) {
        for (double& v : x) v *= peak / m;
    }
}

std::size_t draw_length(Rng& rng, const SynthConfig& c) {
    const double seconds = rng.uniform(c.min_seconds, c.max_seconds);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(seconds * c.sr)));
}

// Pink noise (Kellet's refined filter), two low-pass stages, and a breathing envelope.
std::vector<double> make_breath(Rng& rng, const SynthConfig& c) {
    const std::size_t n = draw_length(rng, c);
    const double cutoff = rng.uniform(800.0, 2000.0);
    const double period = rng.uniform(3.0, 5.0);
    const double phase = rng.uniform(0.0, std::numbers::pi);
    const double peak = rng.uniform(0.2, 0.6);
    Biquad lp1 = lowpass(cutoff, c.sr), lp2 = lowpass(cutoff, c.sr);
    double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = rng.normal();
        b0 = 0.99886 * b0 + w * 0.0555179;
        b1 = 0.99332 * b1 + w * 0.0750759;
        b2 = 0.96900 * b2 + w * 0.1538520;
        b3 = 0.86650 * b3 + w * 0.3104856;
        b4 = 0.55000 * b4 + w * 0.5329522;
        b5 = -0.7616 * b5 - w * 0.0168980;
        const double pink = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
        b6 = w * 0.115926;
        const double t = static_cast<double>(i) / c.sr;
        const double s = std::sin(std::numbers::pi * t / period + phase);
        x[i] = lp2.step(lp1.step(pink)) * (0.3 + 0.7 * s * s);
    }
    normalize_peak(x, peak);
    return x;
}

// Decaying low-passed noise bursts over a faint noise floor.
std::vector<double> make_cough(Rng& rng, const SynthConfig& c) {
    const std::size_t n = draw_length(rng, c);
    const double cutoff = rng.uniform(2000.0, 4000.0);
    const double peak = rng.uniform(0.3, 0.8);
    Biquad lp = lowpass(cutoff, c.sr);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = 1e-3 * rng.normal();
    double onset = rng.uniform(0.05, 0.8);
    while (true) {
        const auto start = static_cast<std::size_t>(onset * c.sr);
        if (start >= n) break;
        const double tau = rng.uniform(0.04, 0.12);
        const double gain = rng.uniform(0.5, 1.0);
        const std::size_t len = std::min(n - start, static_cast<std::size_t>(5.0 * tau * c.sr));
        for (std::size_t k = 0; k < len; ++k) {
            const double t = static_cast<double>(k) / c.sr;
            x[start + k] += gain * std::exp(-t / tau) * rng.normal();
        }
        onset += rng.uniform(0.6, 1.8);
    }
    for (double& v : x) v = lp.step(v);
    normalize_peak(x, peak);
    return x;
}

// Band-limited noise (two cascaded band-pass sections) at snr_db below `base`.
void add_signature(std::vector<double>& base, Rng& rng, const SynthConfig& c) {
    const double f0 = std::sqrt(std::max(c.band_lo, 1.0) * c.band_hi);
    const double q = f0 / (c.band_hi - c.band_lo);
    Biquad s1 = bandpass(f0, q, c.sr), s2 = bandpass(f0, q, c.sr);
    std::vector<double> band(base.size());
    for (double& v : band) v = s2.step(s1.step(rng.normal()));
    const double p_band = mean_square(band);
    const double p_base = mean_square(base);
    if (p_band <= 0.0 || p_base <= 0.0) return;
    const double gain = std::sqrt(p_base / p_band * std::pow(10.0, -c.snr_db / 10.0));
    for (std::size_t i = 0; i < base.size(); ++i) base[i] += gain * band[i];
    double m = 0.0;
    for (double v : base) m = std::max(m, std::abs(v));
    if (m > 0.99) normalize_peak(base, 0.99);
}

std::string participant_id(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "S%04zu", index + 1);
    return buf;
}

}  // namespace

SynthAudio synthesize_participant(const SynthConfig& config, std::size_t index, bool positive) {
    Rng rng(mix_seed({config.seed, 0x53594E54ULL, static_cast<std::uint64_t>(index)}));
    SynthAudio out;
    std::vector<double> breath = make_breath(rng, config);
    std::vector<double> cough = make_cough(rng, config);
    if (positive && config.has_signature()) {
        add_signature(breath, rng, config);
        add_signature(cough, rng, config);
    }
    out.breath = {std::move(breath), config.sr, participant_id(index) + "_breath"};
    out.cough = {std::move(cough), config.sr, participant_id(index) + "_cough"};
    return out;
}

std::vector<Participant> synth_cohort(const SynthConfig& config, const std::filesystem::path& audio_dir) {
    std::vector<Participant> out;
    for (Stratum s : kAllStrata) {
        const auto it = config.counts.find(s);
        const int count = it == config.counts.end() ? 0 : it->second;
        for (int i = 0; i < count; ++i) {
            Participant p;
            p.id = participant_id(out.size());
            p.stratum = s;
            p.covid_positive = is_covid_stratum(s);
            p.recordings.push_back({audio_dir / (p.id + "_breath.wav"), audio_dir / (p.id + "_cough.wav")});
            out.push_back(std::move(p));
        }
    }
    return out;
}

std::filesystem::path generate_corpus(const SynthConfig& config, const std::filesystem::path& out_dir, int threads) {
    config.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "audio", ec);
    if (ec) throw Error(ErrorKind::IoFailure, "cannot create " + (out_dir / "audio").string() + ": " + ec.message());
    const auto cohort = synth_cohort(config, "audio");
    parallel_for(cohort.size(), worker_count(threads), [&](std::size_t i) {
        const auto audio = synthesize_participant(config, i, cohort[i].covid_positive);
        write_wav(out_dir / cohort[i].recordings[0].breath_path, audio.breath);
        write_wav(out_dir / cohort[i].recordings[0].cough_path, audio.cough);
    });
    const auto manifest = out_dir / "manifest.csv";
    write_manifest(manifest, cohort);
    return manifest;
}

namespace {

void accumulate_band_ratio(const AudioClip& clip, const SynthConfig& c, double& sum, std::size_t& count) {
    constexpr int kN = 1024;
    constexpr int kHop = 512;
    const AudioClip at_rate = clip.sample_rate == c.sr ? clip : resample(clip, c.sr);
    const auto& x = at_rate.samples;
    FftPlan plan(kN);
    std::vector<double> window(kN), frame(kN), mag(kN / 2 + 1);
    for (int i = 0; i < kN; ++i) window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / kN);
    std::vector<std::complex<double>> scratch;
    const std::size_t frames = x.size() <= kN ? 1 : 1 + (x.size() - kN) / kHop;
    for (std::size_t t = 0; t < frames; ++t) {
        for (int i = 0; i < kN; ++i) {
            const std::size_t j = t * kHop + i;
            frame[i] = j < x.size() ? x[j] * window[i] : 0.0;
        }
        plan.real_magnitude(frame, mag, scratch);
        double band = 0.0, total = 0.0;
        for (int k = 0; k <= kN / 2; ++k) {
            const double f = static_cast<double>(k) * c.sr / kN;
            const double p = mag[k] * mag[k];
            total += p;
            if (f >= c.band_lo && f <= c.band_hi) band += p;
        }
        if (total <= 0.0) continue;
        sum += std::log((band + 1e-12 * total) / total);
        ++count;
    }
}

}  // namespace

double oracle_score(const AudioClip& breath, const AudioClip& cough, const SynthConfig& config) {
    if (!config.has_signature()) return 0.0;
    double sum = 0.0;
    std::size_t count = 0;
    accumulate_band_ratio(breath, config, sum, count);
    accumulate_band_ratio(cough, config, sum, count);
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double oracle_score(const RecordingPair& pair, const SynthConfig& config) {
    return oracle_score(read_wav(pair.breath_path), read_wav(pair.cough_path), config);
}

}  // namespace cider
