#pragma once

#include "cider/audio_io.hpp"
#include "cider/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

namespace cider {

/// Default cohort: 245 / 30 / 19 / 39 / 23 participants per stratum, 356 in total.
std::map<Stratum, int> default_cohort_counts();

/// Generator settings. Breath = low-passed pink noise with a slow breathing
/// envelope; cough = exponentially decaying noise bursts. Positive
/// participants get band-limited noise in [band_lo, band_hi] added to both
/// files at `snr_db` below the power of the underlying recording.
struct SynthConfig {
    std::map<Stratum, int> counts = default_cohort_counts();
    int sr = 24000;
    double min_seconds = 1.0;
    double max_seconds = 19.0;
    double band_lo = 5000.0;
    double band_hi = 7000.0;
    double snr_db = 6.0;
    std::uint64_t seed = 1;

    int participants() const;
    bool has_signature() const { return band_hi > band_lo; }
    /// Throws InvalidConfig.
    void validate() const;
};

struct SynthAudio {
    AudioClip breath;
    AudioClip cough;
};

/// Audio of participant `index` (0-based position in the cohort). Depends
/// only on (config, index, positive), so generation order is irrelevant.
SynthAudio synthesize_participant(const SynthConfig& config, std::size_t index, bool positive);

/// Participant list without audio: ids "S0001".., strata in kAllStrata order.
std::vector<Participant> synth_cohort(const SynthConfig& config, const std::filesystem::path& audio_dir = "audio");

/// Writes <out>/audio/*.wav (16-bit PCM) and <out>/manifest.csv. Returns the
/// manifest path.
std::filesystem::path generate_corpus(const SynthConfig& config, const std::filesystem::path& out_dir, int threads = 0);

/// Mean over STFT frames of both files of log(band energy / total energy).
/// Returns 0 when the band is empty (band_hi <= band_lo).
double oracle_score(const AudioClip& breath, const AudioClip& cough, const SynthConfig& config);
double oracle_score(const RecordingPair& pair, const SynthConfig& config);

}  // namespace cider
