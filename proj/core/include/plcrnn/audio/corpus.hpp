#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "plcrnn/audio/mixer.hpp"
#include "plcrnn/rng.hpp"

namespace plcrnn::audio {

/// Noise families in the synthetic bank.
inline const std::vector<std::string>& noise_kinds() {
    static const std::vector<std::string> kinds = {"white", "pink", "am_tone"};
    return kinds;
}

struct SynthOptions {
    std::vector<double> snr_grid;   // empty means the integers -5..10
    double min_duration_s = 0.5;
    double max_duration_s = 2.0;
    double bank_duration_s = 10.0;  // length of each noise bank
};

/// Integer SNR grid -5, -4, ..., 10 dB.
std::vector<double> default_snr_grid();

struct Utterance {
    MixSpec spec;
    UtterancePair pair;
};

/// Fixed-seed noise bank for one family, `bank_duration_s` long.
AudioSignal make_noise_bank(const std::string& kind, std::uint64_t seed, double bank_duration_s = 10.0);

/// Speech-like clean signal: 2-4 harmonics of a gliding fundamental in
/// 100-300 Hz under a syllabic amplitude envelope with silent gaps.
AudioSignal synth_clean(Rng& rng, std::size_t length);

/// Deterministic corpus: a pure function of (n, seed, options). Each
/// utterance draws its duration, clean signal, noise family, cut point and
/// SNR from a sub-stream keyed by its index.
std::vector<Utterance> synth_corpus(std::size_t n, std::uint64_t seed, const SynthOptions& options = {});

/// Writes clean/, noise/, noisy/ WAV files and manifest.tsv under `dir`.
///
/// The manifest is tab-separated with a '#' header line:
///   id  clean  noise  noisy  noise_id  snr_db  cut_point  seed  wrapped
/// Paths are relative to `dir`; snr_db is written with 17 significant digits.
void write_corpus(const std::filesystem::path& dir, const std::vector<Utterance>& corpus);

/// Reads a corpus written by write_corpus. Signals come back 16-bit
/// quantized, so `pair` is rebuilt as noisy = clean + noise from the stored
/// clean and noise files.
std::vector<Utterance> load_corpus(const std::filesystem::path& dir);

}  // namespace plcrnn::audio
