#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "plcrnn/audio/signal.hpp"

namespace plcrnn::audio {

/// Provenance of one mixture.
struct MixSpec {
    std::string clean_id;
    std::string noise_id;
    double snr_db = 0.0;
    std::size_t cut_point = 0;  // offset into the noise bank
    std::uint64_t seed = 0;
    bool wrapped = false;       // the cut ran past the end of the bank
};

/// noisy[i] == clean[i] + noise[i] exactly, where `noise` is already scaled
/// to the requested SNR.
struct UtterancePair {
    AudioSignal noisy;
    AudioSignal clean;
    AudioSignal noise;
    double snr_db = 0.0;
};

inline constexpr double kSdrCapDb = 100.0;

/// 10 log10(P_clean / P_noise) over the full signals.
double snr_db(const AudioSignal& clean, const AudioSignal& noise);

/// Gain g = sqrt(P_clean / (P_noise * 10^(snr_db/10))) that scales `noise`
/// to the target SNR.
double snr_gain(const AudioSignal& clean, const AudioSignal& noise, double snr_db);

/// Scales `noise` so the pair sits at `snr_db` and adds it to `clean`.
/// Throws InputError on zero-power or length-mismatched inputs.
UtterancePair mix_at_snr(const AudioSignal& clean, const AudioSignal& noise, double snr_db);

/// clean + noise * 10^(-delta_db/20): the mixture at pair.snr_db + delta_db.
/// delta_db == 0 returns pair.noisy bit-for-bit; delta_db == +inf returns
/// the clean signal. Throws InputError for negative or NaN delta.
AudioSignal make_improved_mixture(const UtterancePair& pair, double delta_db);

/// Takes `length` samples of `bank` starting at `cut_point`, wrapping to the
/// start if needed; `wrapped` reports whether that happened.
AudioSignal cut_noise(const AudioSignal& bank, std::size_t cut_point, std::size_t length, bool* wrapped = nullptr);

/// Projection SDR: s_t = (<est, ref> / <ref, ref>) ref,
/// SDR = 10 log10(|s_t|^2 / |est - s_t|^2), clamped to +-kSdrCapDb so a
/// perfect (or perfectly scaled) estimate reports +100 dB.
/// Throws InputError for unequal lengths or a silent reference.
double sdr(const AudioSignal& reference, const AudioSignal& estimate);

}  // namespace plcrnn::audio
