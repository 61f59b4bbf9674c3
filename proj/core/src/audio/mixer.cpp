#include "plcrnn/audio/mixer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "plcrnn/error.hpp"

namespace plcrnn::audio {

double snr_db(const AudioSignal& clean, const AudioSignal& noise) {
    return 10.0 * std::log10(power(clean) / power(noise));
}

double snr_gain(const AudioSignal& clean, const AudioSignal& noise, double target_db) {
    const double pc = power(clean);
    const double pn = power(noise);
    if (!(pc > 0.0)) throw InputError("mix_at_snr: clean signal has zero power");
    if (!(pn > 0.0)) throw InputError("mix_at_snr: noise signal has zero power");
    if (!std::isfinite(target_db)) throw InputError("mix_at_snr: SNR must be finite");
    return std::sqrt(pc / (pn * std::pow(10.0, target_db / 10.0)));
}

UtterancePair mix_at_snr(const AudioSignal& clean, const AudioSignal& noise, double target_db) {
    if (clean.size() != noise.size()) {
        throw InputError("mix_at_snr: clean has " + std::to_string(clean.size()) + " samples, noise has " +
                         std::to_string(noise.size()));
    }
    if (clean.sample_rate != noise.sample_rate) throw InputError("mix_at_snr: sample rates differ");
    const double g = snr_gain(clean, noise, target_db);
    UtterancePair pair;
    pair.clean = clean;
    pair.snr_db = target_db;
    pair.noise.sample_rate = clean.sample_rate;
    pair.noisy.sample_rate = clean.sample_rate;
    pair.noise.samples.resize(noise.size());
    pair.noisy.samples.resize(noise.size());
    for (std::size_t i = 0; i < noise.size(); ++i) {
        pair.noise.samples[i] = g * noise.samples[i];
        pair.noisy.samples[i] = clean.samples[i] + pair.noise.samples[i];
    }
    return pair;
}

AudioSignal make_improved_mixture(const UtterancePair& pair, double delta_db) {
    if (std::isnan(delta_db) || delta_db < 0.0) {
        throw InputError("make_improved_mixture: delta must be >= 0 dB");
    }
    if (delta_db == 0.0) return pair.noisy;
    if (std::isinf(delta_db)) return pair.clean;
    const double r = std::pow(10.0, -delta_db / 20.0);
    AudioSignal out;
    out.sample_rate = pair.clean.sample_rate;
    out.samples.resize(pair.clean.size());
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        out.samples[i] = pair.clean.samples[i] + r * pair.noise.samples[i];
    }
    return out;
}

AudioSignal cut_noise(const AudioSignal& bank, std::size_t cut_point, std::size_t length, bool* wrapped) {
    if (bank.empty()) throw InputError("cut_noise: empty noise bank");
    AudioSignal out;
    out.sample_rate = bank.sample_rate;
    out.samples.resize(length);
    const std::size_t start = cut_point % bank.size();
    for (std::size_t i = 0; i < length; ++i) out.samples[i] = bank.samples[(start + i) % bank.size()];
    if (wrapped != nullptr) *wrapped = start + length > bank.size();
    return out;
}

double sdr(const AudioSignal& reference, const AudioSignal& estimate) {
    if (reference.size() != estimate.size()) {
        throw InputError("sdr: reference has " + std::to_string(reference.size()) + " samples, estimate has " +
                         std::to_string(estimate.size()));
    }
    const double rr = energy(reference);
    if (!(rr > 0.0)) throw InputError("sdr: reference is silent");
    double er = 0;
    for (std::size_t i = 0; i < reference.size(); ++i) er += estimate.samples[i] * reference.samples[i];
    const double alpha = er / rr;
    double target = 0, residual = 0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double s = alpha * reference.samples[i];
        const double e = estimate.samples[i] - s;
        target += s * s;
        residual += e * e;
    }
    if (residual == 0.0) return target > 0.0 ? kSdrCapDb : -kSdrCapDb;
    if (target == 0.0) return -kSdrCapDb;
    return std::clamp(10.0 * std::log10(target / residual), -kSdrCapDb, kSdrCapDb);
}

}  // namespace plcrnn::audio
