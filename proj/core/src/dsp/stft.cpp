#include "plcrnn/dsp/stft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "plcrnn/error.hpp"

namespace plcrnn::dsp {

namespace {

// Both layouts of the same tables, so the forward and inverse transforms
// each run as contiguous multiply-add sweeps.
struct DftTables {
    std::vector<double> cos_table;  // [kBins, kFrameLength]
    std::vector<double> sin_table;
    std::vector<double> cos_by_sample;  // [kFrameLength, kBins]
    std::vector<double> sin_by_sample;

    DftTables()
        : cos_table(kBins * kFrameLength), sin_table(kBins * kFrameLength), cos_by_sample(kBins * kFrameLength),
          sin_by_sample(kBins * kFrameLength) {
        for (std::size_t k = 0; k < kBins; ++k)
            for (std::size_t n = 0; n < kFrameLength; ++n) {
                // Reduce k*n mod N first so the angle stays exact in [0, 2 pi).
                const double angle = 2.0 * std::numbers::pi * static_cast<double>((k * n) % kFrameLength) /
                                     static_cast<double>(kFrameLength);
                cos_table[k * kFrameLength + n] = cos_by_sample[n * kBins + k] = std::cos(angle);
                sin_table[k * kFrameLength + n] = sin_by_sample[n * kBins + k] = std::sin(angle);
            }
    }
};

const DftTables& tables() {
    static const DftTables t;
    return t;
}

}  // namespace

const std::vector<double>& hamming_window() {
    static const std::vector<double> w = [] {
        std::vector<double> v(kFrameLength);
        for (std::size_t n = 0; n < kFrameLength; ++n)
            v[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                          static_cast<double>(kFrameLength - 1));
        return v;
    }();
    return w;
}

std::size_t frame_count(std::size_t length) { return (length + kHop - 1) / kHop; }

void dft_frame(const double* windowed, std::complex<double>* out) {
    const auto& t = tables();
    double re[kBins] = {}, im[kBins] = {};
    for (std::size_t n = 0; n < kFrameLength; ++n) {
        const double v = windowed[n];
        if (v == 0.0) continue;
        const double* c = t.cos_by_sample.data() + n * kBins;
        const double* s = t.sin_by_sample.data() + n * kBins;
        for (std::size_t k = 0; k < kBins; ++k) {
            re[k] += v * c[k];
            im[k] -= v * s[k];
        }
    }
    for (std::size_t k = 0; k < kBins; ++k) out[k] = {re[k], im[k]};
}

Spectrogram stft(const audio::AudioSignal& signal) {
    audio::require_pipeline_ready(signal, "stft");
    if (signal.samples.empty()) throw InputError("stft: empty signal");
    const auto& w = hamming_window();
    Spectrogram spec;
    spec.frames = frame_count(signal.size());
    spec.values.resize(spec.frames * kBins);
    std::vector<double> frame(kFrameLength);
    for (std::size_t l = 0; l < spec.frames; ++l) {
        const std::size_t start = l * kHop;
        for (std::size_t n = 0; n < kFrameLength; ++n) {
            const std::size_t i = start + n;
            frame[n] = i < signal.size() ? signal.samples[i] * w[n] : 0.0;
        }
        dft_frame(frame.data(), spec.values.data() + l * kBins);
    }
    return spec;
}

ad::Tensor<double> magnitude(const Spectrogram& spec) {
    std::vector<double> mag(spec.values.size());
    for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(spec.values[i]);
    return ad::Tensor<double>(ad::Shape{spec.frames, kBins}, std::move(mag));
}

audio::AudioSignal istft_ola(const ad::Tensor<double>& mag, const Spectrogram& phase_ref,
                             std::optional<std::size_t> length) {
    if (mag.rank() != 2 || mag.dim(1) != kBins) {
        throw InputError("istft_ola: magnitude must be [T, 161], got " + ad::shape_string(mag.shape()));
    }
    if (mag.dim(0) != phase_ref.frames) {
        throw InputError("istft_ola: magnitude has " + std::to_string(mag.dim(0)) + " frames, phase reference has " +
                         std::to_string(phase_ref.frames));
    }
    return istft_ola(mag.data(), phase_ref, length);
}

audio::AudioSignal istft_ola(std::span<const double> mag, const Spectrogram& phase_ref,
                             std::optional<std::size_t> length) {
    if (mag.size() != phase_ref.frames * kBins) {
        throw InputError("istft_ola: magnitude size " + std::to_string(mag.size()) +
                         " does not match phase reference with " + std::to_string(phase_ref.frames) + " frames");
    }
    const auto& t = tables();
    const auto& w = hamming_window();
    const std::size_t frames = phase_ref.frames;
    const std::size_t full = frames == 0 ? 0 : (frames - 1) * kHop + kFrameLength;
    std::vector<double> acc(full, 0.0), norm(full, 0.0);
    std::vector<double> re(kBins), im(kBins), frame(kFrameLength);
    const double inv_n = 1.0 / static_cast<double>(kFrameLength);

    for (std::size_t l = 0; l < frames; ++l) {
        for (std::size_t k = 0; k < kBins; ++k) {
            const double m = mag[l * kBins + k];
            const double phi = std::arg(phase_ref.at(l, k));
            re[k] = m * std::cos(phi);
            im[k] = m * std::sin(phi);
        }
        // Real inverse DFT of a Hermitian spectrum; DC and Nyquist appear once.
        for (std::size_t n = 0; n < kFrameLength; ++n) frame[n] = re[0] + ((n % 2 == 0) ? re[kBins - 1] : -re[kBins - 1]);
        for (std::size_t k = 1; k + 1 < kBins; ++k) {
            const double a = 2.0 * re[k], b = 2.0 * im[k];
            if (a == 0.0 && b == 0.0) continue;
            const double* c = t.cos_table.data() + k * kFrameLength;
            const double* s = t.sin_table.data() + k * kFrameLength;
            for (std::size_t n = 0; n < kFrameLength; ++n) frame[n] += a * c[n] - b * s[n];
        }
        for (std::size_t n = 0; n < kFrameLength; ++n) frame[n] *= inv_n;
        const std::size_t start = l * kHop;
        for (std::size_t n = 0; n < kFrameLength; ++n) {
            acc[start + n] += frame[n] * w[n];
            norm[start + n] += w[n] * w[n];
        }
    }

    audio::AudioSignal out;
    const std::size_t n_out = length.value_or(full);
    out.samples.assign(n_out, 0.0);
    for (std::size_t i = 0; i < std::min(n_out, full); ++i) out.samples[i] = acc[i] / std::max(norm[i], 1e-8);
    return out;
}

}  // namespace plcrnn::dsp
