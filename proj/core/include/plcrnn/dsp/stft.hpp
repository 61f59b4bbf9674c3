#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

#include "plcrnn/ad/tensor.hpp"
#include "plcrnn/audio/signal.hpp"

namespace plcrnn::dsp {

inline constexpr std::size_t kFrameLength = 320;  // 20 ms at 16 kHz
inline constexpr std::size_t kHop = 160;          // 10 ms
inline constexpr std::size_t kBins = kFrameLength / 2 + 1;

/// One-sided short-time spectrum, frame-major: value(l, k) at l * kBins + k.
struct Spectrogram {
    std::size_t frames = 0;
    std::vector<std::complex<double>> values;

    std::complex<double>& at(std::size_t frame, std::size_t bin) { return values[frame * kBins + bin]; }
    const std::complex<double>& at(std::size_t frame, std::size_t bin) const { return values[frame * kBins + bin]; }
};

/// Symmetric Hamming window, w[n] = 0.54 - 0.46 cos(2 pi n / (N - 1)).
const std::vector<double>& hamming_window();

/// ceil(length / hop); a pure function of the input length.
std::size_t frame_count(std::size_t length);

/// Frame l covers samples [l*160, l*160 + 320), zero-padded past the end;
/// no centering, so frame l never sees samples after l*160 + 319.
/// Throws InputError for empty input or a rate other than 16 kHz.
Spectrogram stft(const audio::AudioSignal& signal);

/// Direct DFT of one windowed frame (length kFrameLength) into kBins values.
void dft_frame(const double* windowed, std::complex<double>* out);

/// |X(k,l)| as a [T, 161] tensor.
ad::Tensor<double> magnitude(const Spectrogram& spec);

/// Inverse transform of mag * exp(i * arg(phase_ref)), Hamming synthesis
/// window, overlap-add, then per-sample division by sum_l w^2[n - l*160]
/// floored at 1e-8. The result is trimmed to `length` when given, otherwise
/// it spans (T - 1) * 160 + 320 samples. Throws InputError when the shapes
/// differ.
audio::AudioSignal istft_ola(const ad::Tensor<double>& mag, const Spectrogram& phase_ref,
                             std::optional<std::size_t> length = std::nullopt);

/// Same as above with magnitudes given frame-major in a flat span.
audio::AudioSignal istft_ola(std::span<const double> mag, const Spectrogram& phase_ref,
                             std::optional<std::size_t> length = std::nullopt);

}  // namespace plcrnn::dsp
