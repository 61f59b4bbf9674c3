#pragma once

#include <vector>

#include "plcrnn/audio/signal.hpp"
#include "plcrnn/dsp/stft.hpp"
#include "plcrnn/model/model_graph.hpp"

namespace plcrnn::model {

struct EnhanceResult {
    audio::AudioSignal enhanced;
    /// Per-stage magnitude estimates [T, 161]; IAM outputs are multiplied by
    /// the noisy magnitude.
    std::vector<ad::Tensor<double>> stage_magnitudes;
};

/// stft -> eval-mode forward -> final-stage magnitude -> OLA with the noisy
/// phase, trimmed to the input length.
template <typename Real>
EnhanceResult enhance_utterance(ModelGraph<Real>& model, const audio::AudioSignal& noisy);

/// Reconstructs mask * |X| with the noisy phase; used to inject oracle or
/// hand-made masks in place of the network output.
audio::AudioSignal enhance_with_mask(const audio::AudioSignal& noisy, const ad::Tensor<double>& mask);

/// OLA reconstruction of `magnitude` [T, 161] with the phase of `noisy`.
audio::AudioSignal reconstruct(const audio::AudioSignal& noisy, const ad::Tensor<double>& magnitude);

}  // namespace plcrnn::model
