#include "plcrnn/model/enhance.hpp"

#include "plcrnn/error.hpp"

namespace plcrnn::model {

template <typename Real>
EnhanceResult enhance_utterance(ModelGraph<Real>& model, const audio::AudioSignal& noisy) {
    const dsp::Spectrogram spec = dsp::stft(noisy);
    const ad::Tensor<double> mag = dsp::magnitude(spec);
    const std::size_t T = spec.frames;
    std::vector<Real> x(mag.data().begin(), mag.data().end());
    const ad::Tensor<Real> input(ad::Shape{1, T, dsp::kBins}, std::move(x));
    const auto outputs = model.forward(input, ad::NormMode::Eval);

    EnhanceResult r;
    const bool iam = model.info().kind == targets::TargetKind::Iam;
    for (const auto& o : outputs) {
        if (o.size() != mag.size()) {
            throw DimensionError("enhance_utterance: model output " + ad::shape_string(o.shape()) +
                                 " is not a [T, 161] magnitude");
        }
        std::vector<double> m(o.size());
        for (std::size_t i = 0; i < m.size(); ++i) {
            m[i] = static_cast<double>(o.data()[i]);
            if (iam) m[i] *= mag.data()[i];
        }
        r.stage_magnitudes.emplace_back(ad::Shape{T, dsp::kBins}, std::move(m));
    }
    r.enhanced = dsp::istft_ola(r.stage_magnitudes.back(), spec, noisy.size());
    return r;
}

audio::AudioSignal reconstruct(const audio::AudioSignal& noisy, const ad::Tensor<double>& magnitude) {
    return dsp::istft_ola(magnitude, dsp::stft(noisy), noisy.size());
}

audio::AudioSignal enhance_with_mask(const audio::AudioSignal& noisy, const ad::Tensor<double>& mask) {
    const dsp::Spectrogram spec = dsp::stft(noisy);
    const ad::Tensor<double> mag = dsp::magnitude(spec);
    if (mask.shape() != mag.shape()) {
        throw InputError("enhance_with_mask: mask " + ad::shape_string(mask.shape()) + " vs spectrogram " +
                         ad::shape_string(mag.shape()));
    }
    std::vector<double> m(mag.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = mask.data()[i] * mag.data()[i];
    return dsp::istft_ola(ad::Tensor<double>(mag.shape(), std::move(m)), spec, noisy.size());
}

template EnhanceResult enhance_utterance(ModelGraph<float>&, const audio::AudioSignal&);
template EnhanceResult enhance_utterance(ModelGraph<double>&, const audio::AudioSignal&);

}  // namespace plcrnn::model
