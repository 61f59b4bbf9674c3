#include "plcrnn/targets/targets.hpp"

#include <algorithm>
#include <cmath>

#include "plcrnn/error.hpp"

namespace plcrnn::targets {

using ad::Shape;
using ad::Tensor;

Tensor<double> iam_from_magnitudes(const Tensor<double>& target_mag, const Tensor<double>& noisy_mag) {
    if (target_mag.shape() != noisy_mag.shape()) {
        throw InputError("iam: target " + ad::shape_string(target_mag.shape()) + " vs noisy " +
                         ad::shape_string(noisy_mag.shape()));
    }
    const auto s = target_mag.data();
    const auto x = noisy_mag.data();
    std::vector<double> m(s.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double r = x[i] > 0.0 ? s[i] / x[i] : 0.0;
        // NaN inputs fall through both comparisons; map them to 0 as well.
        m[i] = r >= 1.0 ? 1.0 : (r > 0.0 ? r : 0.0);
    }
    return Tensor<double>(noisy_mag.shape(), std::move(m));
}

Tensor<double> iam(const dsp::Spectrogram& clean, const dsp::Spectrogram& noisy) {
    if (clean.frames != noisy.frames) {
        throw InputError("iam: clean has " + std::to_string(clean.frames) + " frames, noisy has " +
                         std::to_string(noisy.frames));
    }
    return iam_from_magnitudes(dsp::magnitude(clean), dsp::magnitude(noisy));
}

template <typename Real>
Tensor<Real> sa_loss(const Tensor<Real>& mask_est, const Tensor<Real>& noisy_mag, const Tensor<Real>& target_mag) {
    return ad::mse_loss(ad::mul(noisy_mag, mask_est), target_mag);
}

StageTargets build_stage_targets(const audio::UtterancePair& pair, const StagePlan& plan) {
    plan.validate();
    audio::require_pipeline_ready(pair.noisy, "build_stage_targets");
    audio::require_pipeline_ready(pair.clean, "build_stage_targets");
    const dsp::Spectrogram noisy = dsp::stft(pair.noisy);
    StageTargets t;
    t.kind = plan.kind;
    t.noisy_mag = dsp::magnitude(noisy);
    for (std::size_t q = 0; q < plan.stages; ++q) {
        const bool last = q + 1 == plan.stages;
        const audio::AudioSignal target = last ? pair.clean : audio::make_improved_mixture(pair, plan.deltas_db[q]);
        t.magnitudes.push_back(dsp::magnitude(dsp::stft(target)));
        if (plan.kind == TargetKind::Iam) t.masks.push_back(iam_from_magnitudes(t.magnitudes.back(), t.noisy_mag));
    }
    return t;
}

template <typename Real>
BatchTargets<Real> collate(const std::vector<const StageTargets*>& items) {
    if (items.empty()) throw ContractError("collate: empty batch");
    const std::size_t B = items.size();
    const std::size_t F = dsp::kBins;
    const std::size_t Q = items.front()->magnitudes.size();
    BatchTargets<Real> out;
    std::size_t T = 0;
    for (const auto* it : items) {
        if (it->magnitudes.size() != Q) throw ContractError("collate: items have different stage counts");
        out.lengths.push_back(it->noisy_mag.dim(0));
        T = std::max(T, it->noisy_mag.dim(0));
    }
    auto gather = [&](auto pick) {
        std::vector<Real> v(B * T * F, Real{0});
        for (std::size_t b = 0; b < B; ++b) {
            const auto src = pick(*items[b]).data();
            std::transform(src.begin(), src.end(), v.begin() + static_cast<std::ptrdiff_t>(b * T * F),
                           [](double x) { return static_cast<Real>(x); });
        }
        return Tensor<Real>(Shape{B, T, F}, std::move(v));
    };
    out.noisy_mag = gather([](const StageTargets& s) -> const Tensor<double>& { return s.noisy_mag; });
    for (std::size_t q = 0; q < Q; ++q)
        out.magnitudes.push_back(gather([q](const StageTargets& s) -> const Tensor<double>& { return s.magnitudes[q]; }));
    out.mask = ad::FrameMask::from_lengths(out.lengths, T);
    out.frame_weight.assign(B * T, Real{0});
    for (std::size_t b = 0; b < B; ++b) {
        const double w = 1.0 / (static_cast<double>(B) * static_cast<double>(out.lengths[b]) * static_cast<double>(F));
        for (std::size_t t = 0; t < out.lengths[b]; ++t) out.frame_weight[b * T + t] = static_cast<Real>(w);
    }
    return out;
}

template <typename Real>
Tensor<Real> weighted_frame_sse(const Tensor<Real>& pred, const Tensor<Real>& target,
                                const std::vector<Real>& frame_weight) {
    if (pred.shape() != target.shape() || pred.rank() != 3) {
        throw DimensionError("weighted_frame_sse: pred " + ad::shape_string(pred.shape()) + " vs target " +
                             ad::shape_string(target.shape()));
    }
    const std::size_t frames = pred.dim(0) * pred.dim(1);
    const std::size_t F = pred.dim(2);
    if (frame_weight.size() != frames) throw DimensionError("weighted_frame_sse: weight count does not match frames");
    const auto p = pred.data();
    const auto y = target.data();
    double acc = 0;
    for (std::size_t r = 0; r < frames; ++r) {
        if (frame_weight[r] == Real{0}) continue;
        double row = 0;
        for (std::size_t f = 0; f < F; ++f) {
            const double d = static_cast<double>(p[r * F + f]) - static_cast<double>(y[r * F + f]);
            row += d * d;
        }
        acc += static_cast<double>(frame_weight[r]) * row;
    }
    return Tensor<Real>::from_op(Shape{}, {static_cast<Real>(acc)}, "weighted_frame_sse", {pred, target},
                                 [frames, F, frame_weight](ad::Node<Real>& n) {
                                     auto& a = *n.inputs[0];
                                     auto& b = *n.inputs[1];
                                     const Real g = n.grad[0];
                                     for (std::size_t r = 0; r < frames; ++r) {
                                         const Real w = frame_weight[r];
                                         if (w == Real{0}) continue;
                                         for (std::size_t f = 0; f < F; ++f) {
                                             const std::size_t i = r * F + f;
                                             const Real d = Real(2) * g * w * (a.value[i] - b.value[i]);
                                             if (a.requires_grad) a.grad[i] += d;
                                             if (b.requires_grad) b.grad[i] -= d;
                                         }
                                     }
                                 });
}

template <typename Real>
Tensor<Real> stage_loss(const Tensor<Real>& output, const BatchTargets<Real>& targets, std::size_t stage,
                        TargetKind kind) {
    if (stage >= targets.magnitudes.size()) throw ContractError("stage_loss: stage index out of range");
    const Tensor<Real>& target = targets.magnitudes[stage];
    const Tensor<Real> estimate = kind == TargetKind::Iam ? ad::mul(targets.noisy_mag, output) : output;
    return weighted_frame_sse(estimate, target, targets.frame_weight);
}

template <typename Real>
Tensor<Real> total_loss(const std::vector<Tensor<Real>>& stage_outputs, const BatchTargets<Real>& targets,
                        const StagePlan& plan, std::vector<double>* per_stage) {
    if (stage_outputs.size() != plan.stages || targets.magnitudes.size() != plan.stages) {
        throw ContractError("total_loss: plan has " + std::to_string(plan.stages) + " stages, got " +
                            std::to_string(stage_outputs.size()) + " outputs and " +
                            std::to_string(targets.magnitudes.size()) + " targets");
    }
    if (per_stage != nullptr) per_stage->clear();
    Tensor<Real> total;
    for (std::size_t q = 0; q < plan.stages; ++q) {
        const Tensor<Real> l = stage_loss(stage_outputs[q], targets, q, plan.kind);
        if (per_stage != nullptr) per_stage->push_back(static_cast<double>(l.item()));
        const Tensor<Real> term = ad::scale(l, static_cast<Real>(plan.alphas[q]));
        total = total.defined() ? ad::add(total, term) : term;
    }
    return total;
}

double combine_stage_losses(const std::vector<double>& losses, const StagePlan& plan) {
    if (losses.size() != plan.alphas.size()) {
        throw ContractError("combine_stage_losses: " + std::to_string(losses.size()) + " losses for " +
                            std::to_string(plan.alphas.size()) + " stages");
    }
    double s = 0;
    for (std::size_t q = 0; q < losses.size(); ++q) s += plan.alphas[q] * losses[q];
    return s;
}

#define PLCRNN_INSTANTIATE(Real)                                                                                 \
    template Tensor<Real> sa_loss(const Tensor<Real>&, const Tensor<Real>&, const Tensor<Real>&);              \
    template BatchTargets<Real> collate(const std::vector<const StageTargets*>&);                              \
    template Tensor<Real> weighted_frame_sse(const Tensor<Real>&, const Tensor<Real>&, const std::vector<Real>&); \
    template Tensor<Real> stage_loss(const Tensor<Real>&, const BatchTargets<Real>&, std::size_t, TargetKind);  \
    template Tensor<Real> total_loss(const std::vector<Tensor<Real>>&, const BatchTargets<Real>&,               \
                                     const StagePlan&, std::vector<double>*);
PLCRNN_INSTANTIATE(float)
PLCRNN_INSTANTIATE(double)
#undef PLCRNN_INSTANTIATE

}  // namespace plcrnn::targets
