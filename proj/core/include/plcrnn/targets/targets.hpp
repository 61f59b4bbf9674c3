#pragma once

#include <cstddef>
#include <vector>

#include "plcrnn/ad/ops.hpp"
#include "plcrnn/audio/mixer.hpp"
#include "plcrnn/dsp/stft.hpp"
#include "plcrnn/targets/stage_plan.hpp"

namespace plcrnn::targets {

/// M = min(max(|S| / |X|, 0), 1) per cell; cells with |X| == 0 map to 0.
ad::Tensor<double> iam(const dsp::Spectrogram& clean, const dsp::Spectrogram& noisy);
ad::Tensor<double> iam_from_magnitudes(const ad::Tensor<double>& target_mag, const ad::Tensor<double>& noisy_mag);

/// mean((target_mag - noisy_mag * mask_est)^2), differentiable in mask_est.
template <typename Real>
ad::Tensor<Real> sa_loss(const ad::Tensor<Real>& mask_est, const ad::Tensor<Real>& noisy_mag,
                         const ad::Tensor<Real>& target_mag);

/// Per-utterance targets, all [T, 161].
struct StageTargets {
    TargetKind kind = TargetKind::Tms;
    ad::Tensor<double> noisy_mag;
    std::vector<ad::Tensor<double>> magnitudes;  // |S_q|, stage Q is |clean|
    std::vector<ad::Tensor<double>> masks;       // IAM of |S_q| against the noisy |X|; IAM mode only
};

StageTargets build_stage_targets(const audio::UtterancePair& pair, const StagePlan& plan);

/// Zero-padded batch of stage targets, [B, T_max, 161] per tensor.
///
/// frame_weight[b * T + t] is 1 / (B * T_b * 161) for real frames and 0 for
/// padding, so a weighted sum of squared cell errors is the mean over
/// utterances of each utterance's own mean over its valid cells.
template <typename Real>
struct BatchTargets {
    ad::Tensor<Real> noisy_mag;
    std::vector<ad::Tensor<Real>> magnitudes;
    ad::FrameMask mask;
    std::vector<Real> frame_weight;
    std::vector<std::size_t> lengths;
};

template <typename Real>
BatchTargets<Real> collate(const std::vector<const StageTargets*>& items);

/// Sum over b, t, f of frame_weight[b, t] * (pred - target)^2 for [B, T, F]
/// tensors; the weights are constants.
template <typename Real>
ad::Tensor<Real> weighted_frame_sse(const ad::Tensor<Real>& pred, const ad::Tensor<Real>& target,
                                    const std::vector<Real>& frame_weight);

/// Stage loss L_q for batched stage output [B, T, F]: masked MSE against
/// |S_q| (TMS) or masked SA loss with the noisy magnitude (IAM).
template <typename Real>
ad::Tensor<Real> stage_loss(const ad::Tensor<Real>& output, const BatchTargets<Real>& targets, std::size_t stage,
                            TargetKind kind);

/// sum_q alpha_q L_q. Throws ContractError unless there are Q outputs.
template <typename Real>
ad::Tensor<Real> total_loss(const std::vector<ad::Tensor<Real>>& stage_outputs, const BatchTargets<Real>& targets,
                            const StagePlan& plan, std::vector<double>* per_stage = nullptr);

/// Scalar version of the weighting: sum_q alpha_q losses[q].
double combine_stage_losses(const std::vector<double>& losses, const StagePlan& plan);

}  // namespace plcrnn::targets
