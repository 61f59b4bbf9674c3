#include <algorithm>
#include <cmath>
#include <string>

#include "plcrnn/ad/ops.hpp"
#include "plcrnn/error.hpp"

namespace plcrnn::ad {

template <typename Real>
void BatchNormState<Real>::initialize_identity() {
    std::fill(running_mean.begin(), running_mean.end(), Real{0});
    std::fill(running_var.begin(), running_var.end(), Real{1});
    initialized = true;
}

template <typename Real>
Tensor<Real> batch_norm(const Tensor<Real>& input, const Tensor<Real>& gamma, const Tensor<Real>& beta,
                        BatchNormState<Real>& state, NormMode mode, const FrameMask* mask) {
    if (input.rank() != 4) throw DimensionError("batch_norm: expected [B,C,T,F], got " + shape_string(input.shape()));
    const std::size_t B = input.dim(0), C = input.dim(1), T = input.dim(2), F = input.dim(3);
    if (gamma.size() != C || beta.size() != C || state.running_mean.size() != C || state.running_var.size() != C) {
        throw DimensionError("batch_norm: parameters do not match " + std::to_string(C) + " channels");
    }
    if (mask != nullptr && (mask->batch != B || mask->frames != T)) {
        throw DimensionError("batch_norm: frame mask does not match input batch/frames");
    }
    const bool train = mode == NormMode::Train;
    if (!train && !state.initialized) {
        throw StateError("batch_norm: eval mode requested before running statistics were recorded");
    }

    const Real* x = input.data().data();
    auto frame_valid = [&](std::size_t b, std::size_t t) { return mask == nullptr || mask->is_valid(b, t); };

    std::vector<Real> mean(C), inv_std(C);
    std::size_t count = 0;
    if (train) {
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t t = 0; t < T; ++t)
                if (frame_valid(b, t)) count += F;
        if (count == 0) throw StateError("batch_norm: no valid frames in batch");
        for (std::size_t c = 0; c < C; ++c) {
            // Two-pass mean/variance over valid frames, accumulated in double.
            double s = 0;
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t t = 0; t < T; ++t) {
                    if (!frame_valid(b, t)) continue;
                    const Real* row = x + ((b * C + c) * T + t) * F;
                    for (std::size_t f = 0; f < F; ++f) s += row[f];
                }
            const double mu = s / static_cast<double>(count);
            double ss = 0;
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t t = 0; t < T; ++t) {
                    if (!frame_valid(b, t)) continue;
                    const Real* row = x + ((b * C + c) * T + t) * F;
                    for (std::size_t f = 0; f < F; ++f) ss += (row[f] - mu) * (row[f] - mu);
                }
            const double var = ss / static_cast<double>(count);
            mean[c] = static_cast<Real>(mu);
            inv_std[c] = static_cast<Real>(1.0 / std::sqrt(var + static_cast<double>(state.eps)));
            if (state.initialized) {
                state.running_mean[c] = state.momentum * state.running_mean[c] + (Real(1) - state.momentum) * mean[c];
                state.running_var[c] =
                    state.momentum * state.running_var[c] + (Real(1) - state.momentum) * static_cast<Real>(var);
            } else {
                state.running_mean[c] = mean[c];
                state.running_var[c] = static_cast<Real>(var);
            }
        }
        state.initialized = true;
    } else {
        for (std::size_t c = 0; c < C; ++c) {
            mean[c] = state.running_mean[c];
            inv_std[c] = Real(1) / std::sqrt(state.running_var[c] + state.eps);
        }
    }

    const Real* gm = gamma.data().data();
    const Real* bt = beta.data().data();
    std::vector<Real> out(input.size());
    std::vector<Real> xhat(input.size());
    const std::size_t plane = T * F;
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c) {
            const std::size_t off = (b * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                xhat[off + i] = (x[off + i] - mean[c]) * inv_std[c];
                out[off + i] = gm[c] * xhat[off + i] + bt[c];
            }
        }

    std::vector<unsigned char> valid;
    if (train && mask != nullptr) valid = mask->valid;
    const Real inv_count = train ? Real(1) / static_cast<Real>(count) : Real(0);

    return Tensor<Real>::from_op(
        input.shape(), std::move(out), "batch_norm", {input, gamma, beta},
        [B, C, T, F, train, inv_count, inv_std = std::move(inv_std), xhat = std::move(xhat),
         valid = std::move(valid)](Node<Real>& n) {
            auto& xin = *n.inputs[0];
            auto& gm = *n.inputs[1];
            auto& bt = *n.inputs[2];
            const std::size_t plane = T * F;
            const Real* dy = n.grad.data();
            for (std::size_t c = 0; c < C; ++c) {
                Real sum_dy = 0, sum_dy_xhat = 0;
                for (std::size_t b = 0; b < B; ++b) {
                    const std::size_t off = (b * C + c) * plane;
                    for (std::size_t i = 0; i < plane; ++i) {
                        sum_dy += dy[off + i];
                        sum_dy_xhat += dy[off + i] * xhat[off + i];
                    }
                }
                if (gm.requires_grad) gm.grad[c] += sum_dy_xhat;
                if (bt.requires_grad) bt.grad[c] += sum_dy;
                if (!xin.requires_grad) continue;
                const Real scale = gm.value[c] * inv_std[c];
                for (std::size_t b = 0; b < B; ++b)
                    for (std::size_t t = 0; t < T; ++t) {
                        const std::size_t off = ((b * C + c) * T + t) * F;
                        // Padded frames do not feed the statistics, so only
                        // the direct path reaches them.
                        const bool in_stats = train && (valid.empty() || valid[b * T + t] != 0);
                        for (std::size_t f = 0; f < F; ++f) {
                            Real g = dy[off + f];
                            if (in_stats) g -= inv_count * (sum_dy + xhat[off + f] * sum_dy_xhat);
                            xin.grad[off + f] += scale * g;
                        }
                    }
            }
        });
}

template struct BatchNormState<float>;
template struct BatchNormState<double>;
template Tensor<float> batch_norm(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                  BatchNormState<float>&, NormMode, const FrameMask*);
template Tensor<double> batch_norm(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                   BatchNormState<double>&, NormMode, const FrameMask*);

}  // namespace plcrnn::ad
