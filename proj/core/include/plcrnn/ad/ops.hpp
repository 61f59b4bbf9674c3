#pragma once

#include <cstddef>
#include <vector>

#include "plcrnn/ad/tensor.hpp"

namespace plcrnn::ad {

// Elementwise and reductions. Binary ops require identical shapes; there is
// no broadcasting.
template <typename Real> Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real> Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real> Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real> Tensor<Real> scale(const Tensor<Real>& a, Real factor);
template <typename Real> Tensor<Real> sum(const Tensor<Real>& a);
template <typename Real> Tensor<Real> mean(const Tensor<Real>& a);

// Shape manipulation.
template <typename Real> Tensor<Real> reshape(const Tensor<Real>& a, Shape shape);
template <typename Real> Tensor<Real> permute(const Tensor<Real>& a, const std::vector<std::size_t>& axes);
template <typename Real> Tensor<Real> concat(const std::vector<Tensor<Real>>& parts, std::size_t axis);
template <typename Real>
Tensor<Real> slice(const Tensor<Real>& a, std::size_t axis, std::size_t begin, std::size_t end);
template <typename Real>
Tensor<Real> pad(const Tensor<Real>& a, std::size_t axis, std::size_t before, std::size_t after);

/// [M,K] x [K,N] -> [M,N]
template <typename Real> Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b);

/// Affine map over the last axis: x[..., I] * weight[O, I]^T + bias[O].
template <typename Real>
Tensor<Real> linear(const Tensor<Real>& x, const Tensor<Real>& weight, const Tensor<Real>& bias);

enum class Activation { Elu, Sigmoid, Softplus, Tanh };

/// ELU uses alpha = 1. Softplus is evaluated as x + log1p(exp(-x)) for x > 0.
template <typename Real> Tensor<Real> activation(const Tensor<Real>& x, Activation kind);

/// Mean of squared differences over all elements.
template <typename Real> Tensor<Real> mse_loss(const Tensor<Real>& pred, const Tensor<Real>& target);

struct Stride2 {
    std::size_t t = 1;
    std::size_t f = 1;
};

// Convolutions operate on [B, C, T, F] maps. Time is causal: K_T - 1 zero
// frames are prepended, so output frame t reads input frames t-K_T+1 .. t.
// Frequency uses no padding: F' = floor((F - K_F) / s_f) + 1.
// The time stride must be 1.

/// kernel [C_out, C_in, K_T, K_F], bias [C_out] -> [B, C_out, T, F'].
template <typename Real>
Tensor<Real> conv2d_causal(const Tensor<Real>& input, const Tensor<Real>& kernel, const Tensor<Real>& bias,
                           Stride2 stride);

/// Transposed convolution with kernel [C_in, C_out, K_T, K_F] and bias
/// [C_out]; the trailing K_T - 1 output frames are dropped, so the result has
/// T frames and frame t reads input frames <= t. `out_width` must satisfy
/// floor((out_width - K_F) / s_f) + 1 == F_in; columns no kernel tap reaches
/// hold the bias only.
template <typename Real>
Tensor<Real> deconv2d_causal(const Tensor<Real>& input, const Tensor<Real>& kernel, const Tensor<Real>& bias,
                             Stride2 stride, std::size_t out_width);

/// Untrimmed transposed convolution without bias: [B, C_in, T, F] ->
/// [B, C_out, T + K_T - 1, out_width]. This is the exact adjoint of the
/// valid (unpadded) convolution with the same kernel; the adjoint of
/// conv2d_causal is this result with its first K_T - 1 frames dropped.
template <typename Real>
Tensor<Real> conv2d_transpose_full(const Tensor<Real>& input, const Tensor<Real>& kernel, Stride2 stride,
                                   std::size_t out_width);

/// Unidirectional LSTM over [B, T, D] with zero initial state.
/// w_ih [4H, D], w_hh [4H, H], bias [4H]; gate order input, forget, cell, output.
/// Returns the hidden sequence [B, T, H].
template <typename Real>
Tensor<Real> lstm_forward(const Tensor<Real>& input, const Tensor<Real>& w_ih, const Tensor<Real>& w_hh,
                          const Tensor<Real>& bias);

/// Valid-frame mask for a padded batch; valid[b * frames + t] != 0 marks a
/// real frame.
struct FrameMask {
    std::size_t batch = 0;
    std::size_t frames = 0;
    std::vector<unsigned char> valid;

    static FrameMask from_lengths(const std::vector<std::size_t>& lengths, std::size_t frames);
    bool is_valid(std::size_t b, std::size_t t) const { return valid[b * frames + t] != 0; }
};

enum class NormMode { Train, Eval };

template <typename Real>
struct BatchNormState {
    std::vector<Real> running_mean;
    std::vector<Real> running_var;
    bool initialized = false;
    Real momentum = Real(0.99);
    Real eps = Real(1e-5);

    explicit BatchNormState(std::size_t channels = 0)
        : running_mean(channels, Real{0}), running_var(channels, Real{1}) {}

    /// Marks the statistics as usable with the identity normalization
    /// (mean 0, variance 1).
    void initialize_identity();
};

/// Per-channel normalization of [B, C, T, F] over batch, time and frequency.
///
/// Train mode uses batch statistics (biased variance) computed over the
/// frames `mask` marks valid (all frames when mask is null) and folds them
/// into `state`: the first update copies them, later ones blend with
/// momentum. Eval mode uses the running statistics and throws StateError if
/// none were ever recorded.
template <typename Real>
Tensor<Real> batch_norm(const Tensor<Real>& input, const Tensor<Real>& gamma, const Tensor<Real>& beta,
                        BatchNormState<Real>& state, NormMode mode, const FrameMask* mask = nullptr);

}  // namespace plcrnn::ad
