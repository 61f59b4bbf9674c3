#include <algorithm>
#include <string>

#include "plcrnn/ad/ops.hpp"
#include "plcrnn/error.hpp"

namespace plcrnn::ad {

namespace {

struct ConvGeometry {
    std::size_t batch, c_in, c_out, frames, f_in, f_out, k_t, k_f, s_f;
};

std::size_t conv_width(std::size_t f_in, std::size_t k_f, std::size_t s_f) {
    return (f_in - k_f) / s_f + 1;
}

template <typename Real>
ConvGeometry check_conv(const Tensor<Real>& input, const Tensor<Real>& kernel, Stride2 stride, const char* op) {
    if (input.rank() != 4 || kernel.rank() != 4) {
        throw DimensionError(std::string(op) + ": expected [B,C,T,F] input and 4-D kernel, got " +
                             shape_string(input.shape()) + " and " + shape_string(kernel.shape()));
    }
    if (stride.t != 1) throw DimensionError(std::string(op) + ": time stride must be 1");
    if (stride.f == 0) throw DimensionError(std::string(op) + ": frequency stride must be >= 1");
    if (kernel.dim(2) == 0 || kernel.dim(3) == 0) throw DimensionError(std::string(op) + ": empty kernel");
    return ConvGeometry{input.dim(0), 0, 0, input.dim(2), input.dim(3), 0, kernel.dim(2), kernel.dim(3), stride.f};
}

template <typename Real>
void check_bias(const Tensor<Real>& bias, std::size_t c_out, const char* op) {
    if (bias.rank() != 1 || bias.dim(0) != c_out) {
        throw DimensionError(std::string(op) + ": bias " + shape_string(bias.shape()) + " does not match " +
                             std::to_string(c_out) + " output channels");
    }
}

template <typename Real>
ConvGeometry check_transposed(const Tensor<Real>& input, const Tensor<Real>& kernel, Stride2 stride,
                              std::size_t out_width, const char* op) {
    ConvGeometry g = check_conv(input, kernel, stride, op);
    if (kernel.dim(0) != input.dim(1)) {
        throw DimensionError(std::string(op) + ": kernel expects " + std::to_string(kernel.dim(0)) +
                             " input channels, input has " + std::to_string(input.dim(1)));
    }
    g.c_in = kernel.dim(0);
    g.c_out = kernel.dim(1);
    if (out_width < g.k_f || conv_width(out_width, g.k_f, g.s_f) != g.f_in) {
        throw DimensionError(std::string(op) + ": output width " + std::to_string(out_width) +
                             " is inconsistent with input width " + std::to_string(g.f_in) + ", kernel " +
                             std::to_string(g.k_f) + ", stride " + std::to_string(g.s_f));
    }
    g.f_out = out_width;
    return g;
}

}  // namespace

namespace {

// Sum with independent lanes so the loop vectorizes without reassociation
// flags.
template <typename Real>
Real lane_sum(const Real* v, std::size_t n) {
    constexpr std::size_t L = 8;
    Real lanes[L] = {};
    std::size_t i = 0;
    for (; i + L <= n; i += L)
        for (std::size_t l = 0; l < L; ++l) lanes[l] += v[i + l];
    Real acc = 0;
    for (; i < n; ++i) acc += v[i];
    for (std::size_t l = 0; l < L; ++l) acc += lanes[l];
    return acc;
}

template <typename Real>
void axpy(Real a, const Real* x, Real* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename Real>
void mul_acc(const Real* a, const Real* b, Real* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

// Strided frequency access is split into k_f contiguous rows:
// patch[kf * narrow + j] = wide[j * s_f + kf]. Convolutions read their input
// this way and transposed convolutions write their output this way.
template <typename Real>
void gather_patch(const Real* wide, Real* patch, std::size_t narrow, std::size_t k_f, std::size_t s_f) {
    for (std::size_t kf = 0; kf < k_f; ++kf)
        for (std::size_t j = 0; j < narrow; ++j) patch[kf * narrow + j] = wide[j * s_f + kf];
}

template <typename Real>
void scatter_patch(const Real* patch, Real* wide, std::size_t narrow, std::size_t k_f, std::size_t s_f) {
    for (std::size_t kf = 0; kf < k_f; ++kf)
        for (std::size_t j = 0; j < narrow; ++j) wide[j * s_f + kf] += patch[kf * narrow + j];
}

// Weight gradients accumulate per lane in wacc [weights, narrow] and are
// reduced once at the end.
template <typename Real>
void reduce_weight_grad(const std::vector<Real>& wacc, std::size_t narrow, std::vector<Real>& grad) {
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += lane_sum(wacc.data() + i * narrow, narrow);
}

template <typename Real>
void add_bias_grad(const Real* gy, std::size_t batch, std::size_t channels, std::size_t plane,
                   std::vector<Real>& grad) {
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < channels; ++c) grad[c] += lane_sum(gy + (b * channels + c) * plane, plane);
}

}  // namespace

template <typename Real>
Tensor<Real> conv2d_causal(const Tensor<Real>& input, const Tensor<Real>& kernel, const Tensor<Real>& bias,
                           Stride2 stride) {
    ConvGeometry g = check_conv(input, kernel, stride, "conv2d_causal");
    if (kernel.dim(1) != input.dim(1)) {
        throw DimensionError("conv2d_causal: kernel expects " + std::to_string(kernel.dim(1)) +
                             " input channels, input has " + std::to_string(input.dim(1)));
    }
    g.c_out = kernel.dim(0);
    g.c_in = kernel.dim(1);
    check_bias(bias, g.c_out, "conv2d_causal");
    if (g.f_in < g.k_f) throw DimensionError("conv2d_causal: input narrower than kernel");
    g.f_out = conv_width(g.f_in, g.k_f, g.s_f);

    const std::size_t T = g.frames;
    const std::size_t FO = g.f_out;
    std::vector<Real> out(g.batch * g.c_out * T * FO);
    const Real* x = input.data().data();
    const Real* w = kernel.data().data();
    const Real* bv = bias.data().data();
    for (std::size_t b = 0; b < g.batch; ++b)
        for (std::size_t co = 0; co < g.c_out; ++co) std::fill_n(out.data() + (b * g.c_out + co) * T * FO, T * FO, bv[co]);
    std::vector<Real> patch(g.k_f * FO);
    // Input frame tt feeds output frame tt + shift through kernel row
    // kt = k_t - 1 - shift.
    for (std::size_t b = 0; b < g.batch; ++b)
        for (std::size_t ci = 0; ci < g.c_in; ++ci)
            for (std::size_t tt = 0; tt < T; ++tt) {
                gather_patch(x + ((b * g.c_in + ci) * T + tt) * g.f_in, patch.data(), FO, g.k_f, g.s_f);
                for (std::size_t co = 0; co < g.c_out; ++co)
                    for (std::size_t kt = 0; kt < g.k_t; ++kt) {
                        const std::size_t t = tt + (g.k_t - 1 - kt);
                        if (t >= T) continue;
                        Real* orow = out.data() + ((b * g.c_out + co) * T + t) * FO;
                        const Real* wr = w + ((co * g.c_in + ci) * g.k_t + kt) * g.k_f;
                        for (std::size_t kf = 0; kf < g.k_f; ++kf) axpy(wr[kf], patch.data() + kf * FO, orow, FO);
                    }
            }

    return Tensor<Real>::from_op(
        Shape{g.batch, g.c_out, T, FO}, std::move(out), "conv2d_causal", {input, kernel, bias},
        [g](Node<Real>& n) {
            auto& xin = *n.inputs[0];
            auto& wk = *n.inputs[1];
            auto& bs = *n.inputs[2];
            const std::size_t T = g.frames;
            const std::size_t FO = g.f_out;
            const Real* gy = n.grad.data();
            if (bs.requires_grad) add_bias_grad(gy, g.batch, g.c_out, T * FO, bs.grad);
            std::vector<Real> patch(g.k_f * FO), dpatch(g.k_f * FO);
            std::vector<Real> wacc(wk.requires_grad ? wk.value.size() * FO : 0);
            for (std::size_t b = 0; b < g.batch; ++b)
                for (std::size_t ci = 0; ci < g.c_in; ++ci)
                    for (std::size_t tt = 0; tt < T; ++tt) {
                        const std::size_t in_off = ((b * g.c_in + ci) * T + tt) * g.f_in;
                        gather_patch(xin.value.data() + in_off, patch.data(), FO, g.k_f, g.s_f);
                        std::fill(dpatch.begin(), dpatch.end(), Real{0});
                        for (std::size_t co = 0; co < g.c_out; ++co)
                            for (std::size_t kt = 0; kt < g.k_t; ++kt) {
                                const std::size_t t = tt + (g.k_t - 1 - kt);
                                if (t >= T) continue;
                                const Real* grow = gy + ((b * g.c_out + co) * T + t) * FO;
                                const std::size_t w0 = ((co * g.c_in + ci) * g.k_t + kt) * g.k_f;
                                for (std::size_t kf = 0; kf < g.k_f; ++kf) {
                                    axpy(wk.value[w0 + kf], grow, dpatch.data() + kf * FO, FO);
                                    if (wk.requires_grad)
                                        mul_acc(grow, patch.data() + kf * FO, wacc.data() + (w0 + kf) * FO, FO);
                                }
                            }
                        if (xin.requires_grad) scatter_patch(dpatch.data(), xin.grad.data() + in_off, FO, g.k_f, g.s_f);
                    }
            if (wk.requires_grad) reduce_weight_grad(wacc, FO, wk.grad);
        });
}

namespace {

// Shared body of the transposed convolutions. Output frame t receives input
// frame t - kt (kept only if 0 <= t - kt < input frames).
template <typename Real>
void transposed_forward(const Real* y, const Real* w, Real* out, const ConvGeometry& g, std::size_t out_frames) {
    const std::size_t T = g.frames;
    const std::size_t FI = g.f_in;
    std::vector<Real> patch(g.k_f * FI);
    for (std::size_t b = 0; b < g.batch; ++b)
        for (std::size_t co = 0; co < g.c_out; ++co)
            for (std::size_t to = 0; to < out_frames; ++to) {
                std::fill(patch.begin(), patch.end(), Real{0});
                for (std::size_t ci = 0; ci < g.c_in; ++ci)
                    for (std::size_t kt = 0; kt < g.k_t && kt <= to; ++kt) {
                        const std::size_t t = to - kt;
                        if (t >= T) continue;
                        const Real* irow = y + ((b * g.c_in + ci) * T + t) * FI;
                        const Real* wr = w + ((ci * g.c_out + co) * g.k_t + kt) * g.k_f;
                        for (std::size_t kf = 0; kf < g.k_f; ++kf) axpy(wr[kf], irow, patch.data() + kf * FI, FI);
                    }
                scatter_patch(patch.data(), out + ((b * g.c_out + co) * out_frames + to) * g.f_out, FI, g.k_f, g.s_f);
            }
}

template <typename Real>
void transposed_backward(Node<Real>& n, const ConvGeometry& g, std::size_t out_frames) {
    auto& yin = *n.inputs[0];
    auto& wk = *n.inputs[1];
    const std::size_t T = g.frames;
    const std::size_t FI = g.f_in;
    const Real* gout = n.grad.data();
    std::vector<Real> patch(g.k_f * FI);
    std::vector<Real> wacc(wk.requires_grad ? wk.value.size() * FI : 0);
    for (std::size_t b = 0; b < g.batch; ++b)
        for (std::size_t co = 0; co < g.c_out; ++co)
            for (std::size_t to = 0; to < out_frames; ++to) {
                gather_patch(gout + ((b * g.c_out + co) * out_frames + to) * g.f_out, patch.data(), FI, g.k_f, g.s_f);
                for (std::size_t ci = 0; ci < g.c_in; ++ci)
                    for (std::size_t kt = 0; kt < g.k_t && kt <= to; ++kt) {
                        const std::size_t t = to - kt;
                        if (t >= T) continue;
                        const std::size_t in_off = ((b * g.c_in + ci) * T + t) * FI;
                        const std::size_t w0 = ((ci * g.c_out + co) * g.k_t + kt) * g.k_f;
                        for (std::size_t kf = 0; kf < g.k_f; ++kf) {
                            if (yin.requires_grad)
                                axpy(wk.value[w0 + kf], patch.data() + kf * FI, yin.grad.data() + in_off, FI);
                            if (wk.requires_grad)
                                mul_acc(patch.data() + kf * FI, yin.value.data() + in_off, wacc.data() + (w0 + kf) * FI,
                                        FI);
                        }
                    }
            }
    if (wk.requires_grad) reduce_weight_grad(wacc, FI, wk.grad);
}

}  // namespace

template <typename Real>
Tensor<Real> deconv2d_causal(const Tensor<Real>& input, const Tensor<Real>& kernel, const Tensor<Real>& bias,
                             Stride2 stride, std::size_t out_width) {
    const ConvGeometry g = check_transposed(input, kernel, stride, out_width, "deconv2d_causal");
    check_bias(bias, g.c_out, "deconv2d_causal");
    const std::size_t T = g.frames;
    std::vector<Real> out(g.batch * g.c_out * T * g.f_out);
    const Real* bv = bias.data().data();
    for (std::size_t b = 0; b < g.batch; ++b)
        for (std::size_t co = 0; co < g.c_out; ++co)
            std::fill_n(out.data() + ((b * g.c_out + co) * T) * g.f_out, T * g.f_out, bv[co]);
    transposed_forward(input.data().data(), kernel.data().data(), out.data(), g, T);

    return Tensor<Real>::from_op(Shape{g.batch, g.c_out, T, g.f_out}, std::move(out), "deconv2d_causal",
                                 {input, kernel, bias}, [g](Node<Real>& n) {
                                     transposed_backward(n, g, g.frames);
                                     auto& bs = *n.inputs[2];
                                     if (bs.requires_grad)
                                         add_bias_grad(n.grad.data(), g.batch, g.c_out, g.frames * g.f_out, bs.grad);
                                 });
}

template <typename Real>
Tensor<Real> conv2d_transpose_full(const Tensor<Real>& input, const Tensor<Real>& kernel, Stride2 stride,
                                   std::size_t out_width) {
    const ConvGeometry g = check_transposed(input, kernel, stride, out_width, "conv2d_transpose_full");
    const std::size_t out_frames = g.frames + g.k_t - 1;
    std::vector<Real> out(g.batch * g.c_out * out_frames * g.f_out, Real{0});
    transposed_forward(input.data().data(), kernel.data().data(), out.data(), g, out_frames);
    return Tensor<Real>::from_op(Shape{g.batch, g.c_out, out_frames, g.f_out}, std::move(out),
                                 "conv2d_transpose_full", {input, kernel},
                                 [g, out_frames](Node<Real>& n) { transposed_backward(n, g, out_frames); });
}

#define PLCRNN_INSTANTIATE(Real)                                                                              \
    template Tensor<Real> conv2d_causal(const Tensor<Real>&, const Tensor<Real>&, const Tensor<Real>&, Stride2); \
    template Tensor<Real> deconv2d_causal(const Tensor<Real>&, const Tensor<Real>&, const Tensor<Real>&, Stride2, \
                                          std::size_t);                                                        \
    template Tensor<Real> conv2d_transpose_full(const Tensor<Real>&, const Tensor<Real>&, Stride2, std::size_t);

PLCRNN_INSTANTIATE(float)
PLCRNN_INSTANTIATE(double)

#undef PLCRNN_INSTANTIATE

}  // namespace plcrnn::ad
