#include <algorithm>
#include <memory>
#include <cmath>
#include <string>

#include "plcrnn/ad/ops.hpp"
#include "plcrnn/error.hpp"
#include "math.hpp"

namespace plcrnn::ad {

namespace {

using detail::stable_sigmoid;

struct LstmDims {
    std::size_t batch, frames, in, hidden;
};

// Activations saved for the adjoint: gates [B,T,4H] (post-nonlinearity, order
// i f g o), cell state and tanh(cell) [B,T,H].
template <typename Real>
struct LstmCache {
    std::vector<Real> gates;
    std::vector<Real> cell;
    std::vector<Real> cell_tanh;
};

template <typename Real>
void axpy(Real a, const Real* x, Real* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// [rows, cols] -> [cols, rows]
template <typename Real>
std::vector<Real> transpose(const Real* a, std::size_t rows, std::size_t cols) {
    std::vector<Real> t(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = a[r * cols + c];
    return t;
}

}  // namespace

template <typename Real>
Tensor<Real> lstm_forward(const Tensor<Real>& input, const Tensor<Real>& w_ih, const Tensor<Real>& w_hh,
                          const Tensor<Real>& bias) {
    if (input.rank() != 3 || w_ih.rank() != 2 || w_hh.rank() != 2 || bias.rank() != 1) {
        throw DimensionError("lstm_forward: expected [B,T,D] input and 2-D weights");
    }
    const std::size_t H = w_hh.dim(1);
    const LstmDims d{input.dim(0), input.dim(1), input.dim(2), H};
    if (w_hh.dim(0) != 4 * H || w_ih.dim(0) != 4 * H || w_ih.dim(1) != d.in || bias.dim(0) != 4 * H) {
        throw DimensionError("lstm_forward: weights " + shape_string(w_ih.shape()) + ", " +
                             shape_string(w_hh.shape()) + ", bias " + shape_string(bias.shape()) +
                             " do not fit input " + shape_string(input.shape()));
    }

    const std::size_t G = 4 * H;
    const std::size_t rows = d.batch * d.frames;
    auto cache = std::make_shared<LstmCache<Real>>();
    cache->gates.resize(rows * G);
    cache->cell.resize(rows * H);
    cache->cell_tanh.resize(rows * H);
    std::vector<Real> out(rows * H);

    const Real* x = input.data().data();
    const Real* wi = w_ih.data().data();
    const Real* wh = w_hh.data().data();
    const Real* bv = bias.data().data();
    // Transposed weights turn every matrix-vector product into a run of
    // contiguous axpy updates, which vectorize without reassociation.
    const std::vector<Real> wi_t = transpose(wi, G, d.in);
    const std::vector<Real> wh_t = transpose(wh, G, H);

    // Input projections for all frames at once; gates holds pre-activations
    // until the recurrence below overwrites them.
    for (std::size_t r = 0; r < rows; ++r) {
        Real* z = cache->gates.data() + r * G;
        std::copy(bv, bv + G, z);
        const Real* xr = x + r * d.in;
        for (std::size_t k = 0; k < d.in; ++k) axpy(xr[k], wi_t.data() + k * G, z, G);
    }
    for (std::size_t b = 0; b < d.batch; ++b) {
        for (std::size_t t = 0; t < d.frames; ++t) {
            const std::size_t bt = b * d.frames + t;
            Real* z = cache->gates.data() + bt * G;
            if (t > 0) {
                const Real* h_prev = out.data() + (bt - 1) * H;
                for (std::size_t k = 0; k < H; ++k) axpy(h_prev[k], wh_t.data() + k * G, z, G);
            }
            const Real* c_prev = t == 0 ? nullptr : cache->cell.data() + (bt - 1) * H;
            Real* c = cache->cell.data() + bt * H;
            Real* tc = cache->cell_tanh.data() + bt * H;
            Real* h = out.data() + bt * H;
            for (std::size_t j = 0; j < H; ++j) {
                const Real ig = stable_sigmoid(z[j]);
                const Real fg = stable_sigmoid(z[H + j]);
                const Real gg = std::tanh(z[2 * H + j]);
                const Real og = stable_sigmoid(z[3 * H + j]);
                z[j] = ig;
                z[H + j] = fg;
                z[2 * H + j] = gg;
                z[3 * H + j] = og;
                c[j] = (c_prev ? fg * c_prev[j] : Real{0}) + ig * gg;
                tc[j] = std::tanh(c[j]);
                h[j] = og * tc[j];
            }
        }
    }

    return Tensor<Real>::from_op(
        Shape{d.batch, d.frames, H}, std::move(out), "lstm_forward", {input, w_ih, w_hh, bias},
        [d, cache](Node<Real>& n) {
            auto& xin = *n.inputs[0];
            auto& wi = *n.inputs[1];
            auto& wh = *n.inputs[2];
            auto& bs = *n.inputs[3];
            const std::size_t H = d.hidden;
            const std::size_t G = 4 * H;
            const std::size_t rows = d.batch * d.frames;
            std::vector<Real> dz(rows * G);
            std::vector<Real> dh_next(H);
            std::vector<Real> dc_next(H);

            // Backpropagation through time: only the recurrent path is
            // sequential; weight and input gradients follow in bulk.
            for (std::size_t b = 0; b < d.batch; ++b) {
                std::fill(dh_next.begin(), dh_next.end(), Real{0});
                std::fill(dc_next.begin(), dc_next.end(), Real{0});
                for (std::size_t t = d.frames; t-- > 0;) {
                    const std::size_t bt = b * d.frames + t;
                    const Real* gates = cache->gates.data() + bt * G;
                    const Real* tc = cache->cell_tanh.data() + bt * H;
                    const Real* gout = n.grad.data() + bt * H;
                    Real* dzr = dz.data() + bt * G;
                    for (std::size_t j = 0; j < H; ++j) {
                        const Real ig = gates[j], fg = gates[H + j], gg = gates[2 * H + j], og = gates[3 * H + j];
                        const Real c_prev = t == 0 ? Real{0} : cache->cell[(bt - 1) * H + j];
                        const Real dh = gout[j] + dh_next[j];
                        const Real dc = dh * og * (Real(1) - tc[j] * tc[j]) + dc_next[j];
                        dzr[j] = dc * gg * ig * (Real(1) - ig);
                        dzr[H + j] = dc * c_prev * fg * (Real(1) - fg);
                        dzr[2 * H + j] = dc * ig * (Real(1) - gg * gg);
                        dzr[3 * H + j] = dh * tc[j] * og * (Real(1) - og);
                        dc_next[j] = dc * fg;
                    }
                    std::fill(dh_next.begin(), dh_next.end(), Real{0});
                    if (t > 0)
                        for (std::size_t r = 0; r < G; ++r) axpy(dzr[r], wh.value.data() + r * H, dh_next.data(), H);
                }
            }

            for (std::size_t bt = 0; bt < rows; ++bt) {
                const Real* dzr = dz.data() + bt * G;
                const Real* xt = xin.value.data() + bt * d.in;
                const bool has_prev = bt % d.frames != 0;
                const Real* h_prev = has_prev ? n.value.data() + (bt - 1) * H : nullptr;
                if (bs.requires_grad) axpy(Real{1}, dzr, bs.grad.data(), G);
                for (std::size_t r = 0; r < G; ++r) {
                    const Real g = dzr[r];
                    if (wi.requires_grad) axpy(g, xt, wi.grad.data() + r * d.in, d.in);
                    if (xin.requires_grad) axpy(g, wi.value.data() + r * d.in, xin.grad.data() + bt * d.in, d.in);
                    if (wh.requires_grad && has_prev) axpy(g, h_prev, wh.grad.data() + r * H, H);
                }
            }
        });
}

template Tensor<float> lstm_forward(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                    const Tensor<float>&);
template Tensor<double> lstm_forward(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                     const Tensor<double>&);

}  // namespace plcrnn::ad
