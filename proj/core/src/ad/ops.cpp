#include "plcrnn/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "plcrnn/error.hpp"
#include "math.hpp"

namespace plcrnn::ad {

namespace {

using detail::stable_sigmoid;

template <typename Real>
void require_same_shape(const Tensor<Real>& a, const Tensor<Real>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                             shape_string(b.shape()));
    }
}

std::vector<std::size_t> strides_of(const Shape& shape) {
    std::vector<std::size_t> s(shape.size(), 1);
    for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
    return s;
}

}  // namespace

template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
    require_same_shape(a, b, "add");
    std::vector<Real> out(a.size());
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
    return Tensor<Real>::from_op(a.shape(), std::move(out), "add", {a, b}, [](Node<Real>& n) {
        for (auto& in : n.inputs) {
            if (!in->requires_grad) continue;
            for (std::size_t i = 0; i < n.grad.size(); ++i) in->grad[i] += n.grad[i];
        }
    });
}

template <typename Real>
Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b) {
    require_same_shape(a, b, "sub");
    std::vector<Real> out(a.size());
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
    return Tensor<Real>::from_op(a.shape(), std::move(out), "sub", {a, b}, [](Node<Real>& n) {
        auto& lhs = *n.inputs[0];
        auto& rhs = *n.inputs[1];
        if (lhs.requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) lhs.grad[i] += n.grad[i];
        if (rhs.requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) rhs.grad[i] -= n.grad[i];
    });
}

template <typename Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
    require_same_shape(a, b, "mul");
    std::vector<Real> out(a.size());
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
    return Tensor<Real>::from_op(a.shape(), std::move(out), "mul", {a, b}, [](Node<Real>& n) {
        auto& lhs = *n.inputs[0];
        auto& rhs = *n.inputs[1];
        if (lhs.requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) lhs.grad[i] += n.grad[i] * rhs.value[i];
        if (rhs.requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) rhs.grad[i] += n.grad[i] * lhs.value[i];
    });
}

template <typename Real>
Tensor<Real> scale(const Tensor<Real>& a, Real factor) {
    std::vector<Real> out(a.data().begin(), a.data().end());
    for (auto& v : out) v *= factor;
    return Tensor<Real>::from_op(a.shape(), std::move(out), "scale", {a}, [factor](Node<Real>& n) {
        auto& in = *n.inputs[0];
        for (std::size_t i = 0; i < n.grad.size(); ++i) in.grad[i] += factor * n.grad[i];
    });
}

template <typename Real>
Tensor<Real> sum(const Tensor<Real>& a) {
    Real total = 0;
    for (auto v : a.data()) total += v;
    return Tensor<Real>::from_op(Shape{1}, {total}, "sum", {a}, [](Node<Real>& n) {
        auto& in = *n.inputs[0];
        const Real g = n.grad[0];
        for (auto& v : in.grad) v += g;
    });
}

template <typename Real>
Tensor<Real> mean(const Tensor<Real>& a) {
    return scale(sum(a), Real(1) / static_cast<Real>(a.size()));
}

template <typename Real>
Tensor<Real> reshape(const Tensor<Real>& a, Shape shape) {
    if (num_elements(shape) != a.size()) {
        throw DimensionError("reshape: cannot view " + shape_string(a.shape()) + " as " + shape_string(shape));
    }
    std::vector<Real> out(a.data().begin(), a.data().end());
    return Tensor<Real>::from_op(std::move(shape), std::move(out), "reshape", {a}, [](Node<Real>& n) {
        auto& in = *n.inputs[0];
        for (std::size_t i = 0; i < n.grad.size(); ++i) in.grad[i] += n.grad[i];
    });
}

template <typename Real>
Tensor<Real> permute(const Tensor<Real>& a, const std::vector<std::size_t>& axes) {
    const auto& in_shape = a.shape();
    const std::size_t rank = in_shape.size();
    if (axes.size() != rank) throw DimensionError("permute: axes list has wrong length");
    std::vector<bool> used(rank, false);
    Shape out_shape(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        if (axes[i] >= rank || used[axes[i]]) throw DimensionError("permute: axes are not a permutation");
        used[axes[i]] = true;
        out_shape[i] = in_shape[axes[i]];
    }
    const auto in_strides = strides_of(in_shape);
    // gather[i] = source offset of output element i
    std::vector<std::size_t> gather(a.size());
    std::vector<std::size_t> idx(rank, 0);
    for (std::size_t i = 0; i < gather.size(); ++i) {
        std::size_t src = 0;
        for (std::size_t d = 0; d < rank; ++d) src += idx[d] * in_strides[axes[d]];
        gather[i] = src;
        for (std::size_t d = rank; d-- > 0;) {
            if (++idx[d] < out_shape[d]) break;
            idx[d] = 0;
        }
    }
    std::vector<Real> out(a.size());
    auto x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[gather[i]];
    return Tensor<Real>::from_op(std::move(out_shape), std::move(out), "permute", {a},
                                 [gather = std::move(gather)](Node<Real>& n) {
                                     auto& in = *n.inputs[0];
                                     for (std::size_t i = 0; i < n.grad.size(); ++i) in.grad[gather[i]] += n.grad[i];
                                 });
}

template <typename Real>
Tensor<Real> concat(const std::vector<Tensor<Real>>& parts, std::size_t axis) {
    if (parts.empty()) throw DimensionError("concat: no inputs");
    const Shape& first = parts[0].shape();
    if (axis >= first.size()) throw DimensionError("concat: axis out of range");
    Shape out_shape = first;
    out_shape[axis] = 0;
    for (const auto& p : parts) {
        if (p.rank() != first.size()) throw DimensionError("concat: rank mismatch");
        for (std::size_t d = 0; d < first.size(); ++d) {
            if (d != axis && p.shape()[d] != first[d]) {
                throw DimensionError("concat: shape mismatch " + shape_string(p.shape()) + " vs " +
                                     shape_string(first) + " off axis " + std::to_string(axis));
            }
        }
        out_shape[axis] += p.shape()[axis];
    }
    std::size_t outer = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
    std::size_t inner = 1;
    for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];

    std::vector<Real> out(num_elements(out_shape));
    const std::size_t out_row = out_shape[axis] * inner;
    std::vector<std::size_t> widths;
    std::size_t col = 0;
    for (const auto& p : parts) {
        const std::size_t w = p.shape()[axis] * inner;
        auto src = p.data();
        for (std::size_t o = 0; o < outer; ++o) {
            std::copy_n(src.begin() + o * w, w, out.begin() + o * out_row + col);
        }
        widths.push_back(w);
        col += w;
    }
    return Tensor<Real>::from_op(std::move(out_shape), std::move(out), "concat", parts,
                                 [outer, out_row, widths](Node<Real>& n) {
                                     std::size_t c = 0;
                                     for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                                         auto& in = *n.inputs[k];
                                         const std::size_t w = widths[k];
                                         if (in.requires_grad) {
                                             for (std::size_t o = 0; o < outer; ++o)
                                                 for (std::size_t j = 0; j < w; ++j)
                                                     in.grad[o * w + j] += n.grad[o * out_row + c + j];
                                         }
                                         c += w;
                                     }
                                 });
}

template <typename Real>
Tensor<Real> slice(const Tensor<Real>& a, std::size_t axis, std::size_t begin, std::size_t end) {
    const Shape& shape = a.shape();
    if (axis >= shape.size()) throw DimensionError("slice: axis out of range");
    if (begin > end || end > shape[axis]) {
        throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                             ") outside axis of size " + std::to_string(shape[axis]));
    }
    std::size_t outer = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= shape[d];
    std::size_t inner = 1;
    for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
    Shape out_shape = shape;
    out_shape[axis] = end - begin;
    const std::size_t in_row = shape[axis] * inner;
    const std::size_t out_row = (end - begin) * inner;
    const std::size_t start = begin * inner;
    std::vector<Real> out(outer * out_row);
    auto src = a.data();
    for (std::size_t o = 0; o < outer; ++o)
        std::copy_n(src.begin() + o * in_row + start, out_row, out.begin() + o * out_row);
    return Tensor<Real>::from_op(std::move(out_shape), std::move(out), "slice", {a},
                                 [outer, in_row, out_row, start](Node<Real>& n) {
                                     auto& in = *n.inputs[0];
                                     for (std::size_t o = 0; o < outer; ++o)
                                         for (std::size_t j = 0; j < out_row; ++j)
                                             in.grad[o * in_row + start + j] += n.grad[o * out_row + j];
                                 });
}

template <typename Real>
Tensor<Real> pad(const Tensor<Real>& a, std::size_t axis, std::size_t before, std::size_t after) {
    const Shape& shape = a.shape();
    if (axis >= shape.size()) throw DimensionError("pad: axis out of range");
    std::size_t outer = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= shape[d];
    std::size_t inner = 1;
    for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
    Shape out_shape = shape;
    out_shape[axis] += before + after;
    const std::size_t in_row = shape[axis] * inner;
    const std::size_t out_row = out_shape[axis] * inner;
    const std::size_t start = before * inner;
    std::vector<Real> out(outer * out_row, Real{0});
    auto src = a.data();
    for (std::size_t o = 0; o < outer; ++o)
        std::copy_n(src.begin() + o * in_row, in_row, out.begin() + o * out_row + start);
    return Tensor<Real>::from_op(std::move(out_shape), std::move(out), "pad", {a},
                                 [outer, in_row, out_row, start](Node<Real>& n) {
                                     auto& in = *n.inputs[0];
                                     for (std::size_t o = 0; o < outer; ++o)
                                         for (std::size_t j = 0; j < in_row; ++j)
                                             in.grad[o * in_row + j] += n.grad[o * out_row + start + j];
                                 });
}

template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw DimensionError("matmul: cannot multiply " + shape_string(a.shape()) + " by " +
                             shape_string(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), nn = b.dim(1);
    std::vector<Real> out(m * nn, Real{0});
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const Real av = x[i * k + p];
            for (std::size_t j = 0; j < nn; ++j) out[i * nn + j] += av * y[p * nn + j];
        }
    return Tensor<Real>::from_op(Shape{m, nn}, std::move(out), "matmul", {a, b}, [m, k, nn](Node<Real>& n) {
        auto& lhs = *n.inputs[0];
        auto& rhs = *n.inputs[1];
        if (lhs.requires_grad)
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    Real acc = 0;
                    for (std::size_t j = 0; j < nn; ++j) acc += n.grad[i * nn + j] * rhs.value[p * nn + j];
                    lhs.grad[i * k + p] += acc;
                }
        if (rhs.requires_grad)
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const Real av = lhs.value[i * k + p];
                    for (std::size_t j = 0; j < nn; ++j) rhs.grad[p * nn + j] += av * n.grad[i * nn + j];
                }
    });
}

template <typename Real>
Tensor<Real> linear(const Tensor<Real>& x, const Tensor<Real>& weight, const Tensor<Real>& bias) {
    if (x.rank() == 0 || weight.rank() != 2 || bias.rank() != 1 || weight.dim(0) != bias.dim(0) ||
        x.shape().back() != weight.dim(1)) {
        throw DimensionError("linear: input " + shape_string(x.shape()) + ", weight " +
                             shape_string(weight.shape()) + ", bias " + shape_string(bias.shape()));
    }
    const std::size_t in_f = weight.dim(1), out_f = weight.dim(0);
    const std::size_t rows = x.size() / in_f;
    Shape out_shape = x.shape();
    out_shape.back() = out_f;
    std::vector<Real> out(rows * out_f);
    auto xv = x.data();
    auto wv = weight.data();
    auto bv = bias.data();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < out_f; ++o) {
            Real acc = bv[o];
            for (std::size_t i = 0; i < in_f; ++i) acc += wv[o * in_f + i] * xv[r * in_f + i];
            out[r * out_f + o] = acc;
        }
    return Tensor<Real>::from_op(std::move(out_shape), std::move(out), "linear", {x, weight, bias},
                                 [rows, in_f, out_f](Node<Real>& n) {
                                     auto& xin = *n.inputs[0];
                                     auto& w = *n.inputs[1];
                                     auto& b = *n.inputs[2];
                                     for (std::size_t r = 0; r < rows; ++r)
                                         for (std::size_t o = 0; o < out_f; ++o) {
                                             const Real g = n.grad[r * out_f + o];
                                             if (b.requires_grad) b.grad[o] += g;
                                             if (w.requires_grad)
                                                 for (std::size_t i = 0; i < in_f; ++i)
                                                     w.grad[o * in_f + i] += g * xin.value[r * in_f + i];
                                             if (xin.requires_grad)
                                                 for (std::size_t i = 0; i < in_f; ++i)
                                                     xin.grad[r * in_f + i] += g * w.value[o * in_f + i];
                                         }
                                 });
}

template <typename Real>
Tensor<Real> activation(const Tensor<Real>& x, Activation kind) {
    auto in = x.data();
    std::vector<Real> out(in.size());
    // Branch-free forms: the sign of the input is unpredictable, and each
    // element costs one transcendental call.
    switch (kind) {
        case Activation::Elu:
            for (std::size_t i = 0; i < out.size(); ++i) {
                const Real e = std::expm1(std::min(in[i], Real{0}));
                out[i] = in[i] >= 0 ? in[i] : e;
            }
            break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(in[i]);
            break;
        case Activation::Softplus:
            for (std::size_t i = 0; i < out.size(); ++i) {
                out[i] = std::max(in[i], Real{0}) + std::log1p(std::exp(-std::abs(in[i])));
            }
            break;
        case Activation::Tanh:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(in[i]);
            break;
    }
    // The adjoints are written in terms of the saved output where possible.
    return Tensor<Real>::from_op(x.shape(), std::move(out), "activation", {x}, [kind](Node<Real>& n) {
        auto& xin = *n.inputs[0];
        const auto& y = n.value;
        Real* gx = xin.grad.data();
        const Real* gy = n.grad.data();
        const Real* xv = xin.value.data();
        const std::size_t size = n.grad.size();
        switch (kind) {
            case Activation::Elu:
                for (std::size_t i = 0; i < size; ++i) gx[i] += gy[i] * (xv[i] >= 0 ? Real(1) : y[i] + Real(1));
                break;
            case Activation::Sigmoid:
                for (std::size_t i = 0; i < size; ++i) gx[i] += gy[i] * y[i] * (Real(1) - y[i]);
                break;
            case Activation::Softplus:
                for (std::size_t i = 0; i < size; ++i) gx[i] += gy[i] * stable_sigmoid(xv[i]);
                break;
            case Activation::Tanh:
                for (std::size_t i = 0; i < size; ++i) gx[i] += gy[i] * (Real(1) - y[i] * y[i]);
                break;
        }
    });
}

template <typename Real>
Tensor<Real> mse_loss(const Tensor<Real>& pred, const Tensor<Real>& target) {
    require_same_shape(pred, target, "mse_loss");
    const auto diff = sub(pred, target);
    return mean(mul(diff, diff));
}

FrameMask FrameMask::from_lengths(const std::vector<std::size_t>& lengths, std::size_t frames) {
    FrameMask m;
    m.batch = lengths.size();
    m.frames = frames;
    m.valid.assign(m.batch * frames, 0);
    for (std::size_t b = 0; b < lengths.size(); ++b) {
        if (lengths[b] > frames) throw DimensionError("FrameMask: length exceeds padded frame count");
        std::fill_n(m.valid.begin() + b * frames, lengths[b], 1);
    }
    return m;
}

#define PLCRNN_INSTANTIATE(Real)                                                                     \
    template Tensor<Real> add(const Tensor<Real>&, const Tensor<Real>&);                             \
    template Tensor<Real> sub(const Tensor<Real>&, const Tensor<Real>&);                             \
    template Tensor<Real> mul(const Tensor<Real>&, const Tensor<Real>&);                             \
    template Tensor<Real> scale(const Tensor<Real>&, Real);                                          \
    template Tensor<Real> sum(const Tensor<Real>&);                                                  \
    template Tensor<Real> mean(const Tensor<Real>&);                                                 \
    template Tensor<Real> reshape(const Tensor<Real>&, Shape);                                       \
    template Tensor<Real> permute(const Tensor<Real>&, const std::vector<std::size_t>&);             \
    template Tensor<Real> concat(const std::vector<Tensor<Real>>&, std::size_t);                     \
    template Tensor<Real> slice(const Tensor<Real>&, std::size_t, std::size_t, std::size_t);         \
    template Tensor<Real> pad(const Tensor<Real>&, std::size_t, std::size_t, std::size_t);           \
    template Tensor<Real> matmul(const Tensor<Real>&, const Tensor<Real>&);                          \
    template Tensor<Real> linear(const Tensor<Real>&, const Tensor<Real>&, const Tensor<Real>&);     \
    template Tensor<Real> activation(const Tensor<Real>&, Activation);                               \
    template Tensor<Real> mse_loss(const Tensor<Real>&, const Tensor<Real>&);

PLCRNN_INSTANTIATE(float)
PLCRNN_INSTANTIATE(double)

#undef PLCRNN_INSTANTIATE

}  // namespace plcrnn::ad
