#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>

#include "plcrnn/ad/gradcheck.hpp"
#include "plcrnn/ad/ops.hpp"
#include "plcrnn/ad/serialize.hpp"
#include "plcrnn/error.hpp"
#include "plcrnn/rng.hpp"

using namespace plcrnn;
using namespace plcrnn::ad;

namespace {

Tensor<double> random_tensor(Shape shape, std::uint64_t seed, bool grad = true, double scale = 1.0) {
    Rng rng(seed);
    Tensor<double> t(std::move(shape), grad);
    for (double& v : t.data()) v = scale * rng.normal();
    return t;
}

// Brute-force causal conv: out[b,co,t,f] = bias[co] + sum kernel[co,ci,kt,kf] * in[b,ci,t-(KT-1)+kt, f*s+kf].
std::vector<double> conv_oracle(const Tensor<double>& x, const Tensor<double>& k, const Tensor<double>& bias,
                                std::size_t sf) {
    const std::size_t B = x.dim(0), CI = x.dim(1), T = x.dim(2), F = x.dim(3);
    const std::size_t CO = k.dim(0), KT = k.dim(2), KF = k.dim(3);
    const std::size_t FO = (F - KF) / sf + 1;
    std::vector<double> out(B * CO * T * FO, 0.0);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t co = 0; co < CO; ++co)
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t f = 0; f < FO; ++f) {
                    double acc = bias.data()[co];
                    for (std::size_t ci = 0; ci < CI; ++ci)
                        for (std::size_t kt = 0; kt < KT; ++kt) {
                            const long tt = static_cast<long>(t) - static_cast<long>(KT - 1) + static_cast<long>(kt);
                            if (tt < 0) continue;
                            for (std::size_t kf = 0; kf < KF; ++kf)
                                acc += k.at({co, ci, kt, kf}) * x.at({b, ci, static_cast<std::size_t>(tt), f * sf + kf});
                        }
                    out[((b * CO + co) * T + t) * FO + f] = acc;
                }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST(Tensor, HandleSemanticsShareStorage) {
    Tensor<double> a({2, 2}, {1, 2, 3, 4});
    Tensor<double> b = a;
    b.data()[0] = 9;
    EXPECT_EQ(a.data()[0], 9);
    EXPECT_EQ(a.at({1, 0}), 3);
    EXPECT_THROW(Tensor<double>({2}, {1, 2, 3}), DimensionError);
}

TEST(Ops, MseOfIdenticalIsZero) {
    auto x = random_tensor({3, 4}, 1, false);
    EXPECT_EQ(mse_loss(x, x).item(), 0.0);
}

TEST(Ops, MseHandValue) {
    Tensor<double> a({2}, {1, 2});
    Tensor<double> z({2}, {0, 0});
    EXPECT_DOUBLE_EQ(mse_loss(a, z).item(), 2.5);
}

TEST(Ops, ActivationFixedPoints) {
    Tensor<double> zero({1}, std::vector<double>{0.0});
    Tensor<double> minus_one({1}, std::vector<double>{-1.0});
    EXPECT_DOUBLE_EQ(activation(zero, Activation::Sigmoid).item(), 0.5);
    EXPECT_DOUBLE_EQ(activation(zero, Activation::Softplus).item(), std::log(2.0));
    EXPECT_NEAR(activation(minus_one, Activation::Elu).item(), std::exp(-1.0) - 1.0, 1e-15);
    EXPECT_DOUBLE_EQ(activation(zero, Activation::Tanh).item(), 0.0);
}

TEST(Ops, ActivationsStableAtExtremes) {
    Tensor<double> x({4}, {-800.0, -40.0, 40.0, 800.0});
    for (auto kind : {Activation::Elu, Activation::Sigmoid, Activation::Softplus, Activation::Tanh}) {
        const auto y = activation(x, kind);
        for (double v : y.data()) EXPECT_TRUE(std::isfinite(v));
    }
    auto s = activation(x, Activation::Softplus);
    EXPECT_DOUBLE_EQ(s.data()[3], 800.0);
    EXPECT_GE(s.data()[0], 0.0);
}

TEST(Ops, ConcatChannelAxis) {
    Tensor<double> a({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor<double> b({1, 2, 2, 2}, {5, 6, 7, 8, 9, 10, 11, 12});
    auto c = concat<double>({a, b}, 1);
    ASSERT_EQ(c.shape(), (Shape{1, 3, 2, 2}));
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(c.data()[i], double(i + 1));
    EXPECT_THROW(concat<double>({a, Tensor<double>({1, 1, 3, 2})}, 1), DimensionError);
}

TEST(Ops, ElementwiseShapeMismatchThrows) {
    EXPECT_THROW(add(Tensor<double>({2}), Tensor<double>({3})), DimensionError);
}

TEST(Ops, ConvOutputShapeFromFirstEncoderLayer) {
    auto x = random_tensor({1, 1, 5, 161}, 2, false);
    auto k = random_tensor({16, 1, 2, 3}, 3, false);
    auto b = random_tensor({16}, 4, false);
    auto y = conv2d_causal(x, k, b, {1, 2});
    EXPECT_EQ(y.shape(), (Shape{1, 16, 5, 80}));
}

TEST(Ops, ConvZeroKernelGivesBias) {
    auto x = random_tensor({2, 3, 4, 9}, 5, false);
    Tensor<double> k({2, 3, 2, 3});
    Tensor<double> b({2}, {0.5, -1.5});
    auto y = conv2d_causal(x, k, b, {1, 2});
    for (std::size_t bb = 0; bb < 2; ++bb)
        for (std::size_t co = 0; co < 2; ++co)
            for (std::size_t t = 0; t < 4; ++t)
                for (std::size_t f = 0; f < 4; ++f) EXPECT_EQ(y.at({bb, co, t, f}), b.data()[co]);
}

TEST(Ops, ConvMatchesBruteForce) {
    auto x = random_tensor({2, 3, 6, 11}, 6, false);
    auto k = random_tensor({4, 3, 2, 3}, 7, false);
    auto b = random_tensor({4}, 8, false);
    for (std::size_t sf : {1u, 2u}) {
        auto y = conv2d_causal(x, k, b, {1, sf});
        const auto want = conv_oracle(x, k, b, sf);
        ASSERT_EQ(y.size(), want.size());
        for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(y.data()[i], want[i], 1e-12);
    }
}

TEST(Ops, ConvRejectsTimeStride) {
    auto x = random_tensor({1, 1, 4, 9}, 9, false);
    EXPECT_THROW(conv2d_causal(x, Tensor<double>({1, 1, 2, 3}), Tensor<double>({1}), {2, 2}), Error);
}

TEST(Ops, DeconvOutputShapeFromBottleneck) {
    auto x = random_tensor({1, 128, 3, 4}, 10, false);
    auto k = random_tensor({128, 32, 2, 3}, 11, false);
    auto b = random_tensor({32}, 12, false);
    auto y = deconv2d_causal(x, k, b, {1, 2}, 9);
    EXPECT_EQ(y.shape(), (Shape{1, 32, 3, 9}));
}

TEST(Ops, DeconvOneByOneIsIdentity) {
    auto x = random_tensor({2, 1, 3, 5}, 13, false);
    Tensor<double> k({1, 1, 1, 1}, std::vector<double>{1.0});
    Tensor<double> b({1}, std::vector<double>{0.0});
    auto y = deconv2d_causal(x, k, b, {1, 1}, 5);
    ASSERT_EQ(y.shape(), x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.data()[i], x.data()[i]);
}

TEST(Ops, TransposeIsAdjointOfValidConv) {
    // <conv(x), y> == <x, conv^T(y)> for the bias-free valid convolution.
    const std::size_t KT = 2, KF = 3, SF = 2, F = 11, T = 5;
    auto k = random_tensor({3, 2, KT, KF}, 14, false);
    auto x = random_tensor({1, 2, T, F}, 15, false);
    Tensor<double> zero_bias({3});
    auto full = conv2d_causal(x, k, zero_bias, {1, SF});
    const std::size_t FO = full.dim(3);
    auto y = random_tensor({1, 3, T, FO}, 16, false);
    auto adj = conv2d_transpose_full(y, k, {1, SF}, F);
    ASSERT_EQ(adj.shape(), (Shape{1, 2, T + KT - 1, F}));
    // conv2d_causal pads KT-1 leading zero frames, so its adjoint drops them.
    auto trimmed = slice(adj, 2, KT - 1, T + KT - 1);
    EXPECT_NEAR(dot(full.data(), y.data()), dot(x.data(), trimmed.data()), 1e-10);
}

TEST(Ops, LstmZeroWeightsGiveZeroOutput) {
    auto x = random_tensor({2, 4, 3}, 17, false);
    auto h = lstm_forward(x, Tensor<double>({8, 3}), Tensor<double>({8, 2}), Tensor<double>({8}));
    ASSERT_EQ(h.shape(), (Shape{2, 4, 2}));
    for (double v : h.data()) EXPECT_EQ(v, 0.0);
}

TEST(Ops, LstmMatchesScalarRecurrence) {
    Rng rng(18);
    const std::size_t T = 6;
    Tensor<double> x({1, T, 1});
    for (double& v : x.data()) v = rng.normal();
    Tensor<double> wih({4, 1}), whh({4, 1}), bias({4});
    for (double& v : wih.data()) v = rng.normal();
    for (double& v : whh.data()) v = rng.normal();
    for (double& v : bias.data()) v = rng.normal();
    auto h = lstm_forward(x, wih, whh, bias);
    auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    double hp = 0, c = 0;
    for (std::size_t t = 0; t < T; ++t) {
        double g[4];
        for (int q = 0; q < 4; ++q) g[q] = wih.data()[q] * x.data()[t] + whh.data()[q] * hp + bias.data()[q];
        c = sig(g[1]) * c + sig(g[0]) * std::tanh(g[2]);
        hp = sig(g[3]) * std::tanh(c);
        EXPECT_NEAR(h.data()[t], hp, 1e-14);
    }
}

TEST(Ops, BatchNormTrainNormalizes) {
    auto x = random_tensor({3, 2, 4, 5}, 19, false, 3.0);
    Tensor<double> gamma = Tensor<double>::full({2}, 1.0), beta({2});
    BatchNormState<double> state(2);
    auto y = batch_norm(x, gamma, beta, state, NormMode::Train);
    for (std::size_t c = 0; c < 2; ++c) {
        double m = 0, v = 0;
        std::size_t n = 0;
        for (std::size_t b = 0; b < 3; ++b)
            for (std::size_t t = 0; t < 4; ++t)
                for (std::size_t f = 0; f < 5; ++f, ++n) m += y.at({b, c, t, f});
        m /= n;
        for (std::size_t b = 0; b < 3; ++b)
            for (std::size_t t = 0; t < 4; ++t)
                for (std::size_t f = 0; f < 5; ++f) v += std::pow(y.at({b, c, t, f}) - m, 2);
        v /= n;
        EXPECT_NEAR(m, 0.0, 1e-12);
        EXPECT_NEAR(v, 1.0, 1e-4);
    }
    EXPECT_TRUE(state.initialized);
}

TEST(Ops, BatchNormConstantChannelGivesBeta) {
    Tensor<double> x = Tensor<double>::full({2, 1, 3, 4}, 7.0);
    Tensor<double> gamma({1}, std::vector<double>{2.0}), beta({1}, std::vector<double>{0.25});
    BatchNormState<double> state(1);
    auto y = batch_norm(x, gamma, beta, state, NormMode::Train);
    for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Ops, BatchNormEvalUsesRunningStats) {
    auto x = random_tensor({1, 2, 3, 2}, 20, false);
    Tensor<double> gamma({2}, {1.5, -0.5}), beta({2}, {0.1, 0.2});
    BatchNormState<double> state(2);
    state.running_mean = {0.3, -1.0};
    state.running_var = {4.0, 0.25};
    state.initialized = true;
    auto y = batch_norm(x, gamma, beta, state, NormMode::Eval);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t t = 0; t < 3; ++t)
            for (std::size_t f = 0; f < 2; ++f) {
                const double want = gamma.data()[c] * (x.at({0, c, t, f}) - state.running_mean[c]) /
                                        std::sqrt(state.running_var[c] + state.eps) +
                                    beta.data()[c];
                EXPECT_NEAR(y.at({0, c, t, f}), want, 1e-14);
            }
}

TEST(Ops, BatchNormEvalBeforeStatsThrows) {
    BatchNormState<double> state(1);
    EXPECT_THROW(batch_norm(Tensor<double>({1, 1, 2, 2}), Tensor<double>::full({1}, 1.0), Tensor<double>({1}), state,
                            NormMode::Eval),
                 StateError);
}

TEST(Ops, BatchNormMaskIgnoresPaddedFrames) {
    auto x = random_tensor({2, 1, 4, 3}, 21, false);
    // Garbage in the padded frames of item 1 must not move the statistics.
    auto x2 = Tensor<double>(x.shape(), std::vector<double>(x.data().begin(), x.data().end()));
    for (std::size_t t = 2; t < 4; ++t)
        for (std::size_t f = 0; f < 3; ++f) x2.data()[x2.offset({1, 0, t, f})] = 1e3;
    auto mask = FrameMask::from_lengths({4, 2}, 4);
    Tensor<double> gamma = Tensor<double>::full({1}, 1.0), beta({1});
    BatchNormState<double> s1(1), s2(1);
    auto y1 = batch_norm(x, gamma, beta, s1, NormMode::Train, &mask);
    auto y2 = batch_norm(x2, gamma, beta, s2, NormMode::Train, &mask);
    EXPECT_NEAR(s1.running_mean[0], s2.running_mean[0], 1e-12);
    EXPECT_NEAR(y1.at({0, 0, 1, 1}), y2.at({0, 0, 1, 1}), 1e-12);
}

TEST(Backward, SumGivesOnes) {
    auto x = random_tensor({3, 2}, 22);
    backward(sum(x));
    for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, NonScalarLossRejected) {
    auto x = random_tensor({3}, 23);
    EXPECT_THROW(backward(scale(x, 2.0)), ContractError);
}

TEST(Backward, RepeatedBackwardAccumulatesLeafGradients) {
    auto x = random_tensor({4}, 24);
    auto loss = sum(mul(x, x));
    backward(loss);
    std::vector<double> once(x.grad().begin(), x.grad().end());
    backward(loss);
    for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(x.grad()[i], 2.0 * once[i]);
    x.zero_grad();
    for (double g : x.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, ReusedTensorCollectsBothPaths) {
    Tensor<double> x({1}, std::vector<double>{3.0}, true);
    backward(sum(add(mul(x, x), x)));  // d/dx (x^2 + x) = 2x + 1
    EXPECT_DOUBLE_EQ(x.grad()[0], 7.0);
}

TEST(GradCheck, LinearFunction) {
    auto x = random_tensor({5}, 25);
    auto r = gradient_check([&] { return sum(scale(x, 3.0)); }, {x});
    EXPECT_LT(r.max_relative_error, 1e-10);
    EXPECT_EQ(r.checked, 5u);
}

TEST(GradCheck, SigmoidChain) {
    auto x = random_tensor({6}, 26);
    auto r = gradient_check([&] { return sum(activation(activation(x, Activation::Sigmoid), Activation::Tanh)); }, {x});
    EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(GradCheck, EveryOpClass) {
    auto a = random_tensor({2, 3}, 27), b = random_tensor({2, 3}, 28), w = random_tensor({3, 4}, 29);
    auto lw = random_tensor({2, 3}, 30), lb = random_tensor({2}, 31);
    auto check = [](auto fn, std::vector<Tensor<double>> params) {
        return gradient_check(fn, std::move(params)).max_relative_error;
    };
    EXPECT_LT(check([&] { return sum(mul(sub(a, b), add(a, b))); }, {a, b}), 1e-4);
    EXPECT_LT(check([&] { return mean(mul(permute(a, {1, 0}), permute(a, {1, 0}))); }, {a}), 1e-4);
    EXPECT_LT(check([&] { return sum(mul(matmul(a, w), matmul(a, w))); }, {a, w}), 1e-4);
    EXPECT_LT(check([&] { return sum(activation(linear(a, lw, lb), Activation::Softplus)); }, {a, lw, lb}), 1e-4);
    EXPECT_LT(check([&] { return sum(activation(a, Activation::Elu)); }, {a}), 1e-4);
    EXPECT_LT(check([&] { return sum(mul(pad(slice(a, 1, 1, 3), 1, 2, 1), pad(slice(b, 1, 0, 2), 1, 2, 1))); }, {a, b}),
              1e-4);
    EXPECT_LT(check([&] { return mse_loss(reshape(a, {3, 2}), reshape(b, {3, 2})); }, {a, b}), 1e-4);

    auto x = random_tensor({1, 2, 3, 7}, 32), k = random_tensor({2, 2, 2, 3}, 33), cb = random_tensor({2}, 34);
    EXPECT_LT(check([&] { auto y = conv2d_causal(x, k, cb, {1, 2}); return sum(mul(y, y)); }, {x, k, cb}), 1e-4);
    auto dk = random_tensor({2, 1, 2, 3}, 35), db = random_tensor({1}, 36);
    EXPECT_LT(check([&] { auto y = deconv2d_causal(x, dk, db, {1, 2}, 15); return sum(mul(y, y)); }, {x, dk, db}), 1e-4);

    auto s = random_tensor({2, 4, 3}, 37), wih = random_tensor({8, 3}, 38, true, 0.5);
    auto whh = random_tensor({8, 2}, 39, true, 0.5), lbias = random_tensor({8}, 40, true, 0.5);
    EXPECT_LT(check([&] { auto h = lstm_forward(s, wih, whh, lbias); return sum(mul(h, h)); }, {s, wih, whh, lbias}),
              1e-4);

    auto gamma = random_tensor({2}, 41), beta = random_tensor({2}, 42), target = random_tensor({1, 2, 3, 7}, 43);
    EXPECT_LT(check(
                  [&] {
                      BatchNormState<double> st(2);
                      return mse_loss(batch_norm(x, gamma, beta, st, NormMode::Train), target);
                  },
                  {x, gamma, beta}),
              1e-4);
}

TEST(Causality, ConvDeconvLstmIgnoreFutureFrames) {
    auto x = random_tensor({1, 2, 8, 9}, 44, false);
    auto k = random_tensor({2, 2, 2, 3}, 45, false), b = random_tensor({2}, 46, false);
    auto dk = random_tensor({2, 1, 2, 3}, 47, false), db = random_tensor({1}, 48, false);
    auto s = random_tensor({1, 8, 3}, 49, false);
    auto wih = random_tensor({8, 3}, 50, false), whh = random_tensor({8, 2}, 51, false), lb = random_tensor({8}, 52, false);
    const std::size_t cut = 4;
    auto x2 = random_tensor(x.shape(), 53, false);
    auto s2 = random_tensor(s.shape(), 54, false);
    for (std::size_t i = 0; i < x.size(); ++i)
        if ((i / 9) % 8 <= cut) x2.data()[i] = x.data()[i];
    for (std::size_t i = 0; i < s.size(); ++i)
        if (i / 3 <= cut) s2.data()[i] = s.data()[i];
    auto same_prefix = [&](const Tensor<double>& p, const Tensor<double>& q, std::size_t frames_axis) {
        const std::size_t T = p.dim(frames_axis);
        std::size_t inner = 1;
        for (std::size_t a = frames_axis + 1; a < p.rank(); ++a) inner *= p.dim(a);
        for (std::size_t i = 0; i < p.size(); ++i)
            if ((i / inner) % T <= cut && p.data()[i] != q.data()[i]) return false;
        return true;
    };
    EXPECT_TRUE(same_prefix(conv2d_causal(x, k, b, {1, 2}), conv2d_causal(x2, k, b, {1, 2}), 2));
    EXPECT_TRUE(same_prefix(deconv2d_causal(x, dk, db, {1, 2}, 19), deconv2d_causal(x2, dk, db, {1, 2}, 19), 2));
    EXPECT_TRUE(same_prefix(lstm_forward(s, wih, whh, lb), lstm_forward(s2, wih, whh, lb), 1));
    Tensor<double> g = Tensor<double>::full({2}, 1.0), be({2});
    BatchNormState<double> st(2);
    st.initialize_identity();
    EXPECT_TRUE(same_prefix(batch_norm(x, g, be, st, NormMode::Eval), batch_norm(x2, g, be, st, NormMode::Eval), 2));
}

TEST(Serialize, RoundTripBothPrecisions) {
    auto t = random_tensor({2, 3, 4}, 55, false);
    std::stringstream ss;
    write_tensor(ss, t);
    auto back = read_tensor<double>(ss);
    EXPECT_EQ(back.shape(), t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(back.data()[i], t.data()[i]);

    Tensor<float> f({3}, {1.5f, -2.25f, 3.0f});
    std::stringstream fs;
    write_tensor(fs, f);
    auto as_double = read_tensor<double>(fs);
    EXPECT_EQ(as_double.data()[1], -2.25);
}

TEST(Serialize, RejectsBadMagicAndTruncation) {
    std::stringstream bad("XXXXgarbage");
    EXPECT_THROW(read_tensor<double>(bad), IoError);
    std::stringstream ss;
    write_tensor(ss, random_tensor({4, 4}, 56, false));
    std::string bytes = ss.str();
    std::stringstream cut(bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(read_tensor<double>(cut), IoError);
}

TEST(Serialize, FileRoundTrip) {
    const auto path = std::filesystem::temp_directory_path() / "plcrnn_unit_tensor.ptns";
    auto t = random_tensor({5}, 57, false);
    save_tensor(path, t);
    auto back = load_tensor<double>(path);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(back.data()[i], t.data()[i]);
    std::filesystem::remove(path);
}

TEST(Rng, DerivedStreamsAreDeterministicAndDistinct) {
    Rng root(7);
    Rng a = root.derive("init"), a2 = Rng(7).derive("init"), b = root.derive("shuffle");
    const auto va = a.next_u64();
    EXPECT_EQ(va, a2.next_u64());
    EXPECT_NE(va, b.next_u64());
    for (int i = 0; i < 100; ++i) {
        const double u = root.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
        const auto k = root.uniform_int(-2, 3);
        EXPECT_GE(k, -2);
        EXPECT_LE(k, 3);
    }
}
