#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "plcrnn/ad/gradcheck.hpp"
#include "plcrnn/audio/corpus.hpp"
#include "plcrnn/error.hpp"
#include "plcrnn/rng.hpp"
#include "plcrnn/targets/targets.hpp"

using namespace plcrnn;
using namespace plcrnn::targets;
using ad::Tensor;

namespace {

dsp::Spectrogram spec_from(std::vector<std::complex<double>> first_frame) {
    dsp::Spectrogram s;
    s.frames = 1;
    s.values.assign(dsp::kBins, {1.0, 0.0});
    for (std::size_t k = 0; k < first_frame.size(); ++k) s.values[k] = first_frame[k];
    return s;
}

Tensor<double> random_tensor(ad::Shape shape, std::uint64_t seed, double lo = 0.0, double hi = 1.0, bool grad = false) {
    Rng rng(seed);
    Tensor<double> t(std::move(shape), grad);
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

audio::UtterancePair small_pair(std::uint64_t seed) {
    audio::SynthOptions opt;
    opt.min_duration_s = 0.3;
    opt.max_duration_s = 0.4;
    return audio::synth_corpus(1, seed, opt)[0].pair;
}

}  // namespace

TEST(StagePlan, StandardRows) {
    EXPECT_EQ(StagePlan::standard(2, TargetKind::Tms).deltas_db, (std::vector<double>{20}));
    EXPECT_EQ(StagePlan::standard(3, TargetKind::Tms).deltas_db, (std::vector<double>{10, 20}));
    EXPECT_EQ(StagePlan::standard(4, TargetKind::Tms).deltas_db, (std::vector<double>{5, 10, 20}));
    EXPECT_EQ(StagePlan::standard(5, TargetKind::Tms).deltas_db, (std::vector<double>{5, 10, 15, 20}));
    EXPECT_EQ(StagePlan::standard(3, TargetKind::Iam).alphas, (std::vector<double>{0.1, 0.1, 1.0}));
    EXPECT_THROW(StagePlan::standard(1, TargetKind::Tms), InputError);
    EXPECT_THROW(StagePlan::standard(6, TargetKind::Tms), InputError);
}

TEST(StagePlan, CustomPlansMustIncrease) {
    auto p = StagePlan::custom({3, 6, 9, 12, 15}, TargetKind::Iam);
    EXPECT_EQ(p.stages, 6u);
    EXPECT_EQ(p.alphas.back(), 1.0);
    EXPECT_EQ(p.alphas.front(), 0.1);
    EXPECT_THROW(StagePlan::custom({10, 10}, TargetKind::Tms), InputError);
    EXPECT_THROW(StagePlan::custom({10, 5}, TargetKind::Tms), InputError);
}

TEST(StagePlan, ParseTargetKind) {
    EXPECT_EQ(parse_target_kind("IAM"), TargetKind::Iam);
    EXPECT_EQ(parse_target_kind("tms"), TargetKind::Tms);
    EXPECT_EQ(to_string(TargetKind::Iam), "iam");
    EXPECT_THROW(parse_target_kind("irm"), InputError);
}

TEST(Iam, CellLaws) {
    // k=0 noise-free, k=1 silent speech, k=2 destructive phase (|S|/|X| = 1.5),
    // k=3 both zero, k=4 ordinary ratio 0.25.
    auto clean = spec_from({{3, 4}, {0, 0}, {0, 3}, {0, 0}, {1, 0}});
    auto noisy = spec_from({{3, 4}, {1, 1}, {2, 0}, {0, 0}, {0, 4}});
    auto m = iam(clean, noisy);
    ASSERT_EQ(m.shape(), (ad::Shape{1, 161}));
    EXPECT_EQ(m.data()[0], 1.0);
    EXPECT_EQ(m.data()[1], 0.0);
    EXPECT_EQ(m.data()[2], 1.0);
    EXPECT_EQ(m.data()[3], 0.0);
    EXPECT_DOUBLE_EQ(m.data()[4], 0.25);
}

TEST(Iam, BoundedOnAdversarialMagnitudes) {
    Tensor<double> s({1, 6}, std::vector<double>{0, 1e-300, 1e300, std::numeric_limits<double>::denorm_min(), 5, 0});
    Tensor<double> x({1, 6}, std::vector<double>{0, 0, 1e-300, 0, 1e-320, 1e300});
    const auto m = iam_from_magnitudes(s, x);
    for (double v : m.data()) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(SaLoss, ZeroAtUnclippedIdealMask) {
    Tensor<double> noisy({1, 2}, std::vector<double>{2, 4});
    Tensor<double> target({1, 2}, std::vector<double>{1, 3});
    EXPECT_EQ(sa_loss(iam_from_magnitudes(target, noisy), noisy, target).item(), 0.0);
}

TEST(SaLoss, ZeroMaskGivesMeanTargetEnergy) {
    auto target = random_tensor({3, 5}, 1);
    auto noisy = random_tensor({3, 5}, 2);
    double want = 0;
    for (double v : target.data()) want += v * v;
    EXPECT_NEAR(sa_loss(Tensor<double>({3, 5}), noisy, target).item(), want / 15, 1e-15);
}

TEST(SaLoss, MatchesDoubleLoop) {
    auto m = random_tensor({4, 7}, 3), x = random_tensor({4, 7}, 4, 0, 3), s = random_tensor({4, 7}, 5, 0, 2);
    double want = 0;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 7; ++j) want += std::pow(s.at({i, j}) - x.at({i, j}) * m.at({i, j}), 2);
    EXPECT_NEAR(sa_loss(m, x, s).item(), want / 28, 1e-14);
}

TEST(StageTargets, ThreeStagePlanHitsItsSnrs) {
    const auto pair = small_pair(6);
    auto t = build_stage_targets(pair, StagePlan::standard(3, TargetKind::Tms));
    ASSERT_EQ(t.magnitudes.size(), 3u);
    EXPECT_TRUE(t.masks.empty());
    // Stage targets equal the spectra of the improved mixtures.
    for (std::size_t q = 0; q < 2; ++q) {
        auto want = dsp::magnitude(dsp::stft(audio::make_improved_mixture(pair, q == 0 ? 10.0 : 20.0)));
        for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(t.magnitudes[q].data()[i], want.data()[i], 1e-12);
    }
    auto clean = dsp::magnitude(dsp::stft(pair.clean));
    for (std::size_t i = 0; i < clean.size(); ++i) EXPECT_EQ(t.magnitudes[2].data()[i], clean.data()[i]);
}

TEST(StageTargets, TwoStagePlanUsesTwentyDb) {
    const auto pair = small_pair(7);
    auto t = build_stage_targets(pair, StagePlan::standard(2, TargetKind::Tms));
    ASSERT_EQ(t.magnitudes.size(), 2u);
    auto want = dsp::magnitude(dsp::stft(audio::make_improved_mixture(pair, 20.0)));
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(t.magnitudes[0].data()[i], want.data()[i], 1e-12);
}

TEST(StageTargets, LaterStagesAreCloserToClean) {
    const auto pair = small_pair(8);
    auto t = build_stage_targets(pair, StagePlan::standard(5, TargetKind::Tms));
    const auto& clean = t.magnitudes.back();
    double previous = std::numeric_limits<double>::infinity();
    for (const auto* m : {&t.noisy_mag, &t.magnitudes[0], &t.magnitudes[1], &t.magnitudes[2], &t.magnitudes[3]}) {
        double err = 0;
        for (std::size_t i = 0; i < clean.size(); ++i) err += std::pow(m->data()[i] - clean.data()[i], 2);
        EXPECT_LT(err, previous);
        previous = err;
    }
}

TEST(StageTargets, MasksAgreeWithMagnitudes) {
    const auto pair = small_pair(9);
    auto t = build_stage_targets(pair, StagePlan::standard(3, TargetKind::Iam));
    ASSERT_EQ(t.masks.size(), 3u);
    for (std::size_t q = 0; q < 3; ++q)
        for (std::size_t i = 0; i < t.noisy_mag.size(); ++i) {
            const double x = t.noisy_mag.data()[i], s = t.magnitudes[q].data()[i];
            EXPECT_NEAR(x * t.masks[q].data()[i], std::min(s, x), 4 * std::numeric_limits<double>::epsilon() * x);
        }
}

TEST(TotalLoss, AlphaWeightedHandArithmetic) {
    auto plan = StagePlan::standard(3, TargetKind::Tms);
    EXPECT_NEAR(combine_stage_losses({1, 1, 1}, plan), 1.2, 1e-15);
    EXPECT_NEAR(combine_stage_losses({0.5, 2, 0.25}, plan), 0.05 + 0.2 + 0.25, 1e-15);
}

TEST(TotalLoss, IdealOutputsAndStageCountMismatch) {
    const auto pair = small_pair(10);
    for (auto kind : {TargetKind::Tms, TargetKind::Iam}) {
        auto plan = StagePlan::standard(3, kind);
        auto st = build_stage_targets(pair, plan);
        auto batch = collate<double>({&st});
        std::vector<Tensor<double>> outputs;
        for (std::size_t q = 0; q < 3; ++q) {
            const auto& src = kind == TargetKind::Tms ? st.magnitudes[q] : st.masks[q];
            outputs.push_back(ad::reshape(src, {1, src.dim(0), src.dim(1)}));
        }
        std::vector<double> per_stage;
        const double loss = total_loss(outputs, batch, plan, &per_stage).item();
        ASSERT_EQ(per_stage.size(), 3u);
        if (kind == TargetKind::Tms) {
            EXPECT_EQ(loss, 0.0);
        } else {
            // The ideal mask is clipped at 1, so only cells with |S| > |X| remain:
            // L_q = mean((|S_q| - min(|S_q|, |X|))^2).
            for (std::size_t q = 0; q < 3; ++q) {
                double want = 0;
                for (std::size_t i = 0; i < st.noisy_mag.size(); ++i) {
                    const double sq = st.magnitudes[q].data()[i], x = st.noisy_mag.data()[i];
                    want += std::pow(sq - std::min(sq, x), 2);
                }
                want /= double(st.noisy_mag.size());
                EXPECT_NEAR(per_stage[q], want, 1e-12 * (want + 1e-30));
            }
        }
        outputs.pop_back();
        EXPECT_THROW(total_loss(outputs, batch, plan), ContractError);
    }
}

TEST(TotalLoss, RandomCaseEqualsHandSum) {
    const auto pair = small_pair(11);
    auto plan = StagePlan::standard(3, TargetKind::Tms);
    auto st = build_stage_targets(pair, plan);
    auto batch = collate<double>({&st});
    const std::size_t T = st.noisy_mag.dim(0);
    std::vector<Tensor<double>> outputs;
    double want = 0;
    for (std::size_t q = 0; q < 3; ++q) {
        outputs.push_back(random_tensor({1, T, 161}, 20 + q));
        double l = 0;
        for (std::size_t i = 0; i < T * 161; ++i) l += std::pow(outputs[q].data()[i] - st.magnitudes[q].data()[i], 2);
        want += plan.alphas[q] * l / double(T * 161);
    }
    EXPECT_NEAR(total_loss(outputs, batch, plan).item(), want, 1e-12 * want);
}

TEST(TotalLoss, PaddingDoesNotChangeUtteranceContributions) {
    // Batched loss equals the mean of each utterance's own unpadded loss.
    auto plan = StagePlan::standard(2, TargetKind::Iam);
    auto a = build_stage_targets(small_pair(12), plan);
    audio::SynthOptions opt;
    opt.min_duration_s = 0.8;
    opt.max_duration_s = 0.9;
    auto b = build_stage_targets(audio::synth_corpus(1, 13, opt)[0].pair, plan);
    ASSERT_NE(a.noisy_mag.dim(0), b.noisy_mag.dim(0));
    auto both = collate<double>({&a, &b});
    const std::size_t T = both.noisy_mag.dim(1);
    EXPECT_EQ(T, std::max(a.noisy_mag.dim(0), b.noisy_mag.dim(0)));

    std::vector<Tensor<double>> out_both;
    std::vector<Tensor<double>> out_a, out_b;
    for (std::size_t q = 0; q < 2; ++q) {
        auto o = random_tensor({2, T, 161}, 30 + q);
        out_both.push_back(o);
        out_a.push_back(ad::slice(ad::slice(o, 0, 0, 1), 1, 0, a.noisy_mag.dim(0)));
        out_b.push_back(ad::slice(ad::slice(o, 0, 1, 2), 1, 0, b.noisy_mag.dim(0)));
    }
    const double la = total_loss(out_a, collate<double>({&a}), plan).item();
    const double lb = total_loss(out_b, collate<double>({&b}), plan).item();
    EXPECT_NEAR(total_loss(out_both, both, plan).item(), 0.5 * (la + lb), 1e-12);
}

TEST(TotalLoss, GradientThroughSaLossAndWeights) {
    auto plan = StagePlan::standard(3, TargetKind::Iam);
    auto st = build_stage_targets(small_pair(14), plan);
    auto batch = collate<double>({&st});
    const std::size_t T = st.noisy_mag.dim(0);
    std::vector<Tensor<double>> outputs;
    for (std::size_t q = 0; q < 3; ++q) outputs.push_back(random_tensor({1, T, 161}, 40 + q, 0, 1, true));
    // The loss is quadratic in the outputs, so a large step has no truncation
    // error and keeps roundoff far below the smallest gradient entries.
    auto r = ad::gradient_check([&] { return total_loss(outputs, batch, plan); }, outputs, 1e-2, 7);
    EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(Collate, MaskAndWeights) {
    auto plan = StagePlan::standard(2, TargetKind::Tms);
    auto a = build_stage_targets(small_pair(15), plan);
    auto b = a;
    auto batch = collate<double>({&a, &b});
    EXPECT_EQ(batch.lengths, (std::vector<std::size_t>{a.noisy_mag.dim(0), a.noisy_mag.dim(0)}));
    for (auto v : batch.mask.valid) EXPECT_EQ(v, 1);
    double total = 0;
    for (double w : batch.frame_weight) total += w * 161;
    EXPECT_NEAR(total, 1.0, 1e-12);
}
