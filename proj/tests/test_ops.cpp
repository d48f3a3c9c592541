#include <gtest/gtest.h>

#include <algorithm>

#include "gradcheck.hpp"
#include "vcqe/ops.hpp"

using namespace vcqe;
using vcqe::testing::grad_check;
using vcqe::testing::random_tensor;

namespace {

Var<double> leaf(Tensor<double> t) { return Var<double>(std::move(t), true); }

}  // namespace

TEST(Conv2d, ShapeContracts) {
    Rng rng(1);
    // full-scale branch: 7x7 stride 1 keeps 256x256, 64 channels out
    {
        Var<float> x(random_tensor<float>({256, 256, 3}, rng));
        Var<float> w(random_tensor<float>({7, 7, 3, 64}, rng, -0.05, 0.05));
        Var<float> b(Tensor<float>({64}));
        auto y = conv2d(x, w, b, 1);
        EXPECT_EQ(y.value().dims(), (std::vector<int>{256, 256, 64}));
    }
    // 1/16-area branch: 3x3 stride 4
    {
        Var<float> x(random_tensor<float>({256, 256, 3}, rng));
        Var<float> w(random_tensor<float>({3, 3, 3, 64}, rng, -0.05, 0.05));
        Var<float> b(Tensor<float>({64}));
        auto y = conv2d(x, w, b, 4);
        EXPECT_EQ(y.value().dims(), (std::vector<int>{64, 64, 64}));
    }
}

TEST(Conv2d, IdentityKernel) {
    Rng rng(2);
    Var<double> x(random_tensor<double>({6, 5, 3}, rng));
    Tensor<double> w({3, 3, 3, 3});
    for (int c = 0; c < 3; ++c) w.at4(1, 1, c, c) = 1.0;
    auto y = conv2d(x, leaf(std::move(w)), Var<double>(Tensor<double>({3})), 1);
    for (std::int64_t i = 0; i < x.numel(); ++i) EXPECT_DOUBLE_EQ(y.value()[i], x.value()[i]);
}

TEST(Conv2d, ChannelMismatchThrows) {
    Rng rng(3);
    Var<double> x(random_tensor<double>({4, 4, 2}, rng));
    Var<double> w(random_tensor<double>({3, 3, 3, 4}, rng));
    EXPECT_THROW(conv2d(x, w, Var<double>(Tensor<double>({4})), 1), std::runtime_error);
}

TEST(Conv2d, Linearity) {
    Rng rng(4);
    Var<double> w(random_tensor<double>({3, 3, 2, 3}, rng, -1, 1));
    Var<double> b;  // no bias
    Tensor<double> xa = random_tensor<double>({6, 6, 2}, rng, -1, 1);
    Tensor<double> xb = random_tensor<double>({6, 6, 2}, rng, -1, 1);
    const double a = 1.7, c = -0.4;
    Tensor<double> mix({6, 6, 2});
    for (std::int64_t i = 0; i < mix.numel(); ++i) mix[i] = a * xa[i] + c * xb[i];
    auto ya = conv2d(Var<double>(xa), w, b, 2);
    auto yb = conv2d(Var<double>(xb), w, b, 2);
    auto ym = conv2d(Var<double>(mix), w, b, 2);
    for (std::int64_t i = 0; i < ym.numel(); ++i)
        EXPECT_NEAR(ym.value()[i], a * ya.value()[i] + c * yb.value()[i], 1e-12);
}

TEST(Conv2d, GradCheck) {
    Rng rng(5);
    for (auto [k, s] : {std::pair{3, 1}, {5, 2}, {3, 4}, {7, 1}}) {
        Var<double> x = leaf(random_tensor<double>({8, 8, 3}, rng, -1, 1));
        Var<double> w = leaf(random_tensor<double>({k, k, 3, 4}, rng, -1, 1));
        Var<double> b = leaf(random_tensor<double>({4}, rng, -1, 1));
        auto fn = [&] { return sum(mul_scalar(mse_mean(conv2d(x, w, b, s), Var<double>(Tensor<double>({(8 - 1) / s + 1, (8 - 1) / s + 1, 4}, 0.3))), 1.0)); };
        auto res = grad_check<double>(fn, {{"x", x}, {"w", w}, {"b", b}}, 1e-5);
        EXPECT_LE(res.max_rel, 1e-3) << "k=" << k << " s=" << s << " worst leaf " << res.worst_leaf
                                     << " analytic " << res.worst_analytic << " fd " << res.worst_fd;
    }
}

TEST(ConvTranspose2d, ShapeContracts) {
    Rng rng(6);
    {
        Var<float> x(random_tensor<float>({64, 64, 64}, rng));
        Var<float> w(random_tensor<float>({4, 4, 64, 64}, rng, -0.02, 0.02));
        auto y = conv_transpose2d(x, w, Var<float>(Tensor<float>({64})), 2);
        EXPECT_EQ(y.value().dims(), (std::vector<int>{128, 128, 64}));
    }
    {
        Var<float> x(random_tensor<float>({64, 64, 16}, rng));
        Var<float> w(random_tensor<float>({8, 8, 16, 16}, rng, -0.02, 0.02));
        auto y = conv_transpose2d(x, w, Var<float>(Tensor<float>({16})), 4);
        EXPECT_EQ(y.value().dims(), (std::vector<int>{256, 256, 16}));
    }
}

TEST(ConvTranspose2d, ZeroWeightsGiveZeroOutput) {
    Rng rng(7);
    Var<double> x(random_tensor<double>({5, 5, 2}, rng));
    Var<double> w(Tensor<double>({4, 4, 2, 3}));
    auto y = conv_transpose2d(x, w, Var<double>(Tensor<double>({3})), 2);
    for (std::int64_t i = 0; i < y.numel(); ++i) EXPECT_EQ(y.value()[i], 0.0);
}

TEST(ConvTranspose2d, BadArithmeticThrows) {
    Rng rng(8);
    Var<double> x(random_tensor<double>({5, 5, 2}, rng));
    Var<double> w(random_tensor<double>({3, 3, 2, 3}, rng));  // k - s odd
    EXPECT_THROW(conv_transpose2d(x, w, Var<double>(Tensor<double>({3})), 2), std::runtime_error);
}

TEST(ConvTranspose2d, GradCheck) {
    Rng rng(9);
    for (auto [k, s] : {std::pair{4, 2}, {8, 4}, {2, 2}}) {
        Var<double> x = leaf(random_tensor<double>({4, 5, 3}, rng, -1, 1));
        Var<double> w = leaf(random_tensor<double>({k, k, 3, 2}, rng, -1, 1));
        Var<double> b = leaf(random_tensor<double>({2}, rng, -1, 1));
        auto fn = [&] { return sum(conv_transpose2d(x, w, b, s)); };
        auto res = grad_check<double>(fn, {{"x", x}, {"w", w}, {"b", b}}, 1e-5);
        EXPECT_LE(res.max_rel, 1e-3) << "k=" << k << " s=" << s;
    }
}

TEST(PixelShuffle, EnumeratedPermutation) {
    // 2x2x4 -> 4x4x1 against the sub-pixel layout computed by brute force
    Tensor<double> in({2, 2, 4});
    for (std::int64_t i = 0; i < 16; ++i) in[i] = static_cast<double>(i);
    auto out = pixel_shuffle(Var<double>(in), 2);
    ASSERT_EQ(out.value().dims(), (std::vector<int>{4, 4, 1}));
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            const int ys = y / 2, xs = x / 2, dy = y % 2, dx = x % 2;
            const double expect = in.at3(ys, xs, dy * 2 + dx);
            EXPECT_EQ(out.value().at3(y, x, 0), expect) << y << "," << x;
        }
}

TEST(PixelShuffle, FactorOneIsIdentity) {
    Rng rng(10);
    Tensor<double> in = random_tensor<double>({3, 4, 5}, rng);
    auto out = pixel_shuffle(Var<double>(in), 1);
    for (std::int64_t i = 0; i < in.numel(); ++i) EXPECT_EQ(out.value()[i], in[i]);
}

TEST(PixelShuffle, PreservesMultiset) {
    Rng rng(11);
    Tensor<double> in = random_tensor<double>({4, 6, 18}, rng);
    auto out = pixel_shuffle(Var<double>(in), 3);
    std::vector<double> a(in.data(), in.data() + in.numel());
    std::vector<double> b(out.value().data(), out.value().data() + out.value().numel());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
}

TEST(PixelShuffle, DivisibilityError) {
    Tensor<double> in({2, 2, 3});
    EXPECT_THROW(pixel_shuffle(Var<double>(in), 2), std::runtime_error);
}

TEST(PixelShuffle, GradCheck) {
    Rng rng(12);
    Var<double> x = leaf(random_tensor<double>({3, 3, 8}, rng, -1, 1));
    auto fn = [&] { return mse_mean(pixel_shuffle(x, 2), Var<double>(Tensor<double>({6, 6, 2}, 0.25))); };
    auto res = grad_check<double>(fn, {{"x", x}}, 1e-5);
    EXPECT_LE(res.max_rel, 1e-3);
}

TEST(BatchNorm, EvalModeIdentityWithUnitStats) {
    Rng rng(13);
    Tensor<double> x = random_tensor<double>({5, 5, 3}, rng);
    Var<double> gamma(Tensor<double>({3}, 1.0)), beta(Tensor<double>({3}));
    Tensor<double> rm({3}), rv({3}, 1.0);
    auto y = batch_norm(Var<double>(x), gamma, beta, rm, rv, false);
    for (std::int64_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(y.value()[i], x[i], 1e-4);
}

TEST(BatchNorm, TrainConstantInputGivesBias) {
    Tensor<double> x({4, 4, 2}, 0.7);
    Var<double> gamma(Tensor<double>({2}, 1.5)), beta(Tensor<double>({2}, 0.25));
    Tensor<double> rm({2}), rv({2}, 1.0);
    auto y = batch_norm(Var<double>(x), gamma, beta, rm, rv, true);
    for (std::int64_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(y.value()[i], 0.25, 1e-9);
}

TEST(BatchNorm, TrainOutputStatistics) {
    Rng rng(14);
    Tensor<double> x = random_tensor<double>({8, 8, 3}, rng, -2, 2);
    const double g0 = 1.3, b0 = -0.4;
    Var<double> gamma(Tensor<double>({3}, g0)), beta(Tensor<double>({3}, b0));
    Tensor<double> rm({3}), rv({3}, 1.0);
    auto y = batch_norm(Var<double>(x), gamma, beta, rm, rv, true);
    for (int c = 0; c < 3; ++c) {
        double mean = 0, var = 0;
        for (int i = 0; i < 64; ++i) mean += y.value()[i * 3 + c];
        mean /= 64;
        for (int i = 0; i < 64; ++i) {
            const double d = y.value()[i * 3 + c] - mean;
            var += d * d;
        }
        var /= 64;
        EXPECT_NEAR(mean, b0, 1e-4);
        EXPECT_NEAR(var, g0 * g0, 1e-4);
    }
}

TEST(BatchNorm, RunningStatsUpdateOnlyInTraining) {
    Rng rng(15);
    Tensor<double> x = random_tensor<double>({4, 4, 2}, rng);
    Var<double> gamma(Tensor<double>({2}, 1.0)), beta(Tensor<double>({2}));
    Tensor<double> rm({2}), rv({2}, 1.0);
    batch_norm(Var<double>(x), gamma, beta, rm, rv, false);
    EXPECT_EQ(rm[0], 0.0);
    EXPECT_EQ(rv[0], 1.0);
    batch_norm(Var<double>(x), gamma, beta, rm, rv, true);
    EXPECT_NE(rm[0], 0.0);
}

TEST(BatchNorm, GradCheckTrainAndEval) {
    Rng rng(16);
    for (bool training : {true, false}) {
        Var<double> x = leaf(random_tensor<double>({6, 6, 3}, rng, -1, 1));
        Var<double> gamma = leaf(random_tensor<double>({3}, rng, 0.5, 1.5));
        Var<double> beta = leaf(random_tensor<double>({3}, rng, -0.5, 0.5));
        Tensor<double> rm = random_tensor<double>({3}, rng, -0.2, 0.2);
        Tensor<double> rv = random_tensor<double>({3}, rng, 0.5, 1.5);
        auto fn = [&, training] {
            Tensor<double> rm_copy = rm, rv_copy = rv;
            return mse_mean(batch_norm(x, gamma, beta, rm_copy, rv_copy, training),
                            Var<double>(Tensor<double>({6, 6, 3}, 0.1)));
        };
        auto res = grad_check<double>(fn, {{"x", x}, {"gamma", gamma}, {"beta", beta}}, 1e-5);
        EXPECT_LE(res.max_rel, 1e-3) << (training ? "train" : "eval") << " worst " << res.worst_leaf;
    }
}

TEST(ConcatSlice, RoundTripAndGrads) {
    Rng rng(17);
    Var<double> a = leaf(random_tensor<double>({4, 4, 2}, rng, -1, 1));
    Var<double> b = leaf(random_tensor<double>({4, 4, 3}, rng, -1, 1));
    auto cat = concat_c(a, b);
    ASSERT_EQ(cat.value().dims(), (std::vector<int>{4, 4, 5}));
    auto back = slice_c(cat, 2, 3);
    for (std::int64_t i = 0; i < back.numel(); ++i)
        EXPECT_EQ(back.value()[i], b.value()[i]);

    auto fn = [&] { return mse_mean(slice_c(concat_c(a, b), 1, 3), Var<double>(Tensor<double>({4, 4, 3}, 0.2))); };
    auto res = grad_check<double>(fn, {{"a", a}, {"b", b}}, 1e-5);
    EXPECT_LE(res.max_rel, 1e-3);
}

TEST(PadCrop, InverseAndGrads) {
    Rng rng(18);
    Var<double> x = leaf(random_tensor<double>({5, 7, 2}, rng, -1, 1));
    auto padded = pad_edge(x, 8, 8);
    auto cropped = crop_top_left(padded, 5, 7);
    for (std::int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(cropped.value()[i], x.value()[i]);

    auto fn = [&] { return sum(mse_mean(pad_edge(x, 8, 8), Var<double>(Tensor<double>({8, 8, 2}, 0.4)))); };
    auto res = grad_check<double>(fn, {{"x", x}}, 1e-5);
    EXPECT_LE(res.max_rel, 1e-3);
}

TEST(Losses, HandValuesAndGrads) {
    Tensor<double> a({2, 2, 1});
    Tensor<double> b({2, 2, 1});
    a[0] = 0.2;  // one pixel off by 0.2 -> mse = 0.04/4
    EXPECT_NEAR(mse_mean(Var<double>(a), Var<double>(b)).value()[0], 0.01, 1e-15);
    a[0] = 0.4;  // one pixel off by 0.4 -> mae = 0.4/4
    EXPECT_NEAR(mae_mean(Var<double>(a), Var<double>(b)).value()[0], 0.1, 1e-15);

    Rng rng(19);
    Var<double> x = leaf(random_tensor<double>({3, 3, 2}, rng, -1, 1));
    Var<double> y = leaf(random_tensor<double>({3, 3, 2}, rng, -1, 1));
    auto res = grad_check<double>([&] { return mse_mean(x, y); }, {{"x", x}, {"y", y}}, 1e-6);
    EXPECT_LE(res.max_rel, 1e-3);
    auto res2 = grad_check<double>([&] { return mae_mean(x, y); }, {{"x", x}, {"y", y}}, 1e-6);
    EXPECT_LE(res2.max_rel, 1e-3);
}

TEST(Autodiff, GradAccumulatesAcrossUses) {
    Var<double> x(Tensor<double>({1}, 2.0), true);
    auto y = add(mul_scalar(x, 3.0), mul_scalar(x, 4.0));
    backward(y);
    EXPECT_DOUBLE_EQ(x.grad()[0], 7.0);
}

TEST(Autodiff, DetachBlocksGradient) {
    Var<double> x(Tensor<double>({1}, 2.0), true);
    auto mid = mul_scalar(x, 3.0);
    auto y = mul_scalar(mid.detach(), 5.0);
    backward(y);
    EXPECT_FALSE(x.has_grad());
}
