#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "vcqe/warp.hpp"

using namespace vcqe;
using vcqe::testing::random_tensor;

namespace {

// Per-pixel reference warp, written independently of the library path.
Tensor<double> oracle_warp(const Tensor<double>& img, const Tensor<double>& flo) {
    const int h = img.dim(0), w = img.dim(1), c = img.dim(2);
    Tensor<double> out({h, w, c});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double sx = x - flo.at3(y, x, 0);
            double sy = y - flo.at3(y, x, 1);
            if (sx < 0) sx = 0;
            if (sy < 0) sy = 0;
            if (sx > w - 1) sx = w - 1;
            if (sy > h - 1) sy = h - 1;
            const int x0 = static_cast<int>(sx);
            const int y0 = static_cast<int>(sy);
            const double tx = sx - x0;
            const double ty = sy - y0;
            for (int ci = 0; ci < c; ++ci) {
                auto px = [&](int yy, int xx) {
                    if (xx > w - 1) xx = w - 1;
                    if (yy > h - 1) yy = h - 1;
                    return img.at3(yy, xx, ci);
                };
                out.at3(y, x, ci) = (1 - ty) * (1 - tx) * px(y0, x0) + (1 - ty) * tx * px(y0, x0 + 1) +
                                    ty * (1 - tx) * px(y0 + 1, x0) + ty * tx * px(y0 + 1, x0 + 1);
            }
        }
    return out;
}

}  // namespace

TEST(Warp, ZeroFlowIsBitExactIdentity) {
    Rng rng(1);
    Tensor<double> img = random_tensor<double>({9, 7, 3}, rng);
    Tensor<double> flo({9, 7, 2});
    auto out = warp_tensor(img, flo);
    for (std::int64_t i = 0; i < img.numel(); ++i) EXPECT_EQ(out[i], img[i]);
}

TEST(Warp, IntegerShiftMovesPixels) {
    Rng rng(2);
    Tensor<double> img = random_tensor<double>({8, 8, 1}, rng);
    Tensor<double> flo({8, 8, 2});
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) flo.at3(y, x, 0) = 1.0;  // horizontal shift
    auto out = warp_tensor(img, flo);
    for (int y = 0; y < 8; ++y) {
        EXPECT_DOUBLE_EQ(out.at3(y, 0, 0), img.at3(y, 0, 0));  // left column replicates
        for (int x = 1; x < 8; ++x) EXPECT_DOUBLE_EQ(out.at3(y, x, 0), img.at3(y, x - 1, 0));
    }
}

TEST(Warp, HalfPixelShiftAverages) {
    Rng rng(3);
    Tensor<double> img = random_tensor<double>({6, 6, 2}, rng);
    Tensor<double> flo({6, 6, 2});
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) flo.at3(y, x, 0) = 0.5;
    auto out = warp_tensor(img, flo);
    for (int y = 0; y < 6; ++y)
        for (int x = 1; x < 6; ++x)
            for (int c = 0; c < 2; ++c)
                EXPECT_NEAR(out.at3(y, x, c), 0.5 * (img.at3(y, x, c) + img.at3(y, x - 1, c)), 1e-12);
}

TEST(Warp, MatchesBruteForceOracle) {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const int h = 2 + rng.uniform_int(15);
        const int w = 2 + rng.uniform_int(15);
        const int c = 1 + rng.uniform_int(3);
        Tensor<double> img = random_tensor<double>({h, w, c}, rng);
        Tensor<double> flo({h, w, 2});
        for (std::int64_t i = 0; i < flo.numel(); ++i) flo[i] = rng.uniform(-3.0, 3.0);
        auto got = warp_tensor(img, flo);
        auto want = oracle_warp(img, flo);
        for (std::int64_t i = 0; i < got.numel(); ++i) EXPECT_NEAR(got[i], want[i], 1e-6);
    }
}

TEST(Warp, OutputWithinInputRange) {
    Rng rng(5);
    Tensor<double> img = random_tensor<double>({10, 10, 1}, rng, 0.2, 0.9);
    Tensor<double> flo({10, 10, 2});
    for (std::int64_t i = 0; i < flo.numel(); ++i) flo[i] = rng.uniform(-20.0, 20.0);
    auto out = warp_tensor(img, flo);
    double lo = 1e9, hi = -1e9;
    for (std::int64_t i = 0; i < img.numel(); ++i) {
        lo = std::min(lo, img[i]);
        hi = std::max(hi, img[i]);
    }
    for (std::int64_t i = 0; i < out.numel(); ++i) {
        EXPECT_GE(out[i], lo - 1e-12);
        EXPECT_LE(out[i], hi + 1e-12);
    }
}

TEST(Warp, GradientCheckInterior) {
    auto rep = warp_gradient_check(0);
    EXPECT_TRUE(rep.pass) << "max rel " << rep.max_rel << " at " << rep.worst_target << "["
                          << rep.worst_coord << "] analytic " << rep.worst_analytic << " fd "
                          << rep.worst_fd;
    for (std::uint64_t seed : {1u, 2u, 3u}) EXPECT_TRUE(warp_gradient_check(seed).pass);
}

TEST(Warp, FlatImageHasZeroFlowGradient) {
    Tensor<double> img({6, 6, 1}, 0.5);
    Tensor<double> flo({6, 6, 2});
    Var<double> vi(img, true), vf(flo, true);
    backward(sum(warp(vi, vf)));
    ASSERT_TRUE(vf.has_grad());
    for (std::int64_t i = 0; i < vf.grad().numel(); ++i) EXPECT_EQ(vf.grad()[i], 0.0);
}

TEST(Warp, ShapeMismatchThrows) {
    Tensor<double> img({6, 6, 1});
    Tensor<double> flo({5, 6, 2});
    EXPECT_THROW(warp(Var<double>(img), Var<double>(flo)), std::runtime_error);
}
