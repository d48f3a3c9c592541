#include <gtest/gtest.h>

#include "vcqe/autodiff.hpp"
#include "vcqe/rng.hpp"
#include "vcqe/tensor.hpp"

using namespace vcqe;

TEST(Tensor, BasicIndexing) {
    Tensor<float> t({2, 3, 4});
    EXPECT_EQ(t.numel(), 24);
    t.at3(1, 2, 3) = 7.0f;
    EXPECT_FLOAT_EQ(t[23], 7.0f);
    Tensor<float> w({2, 2, 3, 5});
    w.at4(1, 1, 2, 4) = 1.0f;
    EXPECT_FLOAT_EQ(w[w.numel() - 1], 1.0f);
}

TEST(Tensor, FiniteCheck) {
    Tensor<double> t({2, 2, 1}, 0.5);
    EXPECT_TRUE(t.all_finite());
    t[1] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_FALSE(t.all_finite());
}

TEST(Rng, DeterministicAndSerializable) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.uniform(), b.uniform());
    a.normal();  // prime the box-muller cache
    std::string state = a.serialize();
    Rng c = Rng::deserialize(state);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.normal(), c.normal());
}

TEST(Rng, UniformIntRange) {
    Rng r(7);
    for (int i = 0; i < 1000; ++i) {
        int v = r.uniform_int(193);
        EXPECT_GE(v, 0);
        EXPECT_LT(v, 193);
    }
    EXPECT_THROW(r.uniform_int(0), std::invalid_argument);
}

TEST(Autodiff, LeafAndDetach) {
    Var<double> x(Tensor<double>({2, 1, 1}, 3.0), true);
    Var<double> d = x.detach();
    EXPECT_FALSE(d.requires_grad());
    EXPECT_EQ(d.value()[0], 3.0);
}

TEST(Autodiff, NoGradSkipsGraph) {
    Var<double> x(Tensor<double>({1}, 2.0), true);
    NoGradGuard ng;
    Var<double> y(x.value(), true);
    EXPECT_FALSE(y.requires_grad());
}
