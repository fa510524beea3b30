#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gazelab/rng.hpp"
#include "gazelab/tensor.hpp"

using namespace gazelab;

namespace {

Tensor random_leaf(Rng& rng, Shape shape, double lo, double hi) {
    std::vector<double> d(numel(shape));
    for (double& v : d) v = rng.uniform(lo, hi);
    return Tensor::from_data(std::move(shape), std::move(d), true);
}

// Reduce any tensor-valued op to a scalar with fixed random weights so the
// finite-difference check exercises every output element.
std::function<Tensor(const Tensor&)> weighted(const std::function<Tensor(const Tensor&)>& op,
                                              Rng& rng, std::size_t out_size) {
    std::vector<double> w(out_size);
    for (double& v : w) v = rng.uniform(-1.0, 1.0);
    Tensor wt = Tensor::from_data({out_size}, std::move(w));
    return [op, wt](const Tensor& x) { return sum(mul(flatten(op(x)), wt)); };
}

}  // namespace

TEST(Tensor, ConstructorsAndAccessors) {
    Tensor z = Tensor::zeros({2, 3});
    EXPECT_EQ(z.size(), 6u);
    EXPECT_EQ(z.rank(), 2u);
    for (double v : z.data()) EXPECT_EQ(v, 0.0);

    Tensor f = Tensor::full({4}, 2.5);
    for (double v : f.data()) EXPECT_EQ(v, 2.5);

    Tensor s = Tensor::scalar(7.0);
    EXPECT_EQ(s.item(), 7.0);

    EXPECT_THROW(Tensor::from_data({2, 2}, {1.0, 2.0, 3.0}), shape_error);
    EXPECT_THROW(f.item(), contract_error);
}

TEST(Tensor, BackwardAccumulatesOnLeavesOnly) {
    Tensor x = Tensor::from_data({2}, {3.0, -1.0}, true);
    Tensor y = sum(square(x));  // dy/dx = 2x
    y.backward();
    EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
    EXPECT_DOUBLE_EQ(x.grad()[1], -2.0);
    // second backward accumulates on the leaf
    y.backward();
    EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
    x.zero_grad();
    y.backward();
    EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Tensor, SharedSubexpressionGradient) {
    Tensor x = Tensor::from_data({1}, {2.0}, true);
    Tensor a = mul(x, x);        // x^2
    Tensor y = sum(add(a, a));   // 2 x^2, dy/dx = 4x = 8
    y.backward();
    EXPECT_DOUBLE_EQ(x.grad()[0], 8.0);
}

TEST(Tensor, DetachDropsHistory) {
    Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
    Tensor d = square(x).detach();
    EXPECT_FALSE(d.requires_grad());
    EXPECT_DOUBLE_EQ(d.data()[1], 4.0);
    Tensor y = sum(mul(d, x));
    y.backward();
    EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);  // d treated as constant
}

TEST(Tensor, ShapeErrors) {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({3, 2});
    EXPECT_THROW(add(a, b), shape_error);
    EXPECT_THROW(mul(a, b), shape_error);
    EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), shape_error);
    EXPECT_THROW(reshape(a, {4}), shape_error);
    EXPECT_THROW(dot(Tensor::zeros({2}), Tensor::zeros({3})), shape_error);
}

TEST(Tensor, MatmulOracle) {
    // 2x3 * 3x2 against hand-computed values.
    Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from_data({3, 2}, {7, 8, 9, 10, 11, 12});
    Tensor c = matmul(a, b);
    ASSERT_EQ(c.shape(), (Shape{2, 2}));
    EXPECT_DOUBLE_EQ(c.data()[0], 58.0);
    EXPECT_DOUBLE_EQ(c.data()[1], 64.0);
    EXPECT_DOUBLE_EQ(c.data()[2], 139.0);
    EXPECT_DOUBLE_EQ(c.data()[3], 154.0);
}

TEST(Tensor, Conv2dBruteForceOracle) {
    Rng rng(11);
    Tensor x = random_leaf(rng, {2, 5, 6}, -1, 1);
    Tensor k = random_leaf(rng, {3, 2, 2, 3}, -1, 1);
    Tensor b = random_leaf(rng, {3}, -1, 1);
    Tensor y = conv2d(x, k, b);
    ASSERT_EQ(y.shape(), (Shape{3, 4, 4}));
    auto xd = x.data(), kd = k.data(), bd = b.data(), yd = y.data();
    for (int oc = 0; oc < 3; ++oc)
        for (int oy = 0; oy < 4; ++oy)
            for (int ox = 0; ox < 4; ++ox) {
                double acc = bd[oc];
                for (int c = 0; c < 2; ++c)
                    for (int ky = 0; ky < 2; ++ky)
                        for (int kx = 0; kx < 3; ++kx)
                            acc += xd[c * 30 + (oy + ky) * 6 + (ox + kx)] *
                                   kd[oc * 12 + c * 6 + ky * 3 + kx];
                EXPECT_NEAR(yd[oc * 16 + oy * 4 + ox], acc, 1e-12);
            }
}

TEST(Tensor, AvgPoolOracle) {
    Tensor x = Tensor::from_data({1, 4, 4},
                                 {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16});
    Tensor y = avg_pool2d(x, 2);
    ASSERT_EQ(y.shape(), (Shape{1, 2, 2}));
    EXPECT_DOUBLE_EQ(y.data()[0], 3.5);
    EXPECT_DOUBLE_EQ(y.data()[1], 5.5);
    EXPECT_DOUBLE_EQ(y.data()[2], 11.5);
    EXPECT_DOUBLE_EQ(y.data()[3], 13.5);
}

TEST(Tensor, SignConvention) {
    std::vector<double> v{-3.0, 0.0, 0.25, -0.0};
    auto s = sign(v);
    EXPECT_DOUBLE_EQ(s[0], -1.0);
    EXPECT_DOUBLE_EQ(s[1], 0.0);
    EXPECT_DOUBLE_EQ(s[2], 1.0);
    EXPECT_DOUBLE_EQ(s[3], 0.0);
}

TEST(Tensor, MaskedOps) {
    Tensor a = Tensor::from_data({4}, {1, 2, 3, 4});
    Tensor m = Tensor::from_data({4}, {0, 1, 0, 1});
    Tensor sel = masked_select(a, m);
    ASSERT_EQ(sel.size(), 2u);
    EXPECT_DOUBLE_EQ(sel.data()[0], 2.0);
    EXPECT_DOUBLE_EQ(sel.data()[1], 4.0);

    Tensor v = Tensor::from_data({4}, {10, 20, 30, 40});
    Tensor asg = masked_assign(a, m, v);
    EXPECT_DOUBLE_EQ(asg.data()[0], 1.0);
    EXPECT_DOUBLE_EQ(asg.data()[1], 20.0);
    EXPECT_DOUBLE_EQ(asg.data()[2], 3.0);
    EXPECT_DOUBLE_EQ(asg.data()[3], 40.0);
}

TEST(Tensor, ConcatAndPick) {
    Tensor a = Tensor::from_data({2}, {1, 2});
    Tensor b = Tensor::from_data({3}, {3, 4, 5});
    Tensor c = concat({a, b});
    ASSERT_EQ(c.shape(), (Shape{5}));
    EXPECT_DOUBLE_EQ(c.data()[4], 5.0);
    EXPECT_DOUBLE_EQ(pick(c, 3).item(), 4.0);
    EXPECT_THROW(pick(c, 5), contract_error);
}

TEST(Tensor, AcosClampKeepsFiniteGradient) {
    // Exactly at the domain edge the clamped gradient must be finite, nonzero.
    Tensor x = Tensor::from_data({1}, {1.0}, true);
    Tensor y = sum(gazelab::acos(x));
    y.backward();
    EXPECT_TRUE(std::isfinite(x.grad()[0]));
    EXPECT_LT(x.grad()[0], 0.0);
    EXPECT_NEAR(y.item(), 0.0, 1e-3);
}

// Finite-difference sweep over every differentiable primitive. Together with
// the objective checks in test_losses this covers well over 100 random
// instances.
TEST(Tensor, FiniteDifferenceAllPrimitives) {
    Rng rng(101);
    const double tol = 1e-4;
    int instances = 0;

    for (int rep = 0; rep < 8; ++rep) {
        Tensor a = random_leaf(rng, {3, 4}, -2, 2);
        Tensor b = random_leaf(rng, {3, 4}, 0.5, 2.0);  // positive: safe divisor
        Rng wrng(rng.next_u64());

        auto check = [&](const std::function<Tensor(const Tensor&)>& f, const Tensor& x) {
            EXPECT_LT(finite_diff_check(f, x, 1e-6), tol);
            ++instances;
        };

        check(weighted([&](const Tensor& x) { return add(x, b); }, wrng, 12), a);
        check(weighted([&](const Tensor& x) { return sub(b, x); }, wrng, 12), a);
        check(weighted([&](const Tensor& x) { return mul(x, b); }, wrng, 12), a);
        check(weighted([&](const Tensor& x) { return gazelab::div(x, b); }, wrng, 12), a);
        check(weighted([&](const Tensor& x) { return gazelab::div(b, add_scalar(square(x), 1.0)); },
                       wrng, 12), a);
        check(weighted([&](const Tensor& x) { return add_scalar(x, 3.0); }, wrng, 12), a);
        check(weighted([&](const Tensor& x) { return mul_scalar(x, -1.7); }, wrng, 12), a);
        check(weighted([&](const Tensor& x) { return neg(x); }, wrng, 12), a);
        check(weighted([&](const Tensor& x) { return reshape(x, {4, 3}); }, wrng, 12), a);
        check(weighted([&](const Tensor& x) { return flatten(x); }, wrng, 12), a);
        check(weighted([&](const Tensor& x) { return concat({flatten(x), flatten(b)}); },
                       wrng, 24), a);
        check([&](const Tensor& x) { return pick(flatten(x), 5); }, a);
        check(weighted([&](const Tensor& x) { return square(x); }, wrng, 12), a);
        check([&](const Tensor& x) { return sum(x); }, a);
        check([&](const Tensor& x) { return mean(x); }, a);
        check([&](const Tensor& x) { return dot(flatten(x), flatten(b)); }, a);
        check(weighted([&](const Tensor& x) { return clamp(x, -1.0, 1.0); }, wrng, 12),
              random_leaf(rng, {3, 4}, -3, 3));
        check([&](const Tensor& x) { return l2_norm(flatten(x)); }, b);
        check(weighted([&](const Tensor& x) { return gazelab::sqrt(x); }, wrng, 12), b);
        check(weighted([&](const Tensor& x) { return gazelab::tanh(x); }, wrng, 12), a);
        // relu is kinked at 0; sample away from it
        check(weighted([&](const Tensor& x) { return relu(x); }, wrng, 12),
              random_leaf(rng, {3, 4}, 0.1, 2.0));

        Tensor inner = random_leaf(rng, {3}, -0.8, 0.8);
        check([&](const Tensor& x) { return sum(gazelab::acos(x)); }, inner);
        check([&](const Tensor& x) { return sum(gazelab::asin(x)); }, inner);
        Tensor yv = random_leaf(rng, {3}, 0.3, 1.0);
        check([&](const Tensor& x) { return sum(atan2(yv, x)); },
              random_leaf(rng, {3}, 0.3, 1.0));
        check([&](const Tensor& x) { return sum(atan2(x, yv)); },
              random_leaf(rng, {3}, 0.3, 1.0));

        Tensor m2 = random_leaf(rng, {4, 2}, -1, 1);
        check(weighted([&](const Tensor& x) { return matmul(x, m2); }, wrng, 6), a);
        check(weighted([&](const Tensor& x) { return matmul(a, x); }, wrng, 6), m2);

        Tensor img = random_leaf(rng, {2, 5, 5}, -1, 1);
        Tensor ker = random_leaf(rng, {2, 2, 3, 3}, -1, 1);
        Tensor bia = random_leaf(rng, {2}, -1, 1);
        check(weighted([&](const Tensor& x) { return conv2d(x, ker, bia); }, wrng, 18), img);
        check(weighted([&](const Tensor& x) { return conv2d(img, x, bia); }, wrng, 18), ker);
        check(weighted([&](const Tensor& x) { return conv2d(img, ker, x); }, wrng, 18), bia);
        Tensor pimg = random_leaf(rng, {1, 4, 4}, -1, 1);
        check(weighted([&](const Tensor& x) { return avg_pool2d(x, 2); }, wrng, 4), pimg);

        Tensor mask = Tensor::from_data({12}, {1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 0, 1});
        check(weighted([&](const Tensor& x) { return masked_select(flatten(x), mask); },
                       wrng, 7), a);
        Tensor vals = random_leaf(rng, {12}, -1, 1);
        check(weighted([&](const Tensor& x) { return masked_assign(flatten(x), mask, vals); },
                       wrng, 12), a);
        check(weighted([&](const Tensor& x) { return masked_assign(flatten(a), mask, x); },
                       wrng, 12), vals);
    }
    EXPECT_GE(instances, 100);
}
