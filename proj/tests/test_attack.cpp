#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "gazelab/attack.hpp"
#include "gazelab/rng.hpp"

using namespace gazelab;

namespace {

// Tiny estimator with 1-3 free pixels: head = W * (x/255) + b, b chosen so the
// output never passes through zero. Small enough to brute-force the whole
// attack lattice.
class PixelEstimator : public Estimator {
public:
    PixelEstimator(std::size_t k, std::vector<double> w, std::array<double, 3> b)
        : k_(k), w_(std::move(w)), b_(b) {}

    std::vector<Tensor> forward(const std::vector<Tensor>& inputs) const override {
        Tensor f = reshape(mul_scalar(flatten(inputs.at(0)), 1.0 / 255.0), {k_, 1});
        Tensor wt = Tensor::from_data({3, k_}, w_);
        Tensor g = reshape(matmul(wt, f), {3});
        return {add(g, Tensor::from_data({3}, {b_[0], b_[1], b_[2]}))};
    }
    std::vector<InputSpec> input_spec() const override { return {{"pix", {1, 1, k_}}}; }
    std::size_t num_heads() const override { return 1; }

private:
    std::size_t k_;
    std::vector<double> w_;
    std::array<double, 3> b_;
};

double objective_at(const PixelEstimator& m, const Shape& shape, const std::vector<double>& x,
                    const GazeLabel& target) {
    auto heads = m.forward({Tensor::from_data(shape, x)});
    return attack_objective(heads, target.vec, {}, 0.0).total.item();
}

}  // namespace

TEST(Attack, DeriveIterationsAnchors) {
    EXPECT_EQ(derive_iterations(8, 1), 16);
    EXPECT_EQ(derive_iterations(64, 0.125), 1024);
    EXPECT_EQ(derive_iterations(1, 4), 4);  // eps/alpha + 4 dominates, rounds to 4
    EXPECT_EQ(derive_iterations(1, 1), 5);
    EXPECT_THROW(derive_iterations(0, 1), contract_error);
    EXPECT_THROW(derive_iterations(8, 0), contract_error);
    EXPECT_THROW(derive_iterations(8, -1), contract_error);
}

TEST(Attack, ClipStepOracle) {
    Tensor orig = Tensor::from_data({5}, {0, 10, 100, 250, 255});
    Tensor cand = Tensor::from_data({5}, {-20, 25, 95, 270, 255});
    Tensor out = clip_step(orig, cand, 8.0);
    // per-element: max(orig-8, min(orig+8, cand)) then [0,255]
    EXPECT_DOUBLE_EQ(out.data()[0], 0.0);
    EXPECT_DOUBLE_EQ(out.data()[1], 18.0);
    EXPECT_DOUBLE_EQ(out.data()[2], 95.0);
    EXPECT_DOUBLE_EQ(out.data()[3], 255.0);
    EXPECT_DOUBLE_EQ(out.data()[4], 255.0);
    EXPECT_THROW(clip_step(orig, Tensor::zeros({4}), 8.0), shape_error);
    EXPECT_THROW(clip_step(orig, cand, -1.0), contract_error);
}

TEST(Attack, ConfigValidation) {
    PixelEstimator m(1, {1, 0, 0.5}, {0.1, 0.1, -2.0});
    std::vector<Tensor> in{Tensor::from_data({1, 1, 1}, {128.0})};
    GazeLabel y = GazeLabel::from_pitchyaw(0, 0);
    AttackConfig cfg;
    cfg.target = quadrant_target(1);

    cfg.epsilon = 0.0;
    EXPECT_THROW(attack(m, in, y, cfg), contract_error);
    cfg.epsilon = 8.0;
    cfg.alpha = 0.0;
    EXPECT_THROW(attack(m, in, y, cfg), contract_error);
    cfg.alpha = 1.0;
    EXPECT_THROW(attack(m, {Tensor::zeros({1, 1, 2})}, y, cfg), shape_error);
    EXPECT_THROW(attack(m, {}, y, cfg), contract_error);

    cfg.region_mask = std::vector<double>{0.5};
    EXPECT_THROW(attack(m, in, y, cfg), contract_error);
    cfg.region_mask = std::vector<double>{1.0, 1.0};
    EXPECT_THROW(attack(m, in, y, cfg), shape_error);

    // alpha larger than epsilon is legal: the step clips to the epsilon ball
    cfg.region_mask.reset();
    cfg.epsilon = 2.0;
    cfg.alpha = 16.0;
    AttackResult r = attack(m, in, y, cfg);
    EXPECT_LE(std::abs(r.x_adv[0].data()[0] - 128.0), 2.0 + 1e-12);
}

TEST(Attack, ConstraintsAndTraceShape) {
    Rng rng(31);
    for (int rep = 0; rep < 10; ++rep) {
        std::size_t k = 3;
        std::vector<double> w(3 * k);
        for (double& v : w) v = rng.uniform(-2.0, 2.0);
        PixelEstimator m(k, w, {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), -6.0});

        std::vector<double> x0(k);
        for (double& v : x0) v = std::floor(rng.uniform(0.0, 256.0));
        std::vector<Tensor> in{Tensor::from_data({1, 1, k}, x0)};
        GazeLabel y = GazeLabel::from_pitchyaw(0.1, -0.1);

        AttackConfig cfg;
        cfg.epsilon = 16.0;
        cfg.alpha = 2.0;
        cfg.target = quadrant_target(1 + static_cast<int>(rng.uniform_int(4)));
        cfg.region_mask = std::vector<double>{1.0, 0.0, 1.0};  // pixel 1 frozen

        AttackResult r = attack(m, in, y, cfg);
        ASSERT_EQ(r.loss_trace.size(),
                  static_cast<std::size_t>(derive_iterations(16.0, 2.0)) + 1);

        // best iterate is the argmin of the trace
        auto mn = std::min_element(r.loss_trace.begin(), r.loss_trace.end());
        EXPECT_EQ(r.best_iter, static_cast<int>(mn - r.loss_trace.begin()));
        EXPECT_LE(r.loss_trace[r.best_iter], r.loss_trace[0]);  // never worse than clean

        auto adv = r.x_adv.at(0).data();
        for (std::size_t j = 0; j < k; ++j) {
            EXPECT_LE(std::abs(adv[j] - x0[j]), cfg.epsilon + 1e-12);
            EXPECT_GE(adv[j], 0.0);
            EXPECT_LE(adv[j], 255.0);
        }
        EXPECT_EQ(adv[1], x0[1]);  // masked pixel bit-exact
    }
}

TEST(Attack, ZeroGradientLeavesInputUnchanged) {
    // constant estimator: gradient is zero everywhere, sign(0) = 0
    class ConstEstimator : public Estimator {
    public:
        std::vector<Tensor> forward(const std::vector<Tensor>& inputs) const override {
            Tensor z = mul_scalar(sum(inputs.at(0)), 0.0);
            return {concat({z, z, add_scalar(z, -1.0)})};
        }
        std::vector<InputSpec> input_spec() const override { return {{"pix", {1, 1, 2}}}; }
        std::size_t num_heads() const override { return 1; }
    };
    ConstEstimator m;
    std::vector<Tensor> in{Tensor::from_data({1, 1, 2}, {100.0, 200.0})};
    AttackConfig cfg;
    cfg.epsilon = 8.0;
    cfg.alpha = 1.0;
    cfg.target = quadrant_target(2);
    AttackResult r = attack(m, in, GazeLabel::from_pitchyaw(0, 0), cfg);
    EXPECT_EQ(r.best_iter, 0);
    EXPECT_EQ(r.x_adv[0].data()[0], 100.0);
    EXPECT_EQ(r.x_adv[0].data()[1], 200.0);
}

// Brute-force oracle: with epsilon = ratio * alpha, every BIM iterate lies on
// the lattice x0 + alpha * {-ratio..ratio} (clipped to [0,255]). The attack's
// best loss must reach the lattice optimum up to the local one-alpha
// variation of the objective around that optimum.
TEST(Attack, BruteForceLatticeOracle) {
    Rng rng(33);
    int instances = 0;
    for (int rep = 0; rep < 50; ++rep) {
        std::size_t k = 1 + rng.uniform_int(3);
        int ratio = 1 + static_cast<int>(rng.uniform_int(2));  // eps/alpha in {1,2}
        double alpha = 2.0 + rng.uniform(0.0, 6.0);
        double eps = ratio * alpha;

        std::vector<double> w(3 * k);
        for (double& v : w) v = rng.uniform(-3.0, 3.0);
        std::array<double, 3> b{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                                -(3.0 + static_cast<double>(k))};
        PixelEstimator m(k, w, b);

        std::vector<double> x0(k);
        for (double& v : x0) v = std::floor(rng.uniform(32.0, 224.0));
        GazeLabel target = quadrant_target(1 + static_cast<int>(rng.uniform_int(4)));

        Shape shape{1, 1, k};
        AttackConfig cfg;
        cfg.epsilon = eps;
        cfg.alpha = alpha;
        cfg.target = target;
        AttackResult r =
            attack(m, {Tensor::from_data(shape, x0)}, GazeLabel::from_pitchyaw(0, 0), cfg);
        double best = *std::min_element(r.loss_trace.begin(), r.loss_trace.end());

        // exhaustive lattice search
        const int side = 2 * ratio + 1;
        std::size_t total = 1;
        for (std::size_t j = 0; j < k; ++j) total *= side;
        double opt = 0.0;
        std::vector<double> opt_x;
        for (std::size_t idx = 0; idx < total; ++idx) {
            std::size_t rem = idx;
            std::vector<double> x(k);
            for (std::size_t j = 0; j < k; ++j) {
                int off = static_cast<int>(rem % side) - ratio;
                rem /= side;
                x[j] = std::clamp(x0[j] + off * alpha, 0.0, 255.0);
            }
            double L = objective_at(m, shape, x, target);
            if (idx == 0 || L < opt) {
                opt = L;
                opt_x = x;
            }
        }

        // one-alpha slack: largest single-coordinate step change at the optimum
        double slack = 0.0;
        for (std::size_t j = 0; j < k; ++j)
            for (double s : {-alpha, alpha}) {
                std::vector<double> x = opt_x;
                x[j] = std::clamp(x[j] + s, 0.0, 255.0);
                slack = std::max(slack, std::abs(objective_at(m, shape, x, target) - opt));
            }

        EXPECT_LE(best, opt + slack + 1e-9)
            << "instance " << rep << ": k=" << k << " ratio=" << ratio << " alpha=" << alpha;
        EXPECT_GE(best, opt - 1e-9) << "attack beat the exhaustive optimum, lattice broken";
        ++instances;
    }
    EXPECT_EQ(instances, 50);
}

TEST(Attack, BatchAttackAggregates) {
    Dataset ds = generate(5, 2, 3);
    auto [train_set, fold] = split_leave_one_person_out(ds, 1);
    GazeModel m = GazeModel::create(ModelKind::single_input_cnn, 3);

    AttackConfig cfg;
    cfg.epsilon = 4.0;
    cfg.alpha = 1.0;
    BatchAttackReport rep = batch_attack(m, fold, {1, 3}, cfg);

    ASSERT_EQ(rep.per_target.size(), 2u);
    EXPECT_EQ(rep.per_target[0].quadrant, 1);
    EXPECT_EQ(rep.per_target[1].quadrant, 3);
    EXPECT_EQ(rep.per_target[0].count, fold.samples.size());
    ASSERT_EQ(rep.results.size(), fold.samples.size() * 2);

    // overall mean equals the mean of per-result values, fixed order
    double acc = 0.0;
    for (const auto& r : rep.results) acc += r.final_target_error_deg;
    EXPECT_NEAR(rep.target_mean, acc / static_cast<double>(rep.results.size()), 1e-9);
    EXPECT_GE(rep.target_std, 0.0);

    BatchAttackReport slim = batch_attack(m, fold, {1, 3}, cfg, false);
    EXPECT_TRUE(slim.results.empty());
    EXPECT_EQ(slim.target_mean, rep.target_mean);

    Dataset empty;
    EXPECT_THROW(batch_attack(m, empty, {1}, cfg), contract_error);
    EXPECT_THROW(batch_attack(m, fold, {}, cfg), contract_error);
}
