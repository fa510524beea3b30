#include <benchmark/benchmark.h>

#include "gazelab/attack.hpp"
#include "gazelab/losses.hpp"
#include "gazelab/model.hpp"
#include "gazelab/rng.hpp"

using namespace gazelab;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo, double hi, bool grad = false) {
    std::vector<double> d(numel(shape));
    for (double& v : d) v = rng.uniform(lo, hi);
    return Tensor::from_data(std::move(shape), std::move(d), grad);
}

void BM_Conv2dForward(benchmark::State& state) {
    Rng rng(1);
    Tensor x = random_tensor(rng, {1, 48, 48}, 0, 1);
    Tensor k = random_tensor(rng, {4, 1, 5, 5}, -1, 1);
    Tensor b = random_tensor(rng, {4}, -1, 1);
    for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, k, b));
}
BENCHMARK(BM_Conv2dForward);

void BM_Conv2dBackward(benchmark::State& state) {
    Rng rng(1);
    for (auto _ : state) {
        Tensor x = random_tensor(rng, {1, 48, 48}, 0, 1, true);
        Tensor k = random_tensor(rng, {4, 1, 5, 5}, -1, 1, true);
        Tensor b = random_tensor(rng, {4}, -1, 1, true);
        sum(square(conv2d(x, k, b))).backward();
        benchmark::DoNotOptimize(x.grad().data());
    }
}
BENCHMARK(BM_Conv2dBackward);

void BM_TvLoss(benchmark::State& state) {
    Rng rng(2);
    Tensor img = random_tensor(rng, {48, 48}, 0, 255);
    for (auto _ : state) benchmark::DoNotOptimize(tv_loss(img).item());
}
BENCHMARK(BM_TvLoss);

void BM_ModelForward(benchmark::State& state) {
    GazeModel model = GazeModel::create(ModelKind::single_input_cnn, 1);
    Sample s = render_sample(derive_style(7, 0), GazeLabel::from_pitchyaw(0.2, -0.3), 0);
    auto inputs = model.inputs_from_sample(s);
    for (auto _ : state) benchmark::DoNotOptimize(model.forward(inputs)[0].data().data());
}
BENCHMARK(BM_ModelForward);

void BM_AttackStep(benchmark::State& state) {
    GazeModel model = GazeModel::create(ModelKind::single_input_cnn, 1);
    Sample s = render_sample(derive_style(7, 0), GazeLabel::from_pitchyaw(0.2, -0.3), 0);
    auto inputs = model.inputs_from_sample(s);
    AttackConfig cfg;
    cfg.epsilon = 8.0;
    cfg.alpha = 1.0;
    cfg.n_iters = 1;  // one forward/backward/step round plus the final eval
    cfg.target = quadrant_target(1);
    for (auto _ : state)
        benchmark::DoNotOptimize(attack(model, inputs, s.label, cfg).best_iter);
}
BENCHMARK(BM_AttackStep);

}  // namespace

BENCHMARK_MAIN();
