#include <benchmark/benchmark.h>

#include <random>

#include "convlr/baseline.hpp"
#include "convlr/network.hpp"
#include "convlr/simdata.hpp"

using namespace convlr;

namespace {

void BM_NudftForward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto spokes = static_cast<std::size_t>(state.range(1));
    const NudftOperator op(golden_angle_trajectory(spokes, 2 * n, 0), n, n);
    const auto x = generate_reference_phantom(1, n);
    for (auto _ : state) benchmark::DoNotOptimize(op.forward(x));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(spokes));
}
BENCHMARK(BM_NudftForward)->Args({32, 8})->Args({32, 51})->Args({64, 16});

void BM_NudftAdjoint(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto traj = golden_angle_trajectory(static_cast<std::size_t>(state.range(1)), 2 * n, 0);
    const NudftOperator op(traj, n, n);
    const auto y = op.forward(generate_reference_phantom(2, n));
    for (auto _ : state) benchmark::DoNotOptimize(op.adjoint(y));
}
BENCHMARK(BM_NudftAdjoint)->Args({32, 8})->Args({32, 51});

void BM_Conv2d(benchmark::State& state) {
    const auto c = static_cast<std::size_t>(state.range(0));
    const auto hw = static_cast<std::size_t>(state.range(1));
    std::mt19937_64 rng(3);
    std::normal_distribution<double> d;
    std::vector<double> x(c * hw * hw), w(c * c * 9);
    for (auto& v : x) v = d(rng);
    for (auto& v : w) v = d(rng);
    const auto xt = ad::Tensor::constant({c, hw, hw}, x);
    const auto wt = ad::Tensor::constant({c, c, 3, 3}, w);
    for (auto _ : state) benchmark::DoNotOptimize(ad::conv2d(xt, wt, {}, 1, 1));
}
BENCHMARK(BM_Conv2d)->Args({8, 8})->Args({32, 8})->Args({8, 32});

void BM_StreamFrame(benchmark::State& state) {
    ModelConfig m;
    m.channels = static_cast<std::size_t>(state.range(0));
    m.alpha_scale = calibrate_alpha_scale(m.image_size, 8, 2 * m.image_size);
    const auto params = init_convlr_params(m);
    const auto seq = generate_sequence(5, m.image_size, 1);
    const auto y = nudft_forward(seq.frames[0], golden_angle_trajectory(8, 2 * m.image_size, 0));
    ConvLrStream stream(params, m, {}, seq.reference);
    for (auto _ : state) benchmark::DoNotOptimize(stream.push(y));
}
BENCHMARK(BM_StreamFrame)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_GraspIteration(benchmark::State& state) {
    const auto seq = generate_sequence(6, 32, 5);
    std::vector<KSpaceData> y;
    for (std::size_t t = 0; t < 5; ++t) y.push_back(nudft_forward(seq.frames[t], golden_angle_trajectory(8, 64, 8 * t)));
    GraspConfig cfg;
    cfg.n_iter = 10;
    for (auto _ : state) benchmark::DoNotOptimize(grasp_reconstruct(y, 32, 32, cfg));
}
BENCHMARK(BM_GraspIteration)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
