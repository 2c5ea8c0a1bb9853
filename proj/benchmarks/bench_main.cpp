#include <benchmark/benchmark.h>

#include "deepscene/encoders/qnetwork.hpp"
#include "deepscene/rl/trainer.hpp"
#include "deepscene/sim/dataset.hpp"
#include "deepscene/sim/world.hpp"

using namespace deepscene;

namespace {

const std::vector<sim::Transition>& desk_transitions() {
  static const auto transitions = [] {
    sim::CollectConfig c;
    c.scenario = sim::ScenarioConfig::desk_highway();
    c.transitions = 2000;
    c.min_vehicles = 8;
    c.max_vehicles = 16;
    c.seed = 1;
    return sim::collect_transitions(c);
  }();
  return transitions;
}

encoders::EncoderKind kind_arg(const benchmark::State& state) {
  return static_cast<encoders::EncoderKind>(state.range(0));
}

}  // namespace

// Forward and backward of one 64-scene minibatch.
static void BM_ForwardBackward(benchmark::State& state) {
  const auto arch = encoders::ArchitectureConfig::defaults(kind_arg(state));
  const rl::ReplayBuffer buffer(desk_transitions(), arch, {});
  const encoders::QNetwork<float> net(arch, 1);
  std::vector<const encoders::PreparedScene*> scenes;
  for (std::size_t i = 0; i < 64; ++i) scenes.push_back(&buffer.state(i));
  const auto batch = encoders::make_batch<float>(std::span<const encoders::PreparedScene* const>(scenes), arch);
  auto params = net.parameters();
  for (auto _ : state) {
    const auto loss = nn::sum(nn::square(net.forward(batch)));
    benchmark::DoNotOptimize(nn::gradients(loss, std::span<nn::Tensor<float>>(params)));
  }
  state.SetLabel(encoders::to_string(arch.kind));
}
BENCHMARK(BM_ForwardBackward)
    ->Arg(static_cast<int>(encoders::EncoderKind::deepset))
    ->Arg(static_cast<int>(encoders::EncoderKind::gcn))
    ->Arg(static_cast<int>(encoders::EncoderKind::vbin))
    ->Unit(benchmark::kMillisecond);

// Full optimization step: sampling, targets, two Adam updates, soft updates.
static void BM_TrainStep(benchmark::State& state) {
  const auto arch = encoders::ArchitectureConfig::defaults(kind_arg(state));
  const rl::ReplayBuffer buffer(desk_transitions(), arch, {});
  rl::TrainConfig cfg;
  rl::Trainer trainer(arch, cfg, 1);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step(buffer));
  state.SetLabel(encoders::to_string(arch.kind));
}
BENCHMARK(BM_TrainStep)
    ->Arg(static_cast<int>(encoders::EncoderKind::deepset))
    ->Arg(static_cast<int>(encoders::EncoderKind::gcn))
    ->Unit(benchmark::kMillisecond);

// One agent decision (4 simulator ticks) on the full-size highway.
static void BM_SimStep(benchmark::State& state) {
  auto world = sim::spawn_scenario(sim::ScenarioConfig::highway(), static_cast<int>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(world.step(sim::Action::keep));
}
BENCHMARK(BM_SimStep)->Arg(30)->Arg(60)->Arg(90);

static void BM_ExtractFeatures(benchmark::State& state) {
  const auto world = sim::spawn_scenario(sim::ScenarioConfig::fast_lanes(), 60, 3);
  for (auto _ : state) benchmark::DoNotOptimize(sim::extract_features(world));
}
BENCHMARK(BM_ExtractFeatures);
BENCHMARK_MAIN();
