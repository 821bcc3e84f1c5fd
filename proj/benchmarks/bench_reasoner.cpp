#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "alans/algebra.hpp"
#include "alans/generator.hpp"
#include "alans/perception.hpp"
#include "alans/pipeline.hpp"
#include "alans/reasoner.hpp"

namespace {

using namespace alans;

std::vector<Mat> random_reps(int d, int count, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g;
  std::vector<Mat> out;
  for (int i = 0; i < count; ++i) {
    Mat m(d, d);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = g(rng);
    out.push_back(m);
  }
  return out;
}

void BM_InduceUnary(benchmark::State& state) {
  const auto reps = random_reps(static_cast<int>(state.range(0)), 6, 1);
  for (auto _ : state) benchmark::DoNotOptimize(induce_unary(reps, 1e-3));
}
BENCHMARK(BM_InduceUnary)->Arg(4)->Arg(8)->Arg(16);

void BM_InduceBinary(benchmark::State& state) {
  const auto reps = random_reps(static_cast<int>(state.range(0)), 6, 2);
  for (auto _ : state) benchmark::DoNotOptimize(induce_binary(reps, 1e-3));
}
BENCHMARK(BM_InduceBinary)->Arg(4)->Arg(8)->Arg(16);

void BM_InferNumber(benchmark::State& state) {
  Rng rng(3);
  PanelSpec panel;
  panel.position = 0b101101011;
  const auto regions = perception::corrupt(panel, {0.1, 0.1}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(perception::infer_number(regions));
}
BENCHMARK(BM_InferNumber);

struct Fixture {
  RpmInstance inst;
  perception::InstanceBeliefs beliefs;
  Model model;

  Fixture(ModelKind kind, int d) {
    Rng rng(4);
    const RuleSet rules = sample_ruleset({Regime::Systematicity, Phase::Train}, rng);
    inst = generate_instance(rules, DistractorStrategy::PerturbOne, rng);
    beliefs = perception::perceive(inst, {0.1, 0.1}, rng);
    model = init_model(kind, d, rng);
  }
};

void BM_AnswerDistribution(benchmark::State& state) {
  const Fixture f(ModelKind::Alans, static_cast<int>(state.range(0)));
  const ReasonerConfig config;
  for (auto _ : state) benchmark::DoNotOptimize(answer_distribution(f.beliefs, f.model, config));
}
BENCHMARK(BM_AnswerDistribution)->Arg(4)->Arg(8);

void BM_ForwardBackward(benchmark::State& state) {
  const Fixture f(ModelKind::Alans, static_cast<int>(state.range(0)));
  const ReasonerConfig config;
  const LossWeights weights = LossWeights::joint(0.1);
  for (auto _ : state) {
    ForwardPass pass = forward_loss(f.inst, f.beliefs, f.model, config, weights);
    benchmark::DoNotOptimize(backward(pass));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_GenerateInstance(benchmark::State& state) {
  std::uint64_t i = 0;
  for (auto _ : state) {
    Rng rng(derive_seed(5, Regime::Systematicity, Phase::Train, i++));
    const RuleSet rules = sample_ruleset({Regime::Systematicity, Phase::Train}, rng);
    benchmark::DoNotOptimize(generate_instance(rules, DistractorStrategy::PerturbOne, rng));
  }
}
BENCHMARK(BM_GenerateInstance);

}  // namespace

BENCHMARK_MAIN();
