#include <benchmark/benchmark.h>

#include "genex/greedy.hpp"
#include "genex/partition.hpp"
#include "genex/setfn.hpp"
#include "genex/synthetic.hpp"

using namespace genex;

namespace {

Dataset bucket_data(int size, int n, std::uint64_t seed) {
  synthetic::InformativeSpec spec;
  spec.size = size;
  spec.n = n;
  spec.seed = seed;
  return apply_observation_policy(synthetic::informative_classes(spec).data, 0.1, seed);
}

void BM_HashObserved(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  HyperplaneBank bank = make_bank(n, 8, 1);
  Dataset d = bucket_data(256, n, 2);
  std::size_t i = 0;
  for (auto _ : state) {
    const Instance& inst = d.instances[i++ % d.instances.size()];
    benchmark::DoNotOptimize(hash_observed(bank, inst.features, inst.observed));
  }
}
BENCHMARK(BM_HashObserved)->Arg(30)->Arg(300);

void BM_ClassifierForward(benchmark::State& state) {
  const int n = 30, batch = static_cast<int>(state.range(0));
  Rng rng(3);
  ClassifierParams theta = ClassifierParams::init(n, 32, 4, rng);
  Eigen::MatrixXd inputs = Eigen::MatrixXd::Random(2 * n, batch);
  for (auto _ : state) benchmark::DoNotOptimize(softmax_columns(logits(theta, inputs)));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ClassifierForward)->Arg(1)->Arg(32)->Arg(256);

void BM_GFSweep(benchmark::State& state) {
  const bool batched = state.range(0) == 1;
  auto bucket = std::make_shared<const Dataset>(bucket_data(256, 30, 4));
  ModelPair m = pretrain({32, 16, -1}, *bucket, 2, 5);
  auto est = std::make_shared<UncertaintyEstimator>(UncertaintyEstimator::from_pretrained(m, 16, DeltaMode::monte_carlo));
  GFContext ctx(bucket, m, est, {8, 2, 6, {}});
  const FeatureSet U{4, 11};
  const std::vector<int> candidates = candidate_pool_for_u(*bucket).minus(U).indices();
  for (auto _ : state) {
    if (batched) {
      benchmark::DoNotOptimize(ctx.sweep(U, candidates));
    } else {
      for (int e : candidates) benchmark::DoNotOptimize(ctx.marginal(e, U));
    }
  }
  state.SetLabel(batched ? "batched" : "per_candidate");
}
BENCHMARK(BM_GFSweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
