#include <benchmark/benchmark.h>

#include <vector>

#include "ivnmix/dimm.hpp"
#include "ivnmix/em.hpp"
#include "ivnmix/exact_recovery.hpp"
#include "ivnmix/harness.hpp"
#include "ivnmix/marginals.hpp"
#include "ivnmix/mixture.hpp"
#include "ivnmix/model_io.hpp"

using namespace ivnmix;

namespace {

const CausalNetwork& alarm() {
  static const CausalNetwork net = load_network(IVNMIX_BENCH_DATA "/alarm.bif");
  return net;
}

OracleBundle alarm_bundle(std::size_t n_ivn) {
  OracleBundle bundle = build_oracle_bundle(alarm());
  bundle.mix = mixture_marginals_exact(bundle, generate_instance(alarm(), n_ivn, 1).truth);
  return bundle;
}

void BM_ParseAlarm(benchmark::State& state) {
  const std::string text = read_text_file(IVNMIX_BENCH_DATA "/alarm.bif");
  for (auto _ : state) benchmark::DoNotOptimize(parse_bif(text));
}
BENCHMARK(BM_ParseAlarm)->Unit(benchmark::kMillisecond);

void BM_ExactMarginals(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(exact_marginals(alarm()));
}
BENCHMARK(BM_ExactMarginals)->Unit(benchmark::kMillisecond);

void BM_OracleBundle(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(build_oracle_bundle(alarm()));
}
BENCHMARK(BM_OracleBundle)->Unit(benchmark::kMillisecond);

void BM_SampleMixture(benchmark::State& state) {
  const MixtureSpec truth = generate_instance(alarm(), 5, 1).truth;
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(sample_mixture(alarm(), truth, state.range(0), rng));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SampleMixture)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_ExactRecovery(benchmark::State& state) {
  const OracleBundle bundle = alarm_bundle(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(recover_all(bundle));
}
BENCHMARK(BM_ExactRecovery)->Arg(5)->Arg(68)->Unit(benchmark::kMicrosecond);

void BM_Objective(benchmark::State& state) {
  const OptProblem prob = build_opt_problem(alarm_bundle(5));
  Rng rng(2);
  const std::vector<double> x = random_start(prob, rng);
  for (auto _ : state) benchmark::DoNotOptimize(objective(prob, x));
}
BENCHMARK(BM_Objective)->Unit(benchmark::kMicrosecond);

void BM_DimmSingleStart(benchmark::State& state) {
  const OptProblem prob = build_opt_problem(alarm_bundle(state.range(0)));
  Rng rng(3);
  const std::vector<double> x0 = random_start(prob, rng);
  for (auto _ : state) benchmark::DoNotOptimize(solve(prob, x0));
}
BENCHMARK(BM_DimmSingleStart)->Arg(0)->Arg(5)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_EmRun(benchmark::State& state) {
  const MixtureSpec truth = generate_instance(alarm(), 5, 1).truth;
  Rng rng(4);
  const std::vector<Assignment> samples = sample_mixture(alarm(), truth, state.range(0), rng);
  const ComponentLikelihoods lik = component_likelihoods(alarm(), samples);
  Rng init(5);
  const MixtureSpec start = em_initial_spec(lik.layout, 0, init);
  for (auto _ : state) benchmark::DoNotOptimize(run_em(lik, start));
}
BENCHMARK(BM_EmRun)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
