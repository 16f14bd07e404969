#include <benchmark/benchmark.h>

#include <vector>

#include "hipt/env/episode.hpp"
#include "hipt/env/layout.hpp"
#include "hipt/env/observation.hpp"
#include "hipt/hipt/agent.hpp"
#include "hipt/hipt/influence.hpp"
#include "hipt/nn/network.hpp"
#include "hipt/population/diversity.hpp"
#include "hipt/rl/ppo.hpp"
#include "hipt/util/rng.hpp"

using namespace hipt;

namespace {

void BM_EnvStep(benchmark::State& st) {
  const auto layout = env::bundled_layout("counter_circuit");
  Rng rng(1);
  auto s = env::reset(layout);
  const auto shaping = env::default_shaping(layout);
  for (auto _ : st) {
    const env::JointAction a{static_cast<env::Action>(rng.uniform_int(0, 5)),
                             static_cast<env::Action>(rng.uniform_int(0, 5))};
    auto out = env::step(s, a, layout, shaping);
    s = out.next_state.tick >= env::kDefaultHorizon ? env::reset(layout) : std::move(out.next_state);
    benchmark::DoNotOptimize(s);
  }
  st.SetItemsProcessed(st.iterations());
}
BENCHMARK(BM_EnvStep);

void BM_Observation(benchmark::State& st) {
  const auto layout = env::bundled_layout("counter_circuit");
  const auto s = env::reset(layout);
  std::vector<double> buf(static_cast<std::size_t>(env::observation_size(layout)));
  for (auto _ : st) {
    env::encode_observation(s, layout, 0, buf.data());
    benchmark::DoNotOptimize(buf.data());
  }
}
BENCHMARK(BM_Observation);

// Single-column forward pass: the per-tick inference cost of a live session.
// Args: trunk width, recurrent width, priors.
void BM_ForwardSingle(benchmark::State& st) {
  const auto layout = env::bundled_layout("counter_circuit");
  nn::NetworkSpec spec;
  spec.input_dim = env::observation_size(layout);
  spec.trunk_widths = {static_cast<int>(st.range(0)), static_cast<int>(st.range(0))};
  spec.recurrent_hidden = static_cast<int>(st.range(1));
  spec.num_priors = static_cast<int>(st.range(2));
  const nn::Network net(spec);
  const auto params = net.init_params(3);
  const auto obs = env::encode_observation(env::reset(layout), layout, 0);
  const nn::Matrix input = Eigen::Map<const nn::Matrix>(obs.data(), spec.input_dim, 1);
  nn::Matrix hidden = net.initial_hidden(1);
  for (auto _ : st) {
    auto out = net.forward(params, input, hidden);
    if (spec.recurrent()) hidden = out.hidden;
    benchmark::DoNotOptimize(out.low_logits.data());
  }
}
BENCHMARK(BM_ForwardSingle)->Args({64, 0, 1})->Args({64, 0, 4})->Args({128, 64, 6})->Unit(benchmark::kMicrosecond);

void BM_HiptPolicyAct(benchmark::State& st) {
  const auto layout = env::bundled_layout("cramped_room");
  nn::NetworkSpec spec;
  spec.input_dim = env::observation_size(layout);
  spec.num_priors = 4;
  hierarchy::HiptPolicy policy(hierarchy::HiptAgent{nn::Network(spec).init_params(5), 20, 40});
  policy.reset(1);
  const auto s = env::reset(layout);
  for (auto _ : st) benchmark::DoNotOptimize(policy.act(s, layout, 1));
}
BENCHMARK(BM_HiptPolicyAct)->Unit(benchmark::kMicrosecond);

void BM_InfluenceReward(benchmark::State& st) {
  const int z = static_cast<int>(st.range(0));
  Rng rng(2);
  nn::Vector high(z);
  nn::Matrix low(env::kNumActions, z);
  for (int i = 0; i < z; ++i) high(i) = rng.uniform() + 0.1;
  high /= high.sum();
  for (int c = 0; c < z; ++c) {
    for (int a = 0; a < env::kNumActions; ++a) low(a, c) = rng.uniform() + 0.05;
    low.col(c) /= low.col(c).sum();
  }
  for (auto _ : st) benchmark::DoNotOptimize(hierarchy::influence_reward(high, low, 1));
}
BENCHMARK(BM_InfluenceReward)->Arg(4)->Arg(6);

void BM_Gae(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  Rng rng(4);
  std::vector<double> r(n), v(n);
  std::vector<std::uint8_t> d(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = rng.normal();
    v[i] = rng.normal();
  }
  d.back() = 1;
  for (auto _ : st) benchmark::DoNotOptimize(rl::compute_gae(r, v, d, 0.0, 0.99, 0.95));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Gae)->Arg(400)->Arg(3200);

void BM_JsdTerm(benchmark::State& st) {
  const int members = static_cast<int>(st.range(0));
  const int batch = 512;
  Rng rng(6);
  std::vector<nn::Matrix> dists;
  for (int m = 0; m < members; ++m) {
    nn::Matrix p(env::kNumActions, batch);
    for (int c = 0; c < batch; ++c) {
      for (int a = 0; a < env::kNumActions; ++a) p(a, c) = rng.uniform() + 1e-3;
      p.col(c) /= p.col(c).sum();
    }
    dists.push_back(std::move(p));
  }
  for (auto _ : st) benchmark::DoNotOptimize(population::jsd_term(dists));
}
BENCHMARK(BM_JsdTerm)->Arg(4)->Arg(8);

}  // namespace

BENCHMARK_MAIN();
