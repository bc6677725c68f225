#include <benchmark/benchmark.h>

#include "fedbuff/core.hpp"
#include "fedbuff/event_queue.hpp"
#include "fedbuff/objectives.hpp"
#include "fedbuff/simulator.hpp"

using namespace fedbuff;

namespace {

Problem make_problem(int n, int d) {
  ProblemSpec s;
  s.family = Family::QuadraticMixture;
  s.n = n;
  s.d = d;
  s.scale = 0.1;
  s.points_per_client = 8;
  s.dispersion = 0.5;
  return Problem::generate(s);
}

void BM_StochasticGradient(benchmark::State& state) {
  const Problem p = make_problem(4, static_cast<int>(state.range(0)));
  RngStream rng(1);
  ParamVector w(static_cast<size_t>(state.range(0)), 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(p.stochastic_gradient(0, w, 8, rng));
  }
}
BENCHMARK(BM_StochasticGradient)->Arg(16)->Arg(64)->Arg(256);

void BM_ClientRound(benchmark::State& state) {
  const Problem p = make_problem(4, 64);
  HyperParams hp;
  hp.local_steps_q = state.range(0);
  hp.eta = 0.05;
  hp.batch_size = 8;
  const ParamVector w0(64, 1.0);
  int64_t round = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_client_round(p, 0, w0, 0, hp, 7, round++));
  }
}
BENCHMARK(BM_ClientRound)->Arg(1)->Arg(4)->Arg(16);

void BM_ServerReceive(benchmark::State& state) {
  HyperParams hp;
  hp.buffer_size_k = state.range(0);
  hp.beta = 1.0 / static_cast<double>(state.range(0));
  ServerState srv = ServerState::init(ParamVector(128, 0.0));
  ClientUpdate u{0, ParamVector(128, 1e-6), 0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(server_receive(srv, u, hp));
  }
}
BENCHMARK(BM_ServerReceive)->Arg(1)->Arg(8)->Arg(64);

void BM_EventQueueChurn(benchmark::State& state) {
  RngStream rng(3);
  for (auto _ : state) {
    EventQueue q;
    for (int i = 0; i < state.range(0); ++i) {
      q.push_download(static_cast<double>(rng.uniform_u64(64)), i);
    }
    while (!q.empty()) benchmark::DoNotOptimize(q.pop_next());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EventQueueChurn)->Range(64, 4096)->Complexity();

void BM_UniformArrivalRun(benchmark::State& state) {
  const Problem p = make_problem(8, 16);
  HyperParams hp;
  hp.local_steps_q = 2;
  hp.eta = 0.05;
  hp.beta = 0.5;
  hp.buffer_size_k = 2;
  hp.batch_size = 4;
  SimConfig sim;
  sim.mode = SimMode::UniformArrival;
  sim.horizon_T = state.range(0);
  sim.tau_max = 2;
  uint64_t seed = 0;
  for (auto _ : state) {
    sim.seed = seed++;
    benchmark::DoNotOptimize(run_simulation(p, hp, sim));
  }
}
BENCHMARK(BM_UniformArrivalRun)->Arg(32)->Arg(128);

void BM_EventDrivenRun(benchmark::State& state) {
  const Problem p = make_problem(8, 16);
  HyperParams hp;
  hp.local_steps_q = 2;
  hp.eta = 0.05;
  hp.beta = 0.5;
  hp.buffer_size_k = 2;
  hp.batch_size = 4;
  SimConfig sim;
  sim.mode = SimMode::EventDriven;
  sim.horizon_T = state.range(0);
  sim.tau_max = 1 << 20;
  sim.delay.download = DelaySpec::uniform_int(0, 3);
  sim.delay.upload = DelaySpec::uniform_int(1, 4);
  uint64_t seed = 0;
  for (auto _ : state) {
    sim.seed = seed++;
    benchmark::DoNotOptimize(run_simulation(p, hp, sim));
  }
}
BENCHMARK(BM_EventDrivenRun)->Arg(32)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
