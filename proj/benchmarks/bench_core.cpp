#include <cmath>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "iiss/comparison.hpp"
#include "iiss/integrator.hpp"
#include "iiss/signals.hpp"
#include "iiss/systems.hpp"

using namespace iiss;

namespace {

void BM_SimulateInverter(benchmark::State& state) {
  const SwitchedSystem sys = make_inverter();
  const SwitchingSignal sigma = sample_signal_set(SignalSetSpec::dwell_time(0.1, 1.0, {1, 2}), 10.0, 1);
  const InputSignal u = InputSignal::sinusoid(Vec::Constant(1, 1.0), 2.0);
  const Vec x0 = Eigen::Vector4d(1.0, -0.5, 0.25, 2.0);
  const double T = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simulate(sys, x0, 0.0, u, sigma, T).x_end());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(T / 1e-3));
}
BENCHMARK(BM_SimulateInverter)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_KLEval(benchmark::State& state) {
  std::vector<double> r_grid, t_grid;
  for (int k = 1; k <= 64; ++k) r_grid.push_back(0.01 * std::pow(1.12, k));
  for (int k = 1; k <= 96; ++k) t_grid.push_back(0.25 * k);
  const KLFn beta = KLFn::sample([](double r, double t) { return r * std::exp(-t); }, r_grid, t_grid);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> R(0.0, 20.0), Tt(0.0, 30.0);
  std::vector<std::pair<double, double>> pts(1024);
  for (auto& p : pts) p = {R(rng), Tt(rng)};
  std::size_t k = 0;
  for (auto _ : state) {
    const auto& p = pts[k++ & 1023];
    benchmark::DoNotOptimize(beta(p.first, p.second));
  }
}
BENCHMARK(BM_KLEval);

void BM_FitKLEnvelope(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<KLSample> samples(static_cast<std::size_t>(state.range(0)));
  for (auto& s : samples) {
    s.r = std::exp(std::log(1e-2) + U(rng) * std::log(1e3));
    s.t = 20.0 * U(rng);
    s.y = s.r * std::exp(-s.t) * (0.5 + U(rng));
  }
  for (auto _ : state) benchmark::DoNotOptimize(fit_kl_envelope(samples, {.pool_ratios = true}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitKLEnvelope)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_EnergyNorm(benchmark::State& state) {
  const MonotoneFn chi = MonotoneFn::sample([](double s) { return s * s; }, MonotoneFn::default_grid());
  const InputSignal u = InputSignal::sinusoid(Vec::Constant(1, 3.0), 5.0);
  for (auto _ : state) benchmark::DoNotOptimize(energy_norm(u, chi, 0.0, 20.0));
}
BENCHMARK(BM_EnergyNorm)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
