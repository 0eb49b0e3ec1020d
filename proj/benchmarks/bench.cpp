#include <vector>

#include <benchmark/benchmark.h>

#include "optopulse/gaussian.hpp"
#include "optopulse/hilbert.hpp"
#include "optopulse/measurement.hpp"
#include "optopulse/pulse_dynamics.hpp"
#include "optopulse/tomography.hpp"

namespace {

using namespace optopulse;

void BM_UpsilonMatrix(benchmark::State& state) {
  const measurement::MeasurementSpec spec{1.5, 0.7};
  const int n_max = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(measurement::upsilon_matrix(spec, 0.8, n_max));
}
BENCHMARK(BM_UpsilonMatrix)->Arg(20)->Arg(40)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_OutcomePdf(benchmark::State& state) {
  const hilbert::FockState cat = hilbert::new_cat(1.5, hilbert::CatAxis::PlusI, 40);
  const measurement::MeasurementSpec spec{2.0, 0.0};
  const UniformGrid p = UniformGrid::centered(20.0, 801);
  for (auto _ : state) benchmark::DoNotOptimize(measurement::outcome_pdf(cat, spec, p, 0.3));
}
BENCHMARK(BM_OutcomePdf)->Unit(benchmark::kMillisecond);

void BM_ReconstructWigner(benchmark::State& state) {
  const hilbert::FockState cat = hilbert::new_cat(1.5, hilbert::CatAxis::PlusI, 40);
  std::vector<hilbert::Marginal> marginals;
  for (double th : tomography::half_period_angles(static_cast<std::size_t>(state.range(0)))) {
    marginals.push_back(hilbert::marginal(cat, th, UniformGrid::centered(8.0, 401)));
  }
  for (auto _ : state) benchmark::DoNotOptimize(tomography::reconstruct_wigner(marginals));
}
BENCHMARK(BM_ReconstructWigner)->Arg(12)->Arg(24)->Arg(48)->Unit(benchmark::kMillisecond);

void BM_ComputeResponse(benchmark::State& state) {
  const UniformGrid t = pulse::default_time_grid(1.0, static_cast<std::size_t>(state.range(0)), 60.0);
  const pulse::PulseSpec p{1.0, 1e-3, 1e6, 1.0, pulse::optimal_drive(1.0, t)};
  for (auto _ : state) benchmark::DoNotOptimize(pulse::compute_response(p));
}
BENCHMARK(BM_ComputeResponse)->Arg(4096)->Arg(16384)->Unit(benchmark::kMillisecond);

void BM_ConditionalUpdate(benchmark::State& state) {
  gaussian::GaussianState g = gaussian::thermal_gaussian(1e4);
  for (auto _ : state) {
    g = gaussian::conditional_update(g, 1.5, 0.0, 0.1);
    g = gaussian::rotate_gaussian(g, 1.5707963267948966);
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK(BM_ConditionalUpdate);

}  // namespace

BENCHMARK_MAIN();
