#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "hypar/harmonic_balance.hpp"
#include "hypar/slowflow.hpp"
#include "hypar/spectral.hpp"
#include "hypar/sweep.hpp"
#include "hypar/timedomain.hpp"

using namespace hypar;

namespace {

const CircuitParams kExtinct{0.05, 1.0, 0.03, 0.03, 1.0};
const CircuitParams kActive{0.01, 1.0, 0.0245, 0.05, 1.0};

void BM_Integrate(benchmark::State& state) {
    const DriveSpec d = DriveSpec::single(0.1, 1.02);
    for (auto _ : state) {
        auto tr = integrate(kExtinct, d, {}, static_cast<double>(state.range(0)), 1e-10, 1e-13);
        benchmark::DoNotOptimize(tr.steps);
    }
}
BENCHMARK(BM_Integrate)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Settle(benchmark::State& state) {
    const DriveSpec d = DriveSpec::single(0.1, 1.02);
    for (auto _ : state) {
        auto seg = settle(kExtinct, d, {}, 4000, 1e-9);
        benchmark::DoNotOptimize(seg.converged);
    }
}
BENCHMARK(BM_Settle)->Unit(benchmark::kMillisecond);

void BM_Spectrum(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(0.37 * static_cast<double>(i));
    for (auto _ : state) {
        auto s = spectrum(x, 0.1);
        benchmark::DoNotOptimize(s.amp.data());
    }
}
BENCHMARK(BM_Spectrum)->Arg(1 << 12)->Arg(1 << 16);

void BM_HbSolve(benchmark::State& state) {
    const DriveSpec d = DriveSpec::single(0.3, 1.1);
    const int N = static_cast<int>(state.range(0));
    for (auto _ : state) {
        auto sol = hb_solve(kExtinct, d, N);
        benchmark::DoNotOptimize(sol);
    }
}
BENCHMARK(BM_HbSolve)->Arg(5)->Arg(9)->Unit(benchmark::kMillisecond);

void BM_LoopAnalysis(benchmark::State& state) {
    SlowFlowParams sf;
    sf.Omega_a = 0.03;
    sf.delta_a = 0.01;
    sf.chi = 1.0;
    sf.mu = 0.1;
    sf.k_p = 0.04;
    sf.V_0 = 0.0095;
    sf.frame = build_frame(1.02, 1.0, 2);
    const Resonator res{0.005, 1.0, 0.005};
    std::vector<double> grid(2001);
    for (int k = 0; k < 2001; ++k) grid[k] = sf.frame.Delta_x + 0.2 * (k / 2000.0 - 0.5);
    for (auto _ : state) {
        auto r = loop_analysis(sf, res, 2, grid);
        benchmark::DoNotOptimize(r.nyquist.front().encirclements);
    }
}
BENCHMARK(BM_LoopAnalysis)->Unit(benchmark::kMillisecond);

void BM_CombCell(benchmark::State& state) {
    SweepPlan plan;
    plan.metric = Metric::comb_presence;
    plan.cell.max_periods = 3000;
    plan.cell.settle.record_periods = 1024;
    plan.cell.signal = Signal::q_x;
    plan.cell.omega_x_eff = 1.00422506;
    for (auto _ : state) {
        auto c = evaluate_cell(plan, kActive, 1.02, 0.006);
        benchmark::DoNotOptimize(c.value);
    }
}
BENCHMARK(BM_CombCell)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
