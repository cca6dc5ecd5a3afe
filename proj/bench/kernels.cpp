// Serial reference versus OpenMP kernel for each parallel hot loop.
// Run with OMP_NUM_THREADS set to compare scaling on a multi-core host.

#include <benchmark/benchmark.h>

#include "llt/coils.hpp"
#include "llt/conveyor.hpp"
#include "llt/tof.hpp"

using namespace llt;

namespace {

const std::vector<Vec3>& grid() {
  static const auto g = mag::cube_grid({0, 0, 0}, 0.01, 24);
  return g;
}

void BM_FieldGridSerial(benchmark::State& st) {
  const mag::CoilPair coils;
  for (auto _ : st) benchmark::DoNotOptimize(mag::field_grid_serial(coils, grid()));
  st.SetItemsProcessed(st.iterations() * static_cast<long>(grid().size()));
}

void BM_FieldGrid(benchmark::State& st) {
  const mag::CoilPair coils;
  for (auto _ : st) benchmark::DoNotOptimize(mag::field_grid(coils, grid()));
  st.SetItemsProcessed(st.iterations() * static_cast<long>(grid().size()));
}

void BM_TransportSerial(benchmark::State& st) {
  const auto cfg = conveyor::default_lattice();
  const auto plan = conveyor::plan_transport(0.1016, 0.785, 1500.0);
  const int n = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(conveyor::simulate_transport_serial(cfg, plan, 6e-6, n, 42));
  st.SetItemsProcessed(st.iterations() * n);
}

void BM_Transport(benchmark::State& st) {
  const auto cfg = conveyor::default_lattice();
  const auto plan = conveyor::plan_transport(0.1016, 0.785, 1500.0);
  const int n = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(conveyor::simulate_transport(cfg, plan, 6e-6, n, 42));
  st.SetItemsProcessed(st.iterations() * n);
}

void BM_RenderSerial(benchmark::State& st) {
  const tof::ThermalCloud cloud;
  for (auto _ : st) benchmark::DoNotOptimize(tof::render_image_serial(cloud, 20e-3, {}, 3));
}

void BM_Render(benchmark::State& st) {
  const tof::ThermalCloud cloud;
  for (auto _ : st) benchmark::DoNotOptimize(tof::render_image(cloud, 20e-3, {}, 3));
}

}  // namespace

BENCHMARK(BM_FieldGridSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FieldGrid)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TransportSerial)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Transport)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenderSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Render)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
