#include <benchmark/benchmark.h>

#include "dispar/config.hpp"
#include "dispar/dynamics.hpp"
#include "dispar/shifts.hpp"
#include "dispar/swreduce.hpp"

#ifndef DISPAR_BENCH_DATA_DIR
#define DISPAR_BENCH_DATA_DIR "data"
#endif

namespace {

const dispar::CircuitSpec& table1() {
  static const auto spec = dispar::load_circuit(std::filesystem::path(DISPAR_BENCH_DATA_DIR) / "table1.json");
  return spec;
}

const dispar::CircuitSpec& unit_cell() {
  static const auto spec = dispar::load_circuit(std::filesystem::path(DISPAR_BENCH_DATA_DIR) / "unit_cell.json");
  return spec;
}

std::vector<dispar::DriveSpec> drives() {
  return {{"a", 0.00159, 4.938, 0.0, dispar::Envelope::kFlat, 0.0},
          {"a", 0.00159, 4.929, 0.0, dispar::Envelope::kFlat, 0.0}};
}

void BM_AssembleTable1(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(dispar::assemble_hamiltonian(table1()));
}
BENCHMARK(BM_AssembleTable1);

void BM_AssembleUnitCellCutoff(benchmark::State& state) {
  dispar::AssemblyOptions o;
  o.max_excitations = static_cast<int>(state.range(0));
  const auto basis = dispar::make_basis(unit_cell(), o);
  for (auto _ : state) benchmark::DoNotOptimize(dispar::assemble_sparse(unit_cell(), basis));
  state.counters["dim"] = static_cast<double>(basis.size());
}
BENCHMARK(BM_AssembleUnitCellCutoff)->Arg(2)->Arg(3)->Arg(4);

void BM_ShiftTableExact(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(dispar::shift_table(table1()));
}
BENCHMARK(BM_ShiftTableExact)->Unit(benchmark::kMillisecond);

void BM_ShiftTablePt(benchmark::State& state) {
  dispar::ShiftOptions o;
  o.method = dispar::ShiftMethod::kPerturbative;
  o.pt_order = static_cast<int>(state.range(0));
  o.pt_guard = 0.005;  // |0101> and |0002> sit 10 MHz apart in the four-mode model
  for (auto _ : state) benchmark::DoNotOptimize(dispar::shift_table(table1(), o));
}
BENCHMARK(BM_ShiftTablePt)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_ReduceUnitCell(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(dispar::reduce_unit_cell(unit_cell()));
}
BENCHMARK(BM_ReduceUnitCell);

// 1000 steps per iteration; the reported time divided by 1000 is the cost of one step.
void BM_PropagateLab1000Steps(benchmark::State& state) {
  const auto sys = dispar::dressed_system(table1());
  dispar::PropagationOptions o;
  o.dt_ps = 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(dispar::propagate(sys, drives(), 1.0, o));
}
BENCHMARK(BM_PropagateLab1000Steps)->Unit(benchmark::kMillisecond);

void BM_PropagateRotating(benchmark::State& state) {
  const auto sys = dispar::dressed_system(table1());
  dispar::PropagationOptions o;
  o.frame = dispar::Frame::kRotating;
  o.dt_ps = 500.0;
  for (auto _ : state) benchmark::DoNotOptimize(dispar::propagate(sys, drives(), 50.0, o));
}
BENCHMARK(BM_PropagateRotating)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
