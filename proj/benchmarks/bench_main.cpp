#include <benchmark/benchmark.h>

#include <map>
#include <string>

#include "sscert/bounds.hpp"
#include "sscert/certifier.hpp"
#include "sscert/model.hpp"
#include "sscert/network.hpp"
#include "sscert/powerflow.hpp"

using namespace sscert;

namespace {

struct Fixture {
    PowerNetwork net;
    OperatingPoint base;
    FixedPointModel model;
    CertificationProblem problem;
};

// One model per case, built on first use and kept for the process.
const Fixture& fixture(const std::string& name) {
    static std::map<std::string, Fixture> cache;
    auto it = cache.find(name);
    if (it == cache.end()) {
        auto net = load_matpower(std::string(SSCERT_DATA_DIR) + "/" + name + ".m");
        auto base = solve_base(net);
        FixedPointModel model(net, base, all_load_inputs(net), {});
        auto problem = build_problem(net, model);
        it = cache.emplace(name, Fixture{std::move(net), std::move(base), std::move(model), std::move(problem)}).first;
    }
    return it->second;
}

const char* case_name(int64_t i) {
    static const char* names[] = {"case9", "case39", "case57", "case118", "case300"};
    return names[i];
}

void BM_PowerFlow(benchmark::State& state) {
    const auto& f = fixture(case_name(state.range(0)));
    const auto sched = base_schedule(f.net);
    const auto init = flat_start(f.net);
    for (auto _ : state) benchmark::DoNotOptimize(solve_power_flow(f.net, sched, init));
    state.SetLabel(case_name(state.range(0)));
}

// a small box a tenth of the way to the state caps
BoundPair small_state_box(const Fixture& f) { return f.problem.lx_max.scaled(0.1); }

void BM_Tau(benchmark::State& state) {
    const auto& f = fixture(case_name(state.range(0)));
    const auto lx = small_state_box(f);
    for (auto _ : state) benchmark::DoNotOptimize(tau(lx, f.model));
    state.SetLabel(case_name(state.range(0)));
}

void BM_TauLinear(benchmark::State& state) {
    const auto& f = fixture(case_name(state.range(0)));
    const auto lx = small_state_box(f);
    for (auto _ : state) benchmark::DoNotOptimize(tau_linear(lx, f.model, f.problem.caps));
    state.SetLabel(case_name(state.range(0)));
}

void BM_Sigma(benchmark::State& state) {
    const auto& f = fixture(case_name(state.range(0)));
    const auto lu = f.problem.lu_floor.scaled(2.0);
    for (auto _ : state) benchmark::DoNotOptimize(sigma(lu, f.model));
    state.SetLabel(case_name(state.range(0)));
}

void BM_CertifyFixedU(benchmark::State& state) {
    const auto& f = fixture(case_name(state.range(0)));
    const auto lu = f.problem.lu_floor;
    for (auto _ : state) benchmark::DoNotOptimize(certify_fixed_u(f.model, lu, f.problem));
    state.SetLabel(case_name(state.range(0)));
}

}  // namespace

BENCHMARK(BM_PowerFlow)->DenseRange(0, 4)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Tau)->DenseRange(0, 4)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_TauLinear)->DenseRange(0, 4)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Sigma)->DenseRange(0, 4)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_CertifyFixedU)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
