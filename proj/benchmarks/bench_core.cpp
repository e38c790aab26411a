#include <benchmark/benchmark.h>

#include "diffpurify/guidance.hpp"
#include "diffpurify/harness.hpp"

using namespace diffpurify;

namespace {

struct Fixture {
    NoiseSchedule sched = make_schedule(100, ScheduleKind::LinearBeta, 0.028, 0.028);
    GmmScoreModel model{bars_components(BarsSpec{}), sched};
    State x = RngStream(1).gaussian_vec(kBarsDim);
    State y = bars_prototypes(BarsSpec{})[0];
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

}  // namespace

static void GmmScore(benchmark::State& state) {
    auto& f = fixture();
    for (auto _ : state) {
        auto s = f.model.score(f.x, 40);
        benchmark::DoNotOptimize(s);
    }
}
BENCHMARK(GmmScore);

static void GmmScoreVjp(benchmark::State& state) {
    auto& f = fixture();
    for (auto _ : state) {
        auto s = f.model.score_vjp(f.x, 40, f.y);
        benchmark::DoNotOptimize(s);
    }
}
BENCHMARK(GmmScoreVjp);

static void BicubicUp4(benchmark::State& state) {
    auto& f = fixture();
    GridShape shape{8, 8, 1};
    for (auto _ : state) {
        auto up = bicubic_up4(f.x, shape);
        benchmark::DoNotOptimize(up);
    }
}
BENCHMARK(BicubicUp4);

static void CombinedGuidanceStep(benchmark::State& state) {
    auto& f = fixture();
    GuidanceConfig g;
    g.set_default_interval(100);
    g.op.kind = OperatorKind::Bicubic4;
    g.op.shape = {8, 8, 1};
    for (auto _ : state) {
        auto out = combined_guidance(f.model, f.sched, f.x, 40, f.y, g);
        benchmark::DoNotOptimize(out);
    }
}
BENCHMARK(CombinedGuidanceStep);

static void PurifyRun(benchmark::State& state) {
    auto& f = fixture();
    GuidanceConfig g;
    g.set_default_interval(100);
    g.op.kind = OperatorKind::Bicubic4;
    g.op.shape = {8, 8, 1};
    std::uint64_t seed = 0;
    for (auto _ : state) {
        auto out = purify(f.model, f.sched, f.y, g, ++seed);
        benchmark::DoNotOptimize(out.x0);
    }
}
BENCHMARK(PurifyRun);

BENCHMARK_MAIN();
