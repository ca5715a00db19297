// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "promptseg/phantom.hpp"
#include "promptseg/prompt_sim.hpp"

namespace {

using namespace promptseg;

struct Slice {
    SliceImage image;
    BinaryMask2D gt;
};

const Slice& phantom_slice() {
    static const Slice slice = [] {
        PhantomSpec spec;
        spec.dims = {240, 240, 32};
        spec.radius = 14;
        spec.center = {120, 120, 16};
        spec.noise = 6;
        const auto volumes = make_phantom(spec);
        const Volume core = tumor_core_mask(volumes.labels, kDefaultCoreLabels);
        return Slice{extract_slice(normalize_intensities(volumes.intensity), Orientation::Transversal, 16),
                     extract_mask(core, Orientation::Transversal, 16)};
    }();
    return slice;
}

void BM_ReferencePredict(benchmark::State& state) {
    const auto& s = phantom_slice();
    const ReferenceSegmenter backend;
    const SegmentationRequest request{s.image, {initial_prompt(s.gt)}, std::nullopt};
    for (auto _ : state) {
        benchmark::DoNotOptimize(backend.predict(request));
    }
}
BENCHMARK(BM_ReferencePredict)->Unit(benchmark::kMicrosecond);

void BM_RunSession(benchmark::State& state) {
    const auto& s = phantom_slice();
    const ReferenceSegmenter backend;
    const auto policy = state.range(0) == 0 ? SelectionPolicy::oracle() : SelectionPolicy::suggested();
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_session(backend, s.image, s.gt, policy));
    }
}
BENCHMARK(BM_RunSession)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_EvaluateCase(benchmark::State& state) {
    PhantomSpec spec;
    spec.dims = {64, 64, 64};
    spec.radius = 16;
    const auto volumes = make_phantom(spec);
    const BackendProvider backends(BackendConfig{});
    for (auto _ : state) {
        benchmark::DoNotOptimize(evaluate_case(volumes, Orientation::Transversal, PolicyKind::Oracle, false, backends));
    }
}
BENCHMARK(BM_EvaluateCase)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
