// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <benchmark/benchmark.h>

#include "promptseg/mask.hpp"

namespace {

using promptseg::BinaryMask2D;

BinaryMask2D disc_field(int side, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> pos(0, side - 1);
    std::uniform_int_distribution<int> radius(side / 16 + 1, side / 6 + 2);
    BinaryMask2D m(side, side);
    for (int d = 0; d < 12; ++d) {
        const int cx = pos(rng);
        const int cy = pos(rng);
        const int r = radius(rng);
        for (int y = std::max(0, cy - r); y <= std::min(side - 1, cy + r); ++y) {
            for (int x = std::max(0, cx - r); x <= std::min(side - 1, cx + r); ++x) {
                if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) {
                    m.set(x, y);
                }
            }
        }
    }
    return m;
}

void BM_DistanceTransform(benchmark::State& state) {
    const auto m = disc_field(static_cast<int>(state.range(0)), 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(promptseg::squared_distance_transform(m));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m.size()));
}
BENCHMARK(BM_DistanceTransform)->Arg(64)->Arg(240)->Arg(512);

void BM_InteriorCenter(benchmark::State& state) {
    const auto m = disc_field(static_cast<int>(state.range(0)), 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(promptseg::interior_center(m));
    }
}
BENCHMARK(BM_InteriorCenter)->Arg(240);

void BM_ConnectedComponents(benchmark::State& state) {
    const auto m = disc_field(static_cast<int>(state.range(0)), 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(promptseg::connected_components(m));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m.size()));
}
BENCHMARK(BM_ConnectedComponents)->Arg(64)->Arg(240)->Arg(512);

void BM_RleRoundTrip(benchmark::State& state) {
    const auto m = disc_field(240, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(promptseg::rle_decode(promptseg::rle_encode(m)));
    }
}
BENCHMARK(BM_RleRoundTrip);

}  // namespace
