/*
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Serial reference vs OpenMP kernels: campaign runner and validity density.

#include "thumbfi/benchmarks.hpp"
#include "thumbfi/campaign.hpp"
#include "thumbfi/encoding.hpp"
#include "thumbfi/rewriter.hpp"

#include <benchmark/benchmark.h>

using namespace thumbfi;

namespace {

struct Fixture {
    ProgramImage image;
    RunResult golden;
    FaultCatalog catalog;
    Target target;
};

// FD-protected task setup under the 2-bit load sweep plus a 1-bit sweep of
// every event: a few thousand short simulations.
const Fixture &fixture() {
    static Fixture f = [] {
        auto b = load_benchmark("task_create_args");
        RewritePlan p;
        p.scheme = Scheme::FaultDetection;
        p.force_wide = true;
        Fixture x;
        x.image = layout(rewrite(parse(b.source), p));
        x.golden = golden_run(x.image);
        x.catalog = generate_catalog(CatalogDescriptor::parse("exhaustive2", EventSet::Load), x.golden);
        auto one = generate_catalog(CatalogDescriptor::parse("exhaustive1"), x.golden);
        x.catalog.specs.insert(x.catalog.specs.end(), one.specs.begin(), one.specs.end());
        x.target = b.target;
        return x;
    }();
    return f;
}

void BM_CampaignSerial(benchmark::State &state) {
    const auto &f = fixture();
    for (auto _ : state)
        benchmark::DoNotOptimize(run_campaign_serial(f.image, f.golden, f.catalog, f.target));
    state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(f.catalog.specs.size()));
}

void BM_CampaignParallel(benchmark::State &state) {
    const auto &f = fixture();
    CampaignOptions o;
    o.threads = int(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(run_campaign(f.image, f.golden, f.catalog, f.target, o));
    state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(f.catalog.specs.size()));
}

void BM_DensitySerial(benchmark::State &state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(validity_density_serial(Width::Wide32, 1000000, 42));
    state.SetItemsProcessed(int64_t(state.iterations()) * 1000000);
}

void BM_DensityParallel(benchmark::State &state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(validity_density(Width::Wide32, 1000000, 42));
    state.SetItemsProcessed(int64_t(state.iterations()) * 1000000);
}

} // namespace

BENCHMARK(BM_CampaignSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_CampaignParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(0)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DensitySerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DensityParallel)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
