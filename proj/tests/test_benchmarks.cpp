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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "thumbfi/benchmarks.hpp"
#include "thumbfi/campaign.hpp"

#include <json.hpp>

using namespace thumbfi;

TEST_CASE("every benchmark halts with its golden values") {
    REQUIRE(benchmark_names().size() == 5);
    for (const auto &name : benchmark_names()) {
        INFO(name);
        auto b = load_benchmark(name);
        CHECK(b.name == name);
        CHECK(b.has_error_handler);
        auto img = assemble(b.source);
        auto g = golden_run(img);
        CHECK(g.final_state.status == Status::Halted);
        CHECK(b.target.value(g.final_state, img) == b.expected);
        for (const auto &[where, value] : b.checks) {
            INFO(where);
            CHECK(Target::parse(where).value(g.final_state, img) == value);
        }
    }
}

TEST_CASE("anchor values") {
    CHECK(load_benchmark("load_cafecafe").expected == 0xCAFECAFE);
    CHECK(hamming_weight(load_benchmark("load_cafecafe").expected) == 22);
    CHECK(load_benchmark("bl_call").expected == 42);
    auto rc = load_benchmark("restore_context");
    CHECK(rc.target.name() == "control");
    CHECK(rc.expected == 3);
    auto tc = load_benchmark("task_create_args");
    CHECK(tc.target.name() == "mem:0x20001000");
    CHECK(tc.checks.at("r2") == 128);
    CHECK_THROWS_WITH_AS(load_benchmark("nope"), doctest::Contains("unknown benchmark"), Error);
}

TEST_CASE("manifest lists every fixture") {
    auto doc = nlohmann::json::parse(benchmark_manifest());
    std::vector<std::string> names;
    for (const auto &b : doc.at("benchmarks"))
        names.push_back(b.at("name"));
    CHECK(names == benchmark_names());
}

TEST_CASE("skipping the msr leaves CONTROL privileged") {
    auto b = load_benchmark("restore_context");
    auto img = assemble(b.source);
    auto g = golden_run(img);
    auto rep = run_campaign(img, g, generate_catalog(CatalogDescriptor::parse("skips"), g),
                            b.target);
    CHECK(rep.summary.count(Classification::FaultTargetReg) >= 1);
    bool msr_skip = false;
    for (const auto &o : rep.outcomes)
        if (o.classification == Classification::FaultTargetReg &&
            o.spec.granularity() == SkipGranularity::OneInstruction &&
            img.instructions.at(g.executed[o.spec.index()]).op() == Op::Msr)
            msr_skip = o.target_value == 0;
    CHECK(msr_skip);
}

TEST_CASE("load faults can change the stacked priority") {
    auto b = load_benchmark("task_create_args");
    auto img = assemble(b.source);
    auto g = golden_run(img);
    auto rep = run_campaign(
        img, g, generate_catalog(CatalogDescriptor::parse("exhaustive1", EventSet::Load), g),
        b.target);
    bool elevated = false;
    for (const auto &o : rep.outcomes)
        if (o.classification == Classification::FaultTargetReg && o.target_value > b.expected)
            elevated = true;
    CHECK(elevated);
}
