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

#include "thumbfi/encoding.hpp"
#include "thumbfi/faults.hpp"

#include <set>

using namespace thumbfi;

namespace {

const char *kCafe = "main: ldr r0, =0xCAFECAFE\nhalt\n";

RunResult faulty(const ProgramImage &img, FaultSpec spec) {
    FaultHooks h(spec);
    return run(img, {}, &h);
}

} // namespace

TEST_CASE("spec text round trip") {
    for (auto s : {FaultSpec::fetch(3, 1), FaultSpec::load(0, 0x80000000),
                   FaultSpec::skip(5, SkipGranularity::OneInstruction),
                   FaultSpec::skip(2, SkipGranularity::WholeFetchWord)})
        CHECK(FaultSpec::parse(s.to_string()) == s);
    CHECK(FaultSpec::fetch(3, 1).to_string() == "fetch 3 0x00000001");
    CHECK(FaultSpec::skip(5, SkipGranularity::OneInstruction).to_string() == "skip 5 insn");
    CHECK_THROWS_AS(FaultSpec::fetch(0, 0), Error);
    CHECK_THROWS_AS(FaultSpec::parse("flip 1 2"), Error);
    CHECK_THROWS_AS(FaultSpec::parse("skip 1 byte"), Error);
}

TEST_CASE("apply only touches the matching event") {
    Event f{EventKind::Fetch, 2, 0x8, 0x12345678};
    Event l{EventKind::Load, 2, 0x8, 0x12345678};
    CHECK(apply(FaultSpec::fetch(2, 0xF), f) == 0x12345677);
    CHECK(apply(FaultSpec::fetch(2, 0xF), l) == 0x12345678);
    CHECK(apply(FaultSpec::fetch(1, 0xF), f) == 0x12345678);
    CHECK(apply(FaultSpec::load(2, 0x80000000), l) == 0x92345678);
    CHECK(apply(FaultSpec::skip(2, SkipGranularity::WholeFetchWord), f) == kNopPair);
    CHECK(apply(FaultSpec::skip(2, SkipGranularity::WholeFetchWord), l) == 0x12345678);
    CHECK(apply(FaultSpec::skip(2, SkipGranularity::OneInstruction), f) == 0x12345678);
    auto sk = FaultSpec::skip(4, SkipGranularity::OneInstruction);
    std::array<uint16_t, 2> hw{0x2001, 0};
    CHECK(apply_decode(sk, 4, Width::Narrow16, hw)[0] == 0xBF00);
    CHECK(apply_decode(sk, 3, Width::Narrow16, hw) == hw);
    CHECK(apply_decode(sk, 4, Width::Wide32, {0xF04F, 0x0005}) ==
          std::array<uint16_t, 2>{0xF3AF, 0x8000});
}

TEST_CASE("load corruption reaches r0") {
    auto img = assemble(kCafe);
    auto r = faulty(img, FaultSpec::load(0, 1));
    CHECK(r.final_state.reg(Register(0)) == 0xCAFECAFF);
    // the recorded trace keeps the raw bus value
    CHECK(r.events(EventKind::Load)[0].value == 0xCAFECAFE);
}

TEST_CASE("exhaustive catalogs enumerate every event and bit") {
    auto img = assemble(kCafe);
    auto g = run(img);
    auto c1 = generate_catalog(CatalogDescriptor::parse("exhaustive1", EventSet::Load), g);
    CHECK(c1.specs.size() == 32);
    auto both = generate_catalog(CatalogDescriptor::parse("exhaustive1"), g);
    CHECK(both.specs.size() == 64);
    CHECK(both.specs.front().kind() == FaultKind::FetchCorrupt);
    CHECK(both.specs.back().kind() == FaultKind::LoadCorrupt);
    auto c2 = generate_catalog(CatalogDescriptor::parse("exhaustive2", EventSet::Load), g);
    CHECK(c2.specs.size() == 496);
    std::set<uint32_t> masks;
    for (const auto &s : c2.specs) {
        CHECK(hamming_weight(s.mask()) == 2);
        masks.insert(s.mask());
    }
    CHECK(masks.size() == 496);

    // four fetch words in a longer program
    auto img4 = assemble("main: movs r0, #1\nmovs r1, #1\nmovs r2, #1\nmovs r3, #1\n"
                         "movs r4, #1\nmovs r5, #1\nmovs r6, #1\nhalt\n");
    auto g4 = run(img4);
    CHECK(generate_catalog(CatalogDescriptor::parse("exhaustive1", EventSet::Fetch), g4)
              .specs.size() == 128);
}

TEST_CASE("sampled catalogs are seeded and well formed") {
    auto img = assemble(kCafe);
    auto g = run(img);
    auto d = CatalogDescriptor::parse("sampled:3:50:7");
    CHECK(d.flips == 3);
    CHECK(d.count == 50);
    CHECK(d.seed == 7);
    CHECK(d.class_name() == "sampled");
    auto a = generate_catalog(d, g);
    auto b = generate_catalog(d, g);
    CHECK(a.specs == b.specs);
    CHECK(a.specs.size() == 50);
    for (const auto &s : a.specs)
        CHECK(hamming_weight(s.mask()) == 3);
    auto other = generate_catalog(CatalogDescriptor::parse("sampled:3:50:8"), g);
    CHECK(other.specs != a.specs);
    CHECK(serialize_catalog(a) == serialize_catalog(b));
    CHECK_THROWS_AS(CatalogDescriptor::parse("sampled:0:5:1"), Error);
    CHECK_THROWS_AS(CatalogDescriptor::parse("sampled:33:5:1"), Error);
    CHECK_THROWS_AS(CatalogDescriptor::parse("random"), Error);
}

TEST_CASE("skip catalogs") {
    auto img = assemble("main: movs r0, #1\nmovs r1, #2\nmovs.w r2, #3\nhalt\n");
    auto g = run(img);
    auto insn = generate_catalog(CatalogDescriptor::parse("skips:insn"), g);
    CHECK(insn.specs.size() == g.steps);
    auto word = generate_catalog(CatalogDescriptor::parse("skips:word"), g);
    CHECK(word.specs.size() == g.fetch_count());
    auto all = generate_catalog(CatalogDescriptor::parse("skips"), g);
    CHECK(all.specs.size() == g.steps + g.fetch_count());
    CHECK(CatalogDescriptor::parse("skips:word").to_string() == "skips:word");
}

TEST_CASE("an empty trace has no catalog") {
    RunResult empty;
    CHECK_THROWS_AS(generate_catalog(CatalogDescriptor::parse("exhaustive1"), empty), Error);
}

TEST_CASE("skipping an instruction equals replacing it with nop") {
    const char *src = "main: movs r0, #1\nadds r0, r0, #2\nmovs.w r1, #3\nbl f\nhalt\n"
                      "f: adds r0, r0, #4\nbx lr\n";
    auto img = assemble(src);
    auto g = run(img);
    for (uint64_t k = 0; k + 1 < g.steps; ++k) {
        auto r = faulty(img, FaultSpec::skip(k, SkipGranularity::OneInstruction));
        uint32_t addr = g.executed[k];
        auto patched = img;
        auto w = img.instructions.at(addr).width();
        auto nop = encode_bytes(Instruction(Op::Nop, {}, w));
        std::copy(nop.begin(), nop.end(), patched.bytes.begin() + (addr - img.base));
        auto p = run(patched);
        CHECK(r.final_state == p.final_state);
    }
}

TEST_CASE("whole-word skip removes both halfwords") {
    auto img = assemble("main: movs r0, #1\nmovs r1, #2\nhalt\n");
    auto r = faulty(img, FaultSpec::skip(0, SkipGranularity::WholeFetchWord));
    CHECK(r.final_state.reg(Register(0)) == 0);
    CHECK(r.final_state.reg(Register(1)) == 0);
    CHECK(r.final_state.status == Status::Halted);
}
