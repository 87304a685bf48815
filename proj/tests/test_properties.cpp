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

// Randomised properties over generated straight-line programs.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "thumbfi/campaign.hpp"
#include "thumbfi/encoding.hpp"
#include "thumbfi/rewriter.hpp"

#include <random>

using namespace thumbfi;

namespace {

using Rng = std::mt19937_64;

unsigned pick(Rng &rng, unsigned n) { return unsigned(rng() % n); }

std::string reg(Rng &rng, bool high = false) {
    unsigned hi[] = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    return "r" + std::to_string(high ? hi[pick(rng, 11)] : pick(rng, 8));
}

// Only instructions the detection scheme covers, plus stack traffic when
// `stores` is set. adr results are code addresses, which move under
// rewriting, so comparisons across layouts leave adr out.
std::string program(Rng &rng, bool stores, bool adr = true) {
    std::string s = ".error error\nmain:\n";
    int n = 3 + int(pick(rng, 10));
    for (int i = 0; i < n; ++i) {
        switch (pick(rng, stores ? 9 : 7)) {
        case 0:
            s += "movs " + reg(rng) + ", #" + std::to_string(pick(rng, 256)) + "\n";
            break;
        case 1:
            s += "mov " + reg(rng, true) + ", " + reg(rng, true) + "\n";
            break;
        case 2:
            s += "adds " + reg(rng) + ", " + reg(rng) + ", " + reg(rng) + "\n";
            break;
        case 3:
            s += "subs " + reg(rng) + ", " + reg(rng) + ", #" + std::to_string(pick(rng, 8)) + "\n";
            break;
        case 4:
            s += "add " + reg(rng, true) + ", " + reg(rng, true) + ", #" +
                 std::to_string(pick(rng, 4096)) + "\n";
            break;
        case 5:
            s += "ldr " + reg(rng) + ", =" + std::to_string(rng() & 0xFFFFFFFF) + "\n";
            break;
        case 6:
            if (adr)
                s += "adr " + reg(rng) + ", data\n";
            break;
        case 7:
            s += "str " + reg(rng) + ", [sp, #" + std::to_string(4 * pick(rng, 4)) + "]\n";
            break;
        default:
            s += "ldr " + reg(rng) + ", [sp, #" + std::to_string(4 * pick(rng, 4)) + "]\n";
            break;
        }
    }
    return s + "halt\nerror: halt\ndata: .word 0x5A5A5A5A\n";
}

bool registers_match(const MachineState &a, const MachineState &b, Register scratch) {
    for (unsigned r = 0; r < 15; ++r)
        if (r != scratch.index() && a.regs[r] != b.regs[r])
            return false;
    return a.memory == b.memory && a.specials == b.specials && a.status == b.status;
}

} // namespace

TEST_CASE("random instructions round-trip through the encoder") {
    Rng rng(11);
    int encoded = 0;
    for (int k = 0; k < 20000; ++k) {
        Register a(pick(rng, 15)), b(pick(rng, 15)), c(pick(rng, 15));
        uint32_t imm = pick(rng, 4) == 0 ? uint32_t(rng()) : uint32_t(pick(rng, 4096));
        int32_t off = int32_t(pick(rng, 8192)) - 4096;
        Width w = pick(rng, 2) ? Width::Wide32 : Width::Narrow16;
        std::vector<Instruction> cands;
        auto add = [&](Op op, std::vector<Operand> ops, Cond cond = Cond::Always) {
            cands.emplace_back(op, std::move(ops), w, cond);
        };
        add(Op::Mov, {a, b});
        add(Op::Movs, {a, Immediate{imm}});
        add(Op::Adds, {a, b, Immediate{imm}});
        add(Op::Sub, {a, b, c});
        add(Op::Cmp, {a, Immediate{imm}});
        add(Op::LdrImm, {a, MemRef{b, off}});
        add(Op::StrImm, {a, MemRef{b, off & ~3}});
        add(Op::LdrLiteral, {a, PcOffset{off}});
        add(Op::Adr, {a, PcOffset{off & ~3}});
        add(Op::BCond, {PcOffset{off * 2}}, pick(rng, 2) ? Cond::Eq : Cond::Ne);
        add(Op::B, {PcOffset{off & ~1}});
        add(Op::Bl, {PcOffset{(off & ~1) * 1000}});
        const auto &i = cands[pick(rng, unsigned(cands.size()))];
        Encoding e;
        try {
            e = encode(i);
        } catch (const Error &) {
            continue;
        }
        ++encoded;
        auto d = decode_one(e.halfwords[0],
                            e.width == Width::Wide32 ? std::optional(e.halfwords[1]) : std::nullopt);
        INFO(disassemble(i));
        REQUIRE(d.cls == DecodeClass::Subset);
        CHECK(*d.instruction == i);
        CHECK(encode(*d.instruction) == e);
    }
    CHECK(encoded > 5000);
}

TEST_CASE("format/parse/layout round trip on random programs") {
    Rng rng(5);
    for (int k = 0; k < 200; ++k) {
        auto src = program(rng, true);
        auto p = parse(src);
        auto again = parse(format_program(p));
        CHECK(layout(p) == layout(again));
        auto img = layout(p);
        CHECK(load_image(dump_image(img)).bytes == img.bytes);
    }
}

TEST_CASE("rewriting preserves fault-free behaviour on random programs") {
    Rng rng(7);
    for (int k = 0; k < 150; ++k) {
        auto src = program(rng, true, false);
        auto prog = parse(src);
        auto g = run(layout(prog));
        REQUIRE(g.final_state.status == Status::Halted);
        for (auto s : {Scheme::FaultTolerance, Scheme::FaultDetection})
            for (bool wide : {false, true}) {
                RewritePlan p;
                p.scheme = s;
                p.force_wide = wide;
                auto r = run(layout(rewrite(prog, p)));
                INFO(src << scheme_name(s) << " wide=" << wide);
                CHECK_FALSE(r.error_handler_reached);
                CHECK(registers_match(g.final_state, r.final_state, resolve_scratch(prog, p)));
            }
    }
}

TEST_CASE("tolerance survives single skips on random programs") {
    Rng rng(9);
    for (int k = 0; k < 60; ++k) {
        auto src = program(rng, true);
        auto prog = parse(src);
        RewritePlan p;
        p.force_wide = true;
        auto img = layout(rewrite(prog, p));
        auto g = golden_run(img);
        for (const auto &spec :
             generate_catalog(CatalogDescriptor::parse("skips:insn"), g).specs) {
            FaultHooks h(spec);
            auto r = run(img, {}, &h);
            INFO(src << spec.to_string());
            CHECK(registers_match(g.final_state, r.final_state, resolve_scratch(prog, p)));
        }
    }
}

TEST_CASE("detection catches every single skip and load fault on random programs") {
    Rng rng(13);
    for (int k = 0; k < 60; ++k) {
        auto src = program(rng, false);
        auto prog = parse(src);
        RewritePlan p;
        p.scheme = Scheme::FaultDetection;
        p.force_wide = true;
        auto img = layout(rewrite(prog, p));
        auto g = golden_run(img);
        auto specs = generate_catalog(CatalogDescriptor::parse("skips"), g).specs;
        if (g.load_count() > 0) {
            auto l = generate_catalog(CatalogDescriptor::parse("exhaustive1", EventSet::Load), g);
            specs.insert(specs.end(), l.specs.begin(), l.specs.end());
        }
        Register scratch = resolve_scratch(prog, p);
        for (const auto &spec : specs) {
            FaultHooks h(spec);
            auto r = run(img, {}, &h);
            INFO(src << spec.to_string());
            CHECK((r.error_handler_reached ||
                   registers_match(g.final_state, r.final_state, scratch)));
        }
    }
}

TEST_CASE("campaigns are deterministic") {
    Rng rng(17);
    for (int k = 0; k < 10; ++k) {
        auto img = assemble(program(rng, true));
        auto g = golden_run(img);
        auto d = CatalogDescriptor::parse("sampled:2:200:" + std::to_string(k));
        auto a = run_campaign(img, g, generate_catalog(d, g), Target::parse("r0"));
        auto b = run_campaign(img, g, generate_catalog(d, g), Target::parse("r0"));
        CHECK(report_csv(a) == report_csv(b));
        CHECK(summary_json(a.summary) == summary_json(b.summary));
    }
}
