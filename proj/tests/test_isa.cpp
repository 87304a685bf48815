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

#include "thumbfi/isa.hpp"

using namespace thumbfi;

TEST_CASE("hamming weight") {
    CHECK(hamming_weight(0xCAFECAFE) == 22);
    CHECK(hamming_weight(0) == 0);
    CHECK(hamming_weight(0xFFFFFFFF) == 32);
    static_assert(hamming_weight(0x80000001) == 2);
}

TEST_CASE("registers") {
    CHECK(Register(13).name() == "sp");
    CHECK(Register(14).name() == "lr");
    CHECK(Register(7).is_low());
    CHECK_FALSE(Register(8).is_low());
    CHECK_THROWS_AS(Register(16), Error);
    CHECK(parse_register("R12") == Register(12));
    CHECK(parse_register("lr") == Register(14));
    CHECK_FALSE(parse_register("r16"));
    CHECK(parse_special_register("basepri") == SpecialRegister::Basepri);
    for (auto s : kSpecialRegisters)
        CHECK(special_register_from_sysm(special_register_sysm(s)) == s);
}

TEST_CASE("operand signatures are enforced") {
    Register r0(0), r1(1);
    CHECK_NOTHROW(Instruction(Op::Mov, {r0, r1}, Width::Narrow16));
    CHECK_THROWS_AS(Instruction(Op::Mov, {r0}, Width::Narrow16), Error);
    CHECK_THROWS_AS(Instruction(Op::Add, {r0, Immediate{1}}, Width::Wide32), Error);
    CHECK_THROWS_AS(Instruction(Op::Bx, {PcOffset{4}}, Width::Narrow16), Error);
    CHECK_THROWS_AS(Instruction(Op::Nop, {r0}, Width::Narrow16), Error);
    CHECK_THROWS_AS(Instruction(Op::LdrImm, {r0, r1}, Width::Narrow16), Error);
    CHECK_THROWS_AS(Instruction(Op::Msr, {r0, r1}, Width::Wide32), Error);
}

TEST_CASE("width feasibility") {
    Register r0(0), r9(9);
    Instruction adds_hi(Op::Adds, {r9, r9, Immediate{1}}, Width::Wide32);
    CHECK_FALSE(narrow_possible(adds_hi));
    CHECK(wide_possible(adds_hi));
    CHECK(preferred_width(adds_hi) == Width::Wide32);
    Instruction movs(Op::Movs, {r0, Immediate{42}}, Width::Narrow16);
    CHECK(narrow_possible(movs));
    CHECK(preferred_width(movs) == Width::Narrow16);
    Instruction bl(Op::Bl, {LabelRef{"f"}}, Width::Wide32);
    CHECK_FALSE(narrow_possible(bl));
    Instruction msr(Op::Msr, {SpecialRegister::Control, r0}, Width::Wide32);
    CHECK_FALSE(narrow_possible(msr));
    Instruction bx(Op::Bx, {Register(14)}, Width::Narrow16);
    CHECK_FALSE(wide_possible(bx));
}

TEST_CASE("dataflow queries") {
    Register r0(0), r1(1), r2(2);
    Instruction add(Op::Add, {r0, r0, r1}, Width::Narrow16);
    CHECK(add.destination() == r0);
    CHECK(add.uses(r1));
    CHECK_FALSE(add.uses(r2));
    Instruction str(Op::StrImm, {r2, MemRef{Register(13), 0}}, Width::Narrow16);
    CHECK_FALSE(str.destination());
    CHECK(str.uses(r2));
    CHECK(str.uses(Register(13)));
    Instruction b(Op::BCond, {LabelRef{"x"}}, Width::Narrow16, Cond::Ne);
    CHECK(b.is_branch());
    CHECK(b.label_reference() == "x");
    CHECK(mnemonic_name(Op::BCond, Cond::Ne) == "bne");
    CHECK(mnemonic_name(Op::LdrLiteral) == "ldr");
}

TEST_CASE("instructions are values") {
    Instruction a(Op::Movs, {Register(0), Immediate{1}}, Width::Narrow16);
    auto b = a.with_width(Width::Wide32);
    CHECK(a.width() == Width::Narrow16);
    CHECK(b.width() == Width::Wide32);
    auto c = a.with_operand(1, Immediate{2});
    CHECK(a.get<Immediate>(1).value == 1);
    CHECK(c.get<Immediate>(1).value == 2);
}

TEST_CASE("machine state freezes once stopped") {
    auto s = reset_state(0x10);
    CHECK(s.pc == 0x10);
    CHECK(s.reg(Register(13)) == kInitialSp);
    CHECK(s.reg(Register(14)) == kReturnSentinel);
    CHECK(s.running());
    s.raise(ExceptionKind::MemoryFault, 0x12);
    auto frozen = s;
    s.halt();
    s.timeout();
    s.raise(ExceptionKind::UndefinedInstruction, 0);
    CHECK(s == frozen);
    CHECK(s.status == Status::Exception);
    CHECK(s.exception->address == 0x12);
}

TEST_CASE("ram words") {
    auto s = reset_state(0);
    s.write_ram_word(0x20000010, 0xCAFECAFE);
    CHECK(s.read_ram_word(0x20000010) == 0xCAFECAFE);
    CHECK(s.read_ram_word(0x20000014) == 0);
    CHECK(in_ram(kRamBase + kRamSize - 4));
    CHECK_FALSE(in_ram(kRamBase + kRamSize - 2));
    CHECK_FALSE(in_ram(0));
}
