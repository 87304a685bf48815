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

#include "thumbfi/isa.hpp"
#include "thumbfi/encoding.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

namespace thumbfi {

namespace {

std::string lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool is_target(const Operand &op) {
    return std::holds_alternative<LabelRef>(op) ||
           std::holds_alternative<PcOffset>(op);
}

bool is_literal(const Operand &op) {
    return is_target(op) || std::holds_alternative<LiteralConst>(op) ||
           std::holds_alternative<LiteralAddress>(op);
}

bool is_reg(const Operand &op) { return std::holds_alternative<Register>(op); }
bool is_imm(const Operand &op) { return std::holds_alternative<Immediate>(op); }

bool signature_ok(Op op, const std::vector<Operand> &ops) {
    auto n = ops.size();
    switch (op) {
    case Op::Mov:
    case Op::Movs:
    case Op::Cmp:
        return n == 2 && is_reg(ops[0]) && (is_reg(ops[1]) || is_imm(ops[1]));
    case Op::Add:
    case Op::Adds:
    case Op::Sub:
    case Op::Subs:
        return n == 3 && is_reg(ops[0]) && is_reg(ops[1]) &&
               (is_reg(ops[2]) || is_imm(ops[2]));
    case Op::Adr:
        return n == 2 && is_reg(ops[0]) && is_target(ops[1]);
    case Op::LdrLiteral:
        return n == 2 && is_reg(ops[0]) && is_literal(ops[1]);
    case Op::LdrImm:
    case Op::StrImm:
        return n == 2 && is_reg(ops[0]) &&
               std::holds_alternative<MemRef>(ops[1]);
    case Op::BCond:
    case Op::B:
    case Op::Bl:
        return n == 1 && is_target(ops[0]);
    case Op::Bx:
        return n == 1 && is_reg(ops[0]);
    case Op::Msr:
        return n == 2 && std::holds_alternative<SpecialRegister>(ops[0]) &&
               is_reg(ops[1]);
    case Op::Nop:
    case Op::Halt:
        return n == 0;
    }
    return false;
}

bool mentions_pc(const Operand &op) {
    if (auto r = std::get_if<Register>(&op))
        return r->index() == Register::PC;
    if (auto m = std::get_if<MemRef>(&op))
        return m->base.index() == Register::PC;
    return false;
}

std::optional<int32_t> pc_offset(const Instruction &i, size_t idx) {
    if (i.holds<PcOffset>(idx))
        return i.get<PcOffset>(idx).value;
    return std::nullopt;
}

bool fits_signed(int32_t value, unsigned bits) {
    int64_t lim = int64_t(1) << (bits - 1);
    return value >= -lim && value < lim;
}

} // namespace

std::string Register::name() const {
    switch (index_) {
    case SP:
        return "sp";
    case LR:
        return "lr";
    case PC:
        return "pc";
    default:
        return "r" + std::to_string(index_);
    }
}

std::optional<Register> parse_register(std::string_view text) {
    auto t = lower(text);
    if (t == "sp")
        return Register(Register::SP);
    if (t == "lr")
        return Register(Register::LR);
    if (t == "pc")
        return Register(Register::PC);
    if (t.size() < 2 || t.size() > 3 || t[0] != 'r')
        return std::nullopt;
    if (!std::all_of(t.begin() + 1, t.end(),
                     [](unsigned char c) { return std::isdigit(c); }))
        return std::nullopt;
    if (t.size() == 3 && t[1] == '0')
        return std::nullopt;
    unsigned idx = std::stoul(t.substr(1));
    if (idx > 15)
        return std::nullopt;
    return Register(idx);
}

std::string special_register_name(SpecialRegister reg) {
    switch (reg) {
    case SpecialRegister::Control:
        return "control";
    case SpecialRegister::Psp:
        return "psp";
    case SpecialRegister::Basepri:
        return "basepri";
    }
    return "?";
}

std::optional<SpecialRegister> parse_special_register(std::string_view text) {
    auto t = lower(text);
    for (auto s : kSpecialRegisters)
        if (special_register_name(s) == t)
            return s;
    return std::nullopt;
}

unsigned special_register_sysm(SpecialRegister reg) {
    switch (reg) {
    case SpecialRegister::Control:
        return 20;
    case SpecialRegister::Psp:
        return 9;
    case SpecialRegister::Basepri:
        return 17;
    }
    return 0;
}

std::optional<SpecialRegister> special_register_from_sysm(unsigned sysm) {
    for (auto s : kSpecialRegisters)
        if (special_register_sysm(s) == sysm)
            return s;
    return std::nullopt;
}

std::string mnemonic_name(Op op, Cond cond) {
    switch (op) {
    case Op::Mov:
        return "mov";
    case Op::Movs:
        return "movs";
    case Op::Add:
        return "add";
    case Op::Adds:
        return "adds";
    case Op::Sub:
        return "sub";
    case Op::Subs:
        return "subs";
    case Op::Adr:
        return "adr";
    case Op::LdrLiteral:
    case Op::LdrImm:
        return "ldr";
    case Op::StrImm:
        return "str";
    case Op::Cmp:
        return "cmp";
    case Op::BCond:
        return cond == Cond::Eq ? "beq" : "bne";
    case Op::B:
        return "b";
    case Op::Bl:
        return "bl";
    case Op::Bx:
        return "bx";
    case Op::Msr:
        return "msr";
    case Op::Nop:
        return "nop";
    case Op::Halt:
        return "halt";
    }
    return "?";
}

Instruction::Instruction(Op op, std::vector<Operand> operands, Width width,
                         Cond cond)
    : op_(op), operands_(std::move(operands)), width_(width), cond_(cond) {
    if (!signature_ok(op_, operands_))
        throw Error("invalid operands for '" + mnemonic_name(op_, cond_) +
                    "'");
    if ((op_ == Op::BCond) != (cond_ != Cond::Always))
        throw Error("condition code only allowed on conditional branches");
    for (const auto &o : operands_)
        if (mentions_pc(o))
            throw Error("pc is not a valid operand of '" +
                        mnemonic_name(op_, cond_) + "'");
}

Instruction Instruction::with_width(Width w) const {
    Instruction copy = *this;
    copy.width_ = w;
    return copy;
}

Instruction Instruction::with_operand(size_t i, Operand value) const {
    auto ops = operands_;
    ops.at(i) = std::move(value);
    return Instruction(op_, std::move(ops), width_, cond_);
}

std::optional<Register> Instruction::destination() const {
    switch (op_) {
    case Op::Mov:
    case Op::Movs:
    case Op::Add:
    case Op::Adds:
    case Op::Sub:
    case Op::Subs:
    case Op::Adr:
    case Op::LdrLiteral:
    case Op::LdrImm:
        return reg(0);
    default:
        return std::nullopt;
    }
}

std::vector<Register> Instruction::sources() const {
    std::vector<Register> out;
    switch (op_) {
    case Op::Mov:
    case Op::Movs:
        if (holds<Register>(1))
            out.push_back(reg(1));
        break;
    case Op::Add:
    case Op::Adds:
    case Op::Sub:
    case Op::Subs:
        out.push_back(reg(1));
        if (holds<Register>(2))
            out.push_back(reg(2));
        break;
    case Op::LdrImm:
        out.push_back(get<MemRef>(1).base);
        break;
    case Op::StrImm:
        out.push_back(reg(0));
        out.push_back(get<MemRef>(1).base);
        break;
    case Op::Cmp:
        out.push_back(reg(0));
        if (holds<Register>(1))
            out.push_back(reg(1));
        break;
    case Op::Bx:
        out.push_back(reg(0));
        break;
    case Op::Msr:
        out.push_back(reg(1));
        break;
    default:
        break;
    }
    return out;
}

bool Instruction::uses(Register r) const {
    if (destination() == r)
        return true;
    auto src = sources();
    return std::find(src.begin(), src.end(), r) != src.end();
}

bool Instruction::is_branch() const {
    return op_ == Op::B || op_ == Op::BCond || op_ == Op::Bl ||
           op_ == Op::Bx;
}

std::optional<std::string> Instruction::label_reference() const {
    for (const auto &o : operands_) {
        if (auto l = std::get_if<LabelRef>(&o))
            return l->name;
        if (auto l = std::get_if<LiteralAddress>(&o))
            return l->label;
    }
    return std::nullopt;
}

bool narrow_possible(const Instruction &i) {
    auto imm_of = [&](size_t idx) { return i.get<Immediate>(idx).value; };
    switch (i.op()) {
    case Op::Mov:
        return i.holds<Register>(1);
    case Op::Movs:
        if (i.holds<Register>(1))
            return i.reg(0).is_low() && i.reg(1).is_low();
        return i.reg(0).is_low() && imm_of(1) <= 255;
    case Op::Adds:
    case Op::Subs: {
        auto rd = i.reg(0), rn = i.reg(1);
        if (i.holds<Register>(2))
            return rd.is_low() && rn.is_low() && i.reg(2).is_low();
        auto imm = imm_of(2);
        return rd.is_low() && rn.is_low() &&
               (imm <= 7 || (rd == rn && imm <= 255));
    }
    case Op::Add: {
        auto rd = i.reg(0), rn = i.reg(1);
        if (i.holds<Register>(2))
            return rd == rn;
        auto imm = imm_of(2);
        if (imm % 4 != 0 || rn.index() != Register::SP)
            return false;
        return (rd.is_low() && imm <= 1020) ||
               (rd.index() == Register::SP && imm <= 508);
    }
    case Op::Sub: {
        if (i.holds<Register>(2))
            return false;
        auto imm = imm_of(2);
        return i.reg(0).index() == Register::SP &&
               i.reg(1).index() == Register::SP && imm % 4 == 0 &&
               imm <= 508;
    }
    case Op::Adr:
    case Op::LdrLiteral: {
        if (!i.reg(0).is_low())
            return false;
        auto off = pc_offset(i, 1);
        return !off || (*off >= 0 && *off <= 1020 && *off % 4 == 0);
    }
    case Op::LdrImm:
    case Op::StrImm: {
        auto m = i.get<MemRef>(1);
        if (!i.reg(0).is_low() || m.offset < 0 || m.offset % 4 != 0)
            return false;
        if (m.base.is_low())
            return m.offset <= 124;
        return m.base.index() == Register::SP && m.offset <= 1020;
    }
    case Op::Cmp:
        if (i.holds<Register>(1))
            return true;
        return i.reg(0).is_low() && imm_of(1) <= 255;
    case Op::BCond: {
        auto off = pc_offset(i, 0);
        return !off || (*off % 2 == 0 && *off >= -256 && *off <= 254);
    }
    case Op::B: {
        auto off = pc_offset(i, 0);
        return !off || (*off % 2 == 0 && *off >= -2048 && *off <= 2046);
    }
    case Op::Bl:
    case Op::Msr:
        return false;
    case Op::Bx:
    case Op::Nop:
    case Op::Halt:
        return true;
    }
    return false;
}

bool wide_possible(const Instruction &i) {
    auto imm_of = [&](size_t idx) { return i.get<Immediate>(idx).value; };
    auto modimm = [](uint32_t v) {
        return encode_modified_immediate(v).has_value();
    };
    switch (i.op()) {
    case Op::Mov:
        return i.holds<Register>(1) || modimm(imm_of(1)) ||
               imm_of(1) <= 0xFFFF;
    case Op::Movs:
    case Op::Cmp:
        return i.holds<Register>(1) || modimm(imm_of(1));
    case Op::Add:
    case Op::Sub:
        return i.holds<Register>(2) || modimm(imm_of(2)) ||
               imm_of(2) <= 4095;
    case Op::Adds:
    case Op::Subs:
        return i.holds<Register>(2) || modimm(imm_of(2));
    case Op::Adr:
    case Op::LdrLiteral: {
        auto off = pc_offset(i, 1);
        return !off || (*off >= -4095 && *off <= 4095);
    }
    case Op::LdrImm:
    case Op::StrImm: {
        auto m = i.get<MemRef>(1);
        return m.offset >= -255 && m.offset <= 4095;
    }
    case Op::BCond: {
        auto off = pc_offset(i, 0);
        return !off || (*off % 2 == 0 && fits_signed(*off, 21));
    }
    case Op::B:
    case Op::Bl: {
        auto off = pc_offset(i, 0);
        return !off || (*off % 2 == 0 && fits_signed(*off, 25));
    }
    case Op::Msr:
    case Op::Nop:
        return true;
    case Op::Bx:
    case Op::Halt:
        return false;
    }
    return false;
}

Width preferred_width(const Instruction &instr) {
    return narrow_possible(instr) ? Width::Narrow16 : Width::Wide32;
}

std::string exception_kind_name(ExceptionKind kind) {
    switch (kind) {
    case ExceptionKind::UndefinedInstruction:
        return "undefined-instruction";
    case ExceptionKind::UnsupportedInstruction:
        return "unsupported-instruction";
    case ExceptionKind::UnalignedAccess:
        return "unaligned-access";
    case ExceptionKind::MemoryFault:
        return "memory-fault";
    }
    return "?";
}

std::string status_name(Status status) {
    switch (status) {
    case Status::Running:
        return "running";
    case Status::Halted:
        return "halted";
    case Status::Exception:
        return "exception";
    case Status::Timeout:
        return "timeout";
    }
    return "?";
}

uint32_t MachineState::read_ram_word(uint32_t address) const {
    uint32_t value = 0;
    for (unsigned b = 0; b < 4; ++b) {
        auto it = memory.find(address + b);
        if (it != memory.end())
            value |= uint32_t(it->second) << (8 * b);
    }
    return value;
}

void MachineState::write_ram_word(uint32_t address, uint32_t value) {
    for (unsigned b = 0; b < 4; ++b)
        memory[address + b] = uint8_t(value >> (8 * b));
}

void MachineState::halt() {
    if (running())
        status = Status::Halted;
}

void MachineState::raise(ExceptionKind kind, uint32_t address) {
    if (!running())
        return;
    status = Status::Exception;
    exception = ExceptionInfo{kind, address};
}

void MachineState::timeout() {
    if (running())
        status = Status::Timeout;
}

MachineState reset_state(uint32_t entry) {
    MachineState s;
    s.regs[Register::SP] = kInitialSp;
    s.regs[Register::LR] = kReturnSentinel;
    s.pc = entry;
    return s;
}

std::string hex32(uint32_t value) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08X", value);
    return buf;
}

} // namespace thumbfi
