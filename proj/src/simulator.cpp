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

#include "thumbfi/simulator.hpp"
#include "thumbfi/encoding.hpp"

#include <cstdio>
#include <sstream>

namespace thumbfi {

namespace {

struct AddResult {
    uint32_t value;
    Flags flags;
};

AddResult add_with_carry(uint32_t a, uint32_t b, bool carry_in) {
    uint64_t unsigned_sum = uint64_t(a) + uint64_t(b) + (carry_in ? 1 : 0);
    int64_t signed_sum = int64_t(int32_t(a)) + int64_t(int32_t(b)) +
                         (carry_in ? 1 : 0);
    uint32_t result = uint32_t(unsigned_sum);
    Flags f;
    f.n = (result >> 31) != 0;
    f.z = result == 0;
    f.c = (unsigned_sum >> 32) != 0;
    f.v = int64_t(int32_t(result)) != signed_sum;
    return {result, f};
}

void set_nz(Flags &f, uint32_t v) {
    f.n = (v >> 31) != 0;
    f.z = v == 0;
}

} // namespace

uint64_t RunResult::fetch_count() const {
    uint64_t n = 0;
    for (const auto &e : trace)
        n += e.kind == EventKind::Fetch;
    return n;
}

uint64_t RunResult::load_count() const {
    return trace.size() - fetch_count();
}

std::vector<Event> RunResult::events(EventKind kind) const {
    std::vector<Event> out;
    for (const auto &e : trace)
        if (e.kind == kind)
            out.push_back(e);
    return out;
}

Simulator::Simulator(const ProgramImage &image, MachineState initial,
                     Limits limits, const Hooks *hooks)
    : image_(image), state_(std::move(initial)), limits_(limits),
      hooks_(hooks ? hooks : &identity_) {
    stop_at_ = limits_.error_handler ? limits_.error_handler
                                     : image_.error_handler;
}

bool Simulator::fetch(uint32_t aligned) {
    if (buffer_ && buffer_->first == aligned)
        return true;
    if (!image_.contains(aligned, 4))
        return false;
    Event e{EventKind::Fetch, fetches_++, aligned, image_.word(aligned)};
    result_.trace.push_back(e);
    buffer_ = {aligned, hooks_->on_fetch(e)};
    return true;
}

std::optional<uint16_t> Simulator::halfword_at(uint32_t address) {
    uint32_t aligned = address & ~3u;
    if (!fetch(aligned))
        return std::nullopt;
    uint32_t word = buffer_->second;
    return uint16_t(address & 2 ? word >> 16 : word);
}

std::optional<uint32_t> Simulator::load(uint32_t address, uint32_t pc) {
    if (address & 3) {
        state_.raise(ExceptionKind::UnalignedAccess, pc);
        return std::nullopt;
    }
    uint32_t raw;
    if (image_.contains(address, 4)) {
        raw = image_.word(address);
    } else if (in_ram(address)) {
        raw = state_.read_ram_word(address);
    } else {
        state_.raise(ExceptionKind::MemoryFault, pc);
        return std::nullopt;
    }
    Event e{EventKind::Load, loads_++, address, raw};
    result_.trace.push_back(e);
    return hooks_->on_load(e);
}

bool Simulator::store(uint32_t address, uint32_t value, uint32_t pc) {
    if (address & 3) {
        state_.raise(ExceptionKind::UnalignedAccess, pc);
        return false;
    }
    if (!in_ram(address)) {
        state_.raise(ExceptionKind::MemoryFault, pc);
        return false;
    }
    state_.write_ram_word(address, value);
    return true;
}

void Simulator::branch_to(uint32_t target) {
    state_.pc = target;
    buffer_.reset(); // a taken branch discards the buffered halfword
}

bool Simulator::step() {
    if (!state_.running())
        return false;
    const uint32_t pc = state_.pc;
    if (stop_at_ && pc == *stop_at_) {
        result_.error_handler_reached = true;
        state_.halt();
        return false;
    }
    if (result_.steps >= limits_.max_steps) {
        state_.timeout();
        return false;
    }
    if (pc & 1) {
        state_.raise(ExceptionKind::UnalignedAccess, pc);
        return false;
    }

    std::array<uint16_t, 2> hw{};
    auto first = halfword_at(pc);
    if (!first) {
        state_.raise(ExceptionKind::MemoryFault, pc);
        return false;
    }
    hw[0] = *first;
    Width width = Width::Narrow16;
    if (is_wide_prefix(hw[0])) {
        auto second = halfword_at(pc + 2);
        if (!second) {
            state_.raise(ExceptionKind::MemoryFault, pc);
            return false;
        }
        hw[1] = *second;
        width = Width::Wide32;
    }

    const uint64_t step_index = result_.steps++;
    result_.executed.push_back(pc);
    hw = hooks_->on_decode(step_index, pc, width, hw);
    // A hook may turn a wide instruction into narrow halfwords; decode what
    // the core would see from the first halfword.
    std::optional<uint16_t> second;
    if (is_wide_prefix(hw[0])) {
        if (width == Width::Narrow16) {
            auto h = halfword_at(pc + 2);
            if (!h) {
                state_.raise(ExceptionKind::MemoryFault, pc);
                return false;
            }
            hw[1] = *h;
        }
        second = hw[1];
    }
    Decoded d = decode_one(hw[0], second, pc);
    switch (d.cls) {
    case DecodeClass::Subset:
        break;
    case DecodeClass::Unsupported:
        state_.raise(ExceptionKind::UnsupportedInstruction, pc);
        return false;
    case DecodeClass::Undefined:
    case DecodeClass::Incomplete:
        state_.raise(ExceptionKind::UndefinedInstruction, pc);
        return false;
    }
    execute(*d.instruction, pc, d.width);
    return state_.running();
}

void Simulator::execute(const Instruction &in, uint32_t pc, Width width) {
    auto &s = state_;
    const uint32_t next = pc + width_bytes(width);
    const uint32_t pc_read = pc + 4;
    const uint32_t pc_aligned = pc_read & ~3u;
    auto value_of = [&](size_t idx) -> uint32_t {
        if (in.holds<Register>(idx))
            return s.reg(in.reg(idx));
        return in.get<Immediate>(idx).value;
    };
    auto write = [&](Register r, uint32_t v) { s.regs[r.index()] = v; };

    s.pc = next;
    switch (in.op()) {
    case Op::Nop:
        break;
    case Op::Halt:
        s.pc = pc;
        s.halt();
        break;
    case Op::Mov:
        write(in.reg(0), value_of(1));
        break;
    case Op::Movs: {
        uint32_t v = value_of(1);
        write(in.reg(0), v);
        set_nz(s.flags, v);
        break;
    }
    case Op::Add:
    case Op::Adds:
    case Op::Sub:
    case Op::Subs: {
        bool sub = in.op() == Op::Sub || in.op() == Op::Subs;
        uint32_t a = s.reg(in.reg(1));
        uint32_t b = value_of(2);
        auto r = sub ? add_with_carry(a, ~b, true) : add_with_carry(a, b, false);
        write(in.reg(0), r.value);
        if (in.op() == Op::Adds || in.op() == Op::Subs)
            s.flags = r.flags;
        break;
    }
    case Op::Cmp: {
        auto r = add_with_carry(s.reg(in.reg(0)), ~value_of(1), true);
        s.flags = r.flags;
        break;
    }
    case Op::Adr:
        write(in.reg(0), pc_aligned + uint32_t(in.get<PcOffset>(1).value));
        break;
    case Op::LdrLiteral: {
        auto v = load(pc_aligned + uint32_t(in.get<PcOffset>(1).value), pc);
        if (v)
            write(in.reg(0), *v);
        break;
    }
    case Op::LdrImm: {
        const auto &m = in.get<MemRef>(1);
        auto v = load(s.reg(m.base) + uint32_t(m.offset), pc);
        if (v)
            write(in.reg(0), *v);
        break;
    }
    case Op::StrImm: {
        const auto &m = in.get<MemRef>(1);
        store(s.reg(m.base) + uint32_t(m.offset), s.reg(in.reg(0)), pc);
        break;
    }
    case Op::BCond: {
        bool taken = in.cond() == Cond::Eq ? s.flags.z : !s.flags.z;
        if (taken)
            branch_to(pc_read + uint32_t(in.get<PcOffset>(0).value));
        break;
    }
    case Op::B:
        branch_to(pc_read + uint32_t(in.get<PcOffset>(0).value));
        break;
    case Op::Bl:
        write(Register(Register::LR), next | 1);
        branch_to(pc_read + uint32_t(in.get<PcOffset>(0).value));
        break;
    case Op::Bx: {
        uint32_t target = s.reg(in.reg(0));
        if (target >= kExcReturnFloor) {
            s.pc = pc;
            s.halt();
        } else if ((target & 1) == 0) {
            // Clearing the Thumb bit faults on M-profile cores.
            s.pc = pc;
            s.raise(ExceptionKind::UnsupportedInstruction, pc);
        } else {
            branch_to(target & ~1u);
        }
        break;
    }
    case Op::Msr:
        s.specials[size_t(in.get<SpecialRegister>(0))] = s.reg(in.reg(1));
        break;
    }
    if (!s.running() && s.status == Status::Exception)
        s.pc = pc;
}

RunResult Simulator::finish() && {
    result_.final_state = std::move(state_);
    return std::move(result_);
}

RunResult run(const ProgramImage &image, const MachineState &initial,
              const Limits &limits, const Hooks *hooks) {
    if (limits.max_steps < 1)
        throw Error("max_steps must be at least 1");
    Simulator sim(image, initial, limits, hooks);
    while (sim.step()) {
    }
    // step() also returns false right after a halt; make sure a still
    // running state cannot leak out.
    while (sim.state().running())
        sim.step();
    return std::move(sim).finish();
}

RunResult run(const ProgramImage &image, const Limits &limits,
              const Hooks *hooks) {
    return run(image, reset_state(image.entry), limits, hooks);
}

std::pair<uint32_t, uint32_t> fetch_word_of(const ProgramImage &image,
                                            uint32_t address) {
    uint32_t aligned = address & ~3u;
    if (!image.contains(address) || !image.contains(aligned, 4))
        throw Error("address " + hex32(address) + " outside image");
    return {aligned, image.word(aligned)};
}

std::string dump_trace(const RunResult &result) {
    std::ostringstream out;
    char buf[64];
    for (const auto &e : result.trace) {
        std::snprintf(buf, sizeof buf, "%c %llu 0x%08X 0x%08X\n",
                      e.kind == EventKind::Fetch ? 'F' : 'L',
                      static_cast<unsigned long long>(e.index), e.address,
                      e.value);
        out << buf;
    }
    return out.str();
}

std::string dump_state(const MachineState &state) {
    std::ostringstream out;
    for (unsigned i = 0; i < 15; ++i)
        out << Register(i).name() << " = " << hex32(state.regs[i]) << "\n";
    out << "pc = " << hex32(state.pc) << "\n";
    for (auto s : kSpecialRegisters)
        out << special_register_name(s) << " = " << hex32(state.special(s))
            << "\n";
    out << "flags = " << (state.flags.n ? 'N' : '-') << (state.flags.z ? 'Z' : '-')
        << (state.flags.c ? 'C' : '-') << (state.flags.v ? 'V' : '-') << "\n";
    out << "status = " << status_name(state.status);
    if (state.exception)
        out << " " << exception_kind_name(state.exception->kind) << " at "
            << hex32(state.exception->address);
    out << "\n";
    return out.str();
}

} // namespace thumbfi
