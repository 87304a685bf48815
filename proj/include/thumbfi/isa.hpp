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

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace thumbfi {

/// Error raised by every module for malformed input or contract violations.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Number of set bits in a 32-bit word.
constexpr unsigned hamming_weight(uint32_t value) {
    return static_cast<unsigned>(std::popcount(value));
}

class Register {
  public:
    static constexpr unsigned SP = 13;
    static constexpr unsigned LR = 14;
    static constexpr unsigned PC = 15;

    constexpr explicit Register(unsigned index) : index_(index) {
        if (index > 15)
            throw Error("register index out of range");
    }

    constexpr unsigned index() const { return index_; }
    /// r0-r7, the registers reachable from most 16-bit encodings.
    constexpr bool is_low() const { return index_ < 8; }
    std::string name() const;

    constexpr bool operator==(const Register &) const = default;
    constexpr auto operator<=>(const Register &) const = default;

  private:
    unsigned index_;
};

std::optional<Register> parse_register(std::string_view text);

enum class SpecialRegister { Control, Psp, Basepri };

constexpr std::array<SpecialRegister, 3> kSpecialRegisters = {
    SpecialRegister::Control, SpecialRegister::Psp, SpecialRegister::Basepri};

std::string special_register_name(SpecialRegister reg);
std::optional<SpecialRegister> parse_special_register(std::string_view text);
/// SYSm field value used by the MSR encoding.
unsigned special_register_sysm(SpecialRegister reg);
std::optional<SpecialRegister> special_register_from_sysm(unsigned sysm);

enum class Width { Narrow16, Wide32 };

constexpr unsigned width_bytes(Width w) { return w == Width::Wide32 ? 4 : 2; }

enum class Op {
    Mov,
    Movs,
    Add,
    Adds,
    Sub,
    Subs,
    Adr,
    LdrLiteral,
    LdrImm,
    StrImm,
    Cmp,
    BCond,
    B,
    Bl,
    Bx,
    Msr,
    Nop,
    // Assembles to the simulator's stop sentinel (bkpt #0).
    Halt,
};

enum class Cond { Eq, Ne, Always };

/// Textual mnemonic without width suffix ("ldr" for both ldr forms, "beq"...).
std::string mnemonic_name(Op op, Cond cond = Cond::Always);

// Operand kinds.
struct Immediate {
    uint32_t value;
    bool operator==(const Immediate &) const = default;
};

/// [base, #offset] addressing for ldr/str with an immediate offset.
struct MemRef {
    Register base;
    int32_t offset;
    bool operator==(const MemRef &) const = default;
};

/// Symbolic reference to a label, resolved by layout.
struct LabelRef {
    std::string name;
    bool operator==(const LabelRef &) const = default;
};

/// Resolved PC-relative displacement. For branches it is relative to the
/// instruction address + 4; for adr and ldr literal it is relative to
/// Align(address + 4, 4).
struct PcOffset {
    int32_t value;
    bool operator==(const PcOffset &) const = default;
};

/// `ldr rt, =value`: a fresh literal pool entry holding value.
struct LiteralConst {
    uint32_t value;
    bool operator==(const LiteralConst &) const = default;
};

/// `ldr rt, =label`: a fresh literal pool entry holding the label address.
struct LiteralAddress {
    std::string label;
    bool operator==(const LiteralAddress &) const = default;
};

using Operand = std::variant<Register, SpecialRegister, Immediate, MemRef,
                             LabelRef, PcOffset, LiteralConst, LiteralAddress>;

/// One instruction of the supported subset. The constructor enforces the
/// operand signature of the mnemonic; width feasibility is checked by the
/// encoder, since the offsets of label operands are only known after layout.
class Instruction {
  public:
    Instruction(Op op, std::vector<Operand> operands, Width width,
                Cond cond = Cond::Always);

    Op op() const { return op_; }
    Width width() const { return width_; }
    Cond cond() const { return cond_; }
    const std::vector<Operand> &operands() const { return operands_; }
    const Operand &operand(size_t i) const { return operands_.at(i); }

    template <typename T> bool holds(size_t i) const {
        return i < operands_.size() &&
               std::holds_alternative<T>(operands_[i]);
    }
    template <typename T> const T &get(size_t i) const {
        return std::get<T>(operands_.at(i));
    }
    Register reg(size_t i) const { return get<Register>(i); }

    Instruction with_width(Width w) const;
    Instruction with_operand(size_t i, Operand value) const;

    /// General register written by the instruction, if any.
    std::optional<Register> destination() const;
    /// General registers read by the instruction.
    std::vector<Register> sources() const;
    bool uses(Register r) const;
    bool is_branch() const;
    /// Label referenced by a branch/adr/ldr operand, if any.
    std::optional<std::string> label_reference() const;

    bool operator==(const Instruction &) const = default;

  private:
    Op op_;
    std::vector<Operand> operands_;
    Width width_;
    Cond cond_;
};

/// True when some 16-bit encoding exists for the operand classes (register
/// banks, immediate ranges). Label displacements are not considered.
bool narrow_possible(const Instruction &instr);
/// True when some 32-bit encoding exists for the operand classes.
bool wide_possible(const Instruction &instr);
/// Default width picked by the assembler when no suffix is given.
Width preferred_width(const Instruction &instr);

enum class ExceptionKind {
    UndefinedInstruction,
    UnsupportedInstruction,
    UnalignedAccess,
    MemoryFault,
};

std::string exception_kind_name(ExceptionKind kind);

enum class Status { Running, Halted, Exception, Timeout };

std::string status_name(Status status);

struct ExceptionInfo {
    ExceptionKind kind;
    uint32_t address; // address of the instruction that triggered it
    bool operator==(const ExceptionInfo &) const = default;
};

struct Flags {
    bool n = false;
    bool z = false;
    bool c = false;
    bool v = false;
    bool operator==(const Flags &) const = default;
};

// Memory map of the simulated device.
constexpr uint32_t kRamBase = 0x20000000;
constexpr uint32_t kRamSize = 0x2000;
constexpr uint32_t kInitialSp = 0x20001000;
/// Initial lr; a bx to any address >= kExcReturnFloor stops execution.
constexpr uint32_t kReturnSentinel = 0xFFFFFFF1;
constexpr uint32_t kExcReturnFloor = 0xFFFFFFF0;

constexpr bool in_ram(uint32_t address, uint32_t size = 4) {
    return address >= kRamBase && address - kRamBase <= kRamSize - size;
}

/// Architectural state. Once status leaves Running the state is frozen:
/// halt/raise/timeout become no-ops and the simulator refuses to step it.
struct MachineState {
    std::array<uint32_t, 16> regs{};
    std::array<uint32_t, 3> specials{};
    Flags flags;
    /// Data region contents (RAM only; code is read from the image).
    std::map<uint32_t, uint8_t> memory;
    uint32_t pc = 0;
    Status status = Status::Running;
    std::optional<ExceptionInfo> exception;

    bool running() const { return status == Status::Running; }

    uint32_t reg(Register r) const { return regs[r.index()]; }
    uint32_t special(SpecialRegister s) const {
        return specials[static_cast<size_t>(s)];
    }

    uint32_t read_ram_word(uint32_t address) const;
    void write_ram_word(uint32_t address, uint32_t value);

    void halt();
    void raise(ExceptionKind kind, uint32_t address);
    void timeout();

    bool operator==(const MachineState &) const = default;
};

/// Reset state: zeroed registers, sp at the top of the stack, lr holding
/// the return sentinel and pc at entry.
MachineState reset_state(uint32_t entry);

std::string hex32(uint32_t value);

} // namespace thumbfi
