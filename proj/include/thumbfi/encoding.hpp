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

#include "thumbfi/isa.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace thumbfi {

// Canonical 16/32-bit encodings of the subset. Where the architecture
// offers several encodings of one instruction, encode() picks:
//   - the 3-bit immediate form of adds/subs when the immediate fits, else
//     the Rdn form;
//   - the modified-immediate (ThumbExpandImm) form of 32-bit mov/add/sub,
//     falling back to MOVW/ADDW/SUBW;
//   - the T1 register compare for two low registers, T2 otherwise.
// decode() accepts every alternative encoding of a subset instruction.

/// 12-bit i:imm3:imm8 field for a ThumbExpandImm constant, if representable.
std::optional<uint16_t> encode_modified_immediate(uint32_t value);
uint32_t expand_modified_immediate(uint16_t imm12);

/// Halfwords of the canonical encoding, in instruction-stream order.
struct Encoding {
    Width width;
    std::array<uint16_t, 2> halfwords{};

    /// Little-endian bytes, first halfword first.
    std::vector<uint8_t> bytes() const;
    bool operator==(const Encoding &) const = default;
};

/// Encode at the instruction's declared width. Label operands must have been
/// resolved to PcOffset. Throws Error when the declared width cannot encode
/// the operands.
Encoding encode(const Instruction &instr);
std::vector<uint8_t> encode_bytes(const Instruction &instr);

/// First halfword of a 32-bit instruction (top five bits 0b11101, 0b11110
/// or 0b11111).
constexpr bool is_wide_prefix(uint16_t hw) { return (hw >> 11) >= 0x1D; }

enum class DecodeClass {
    Subset,      // an instruction of the implemented subset
    Unsupported, // valid per the coarse decode tables, outside the subset
    Undefined,   // fails the validity predicate
    Incomplete,  // a 32-bit prefix whose second halfword is not available
};

std::string decode_class_name(DecodeClass cls);

struct Decoded {
    DecodeClass cls;
    Width width;
    uint32_t address;
    std::array<uint16_t, 2> halfwords{};
    std::optional<Instruction> instruction; // set iff cls == Subset
};

/// Decode one instruction starting with hw1. hw2 is consulted only when hw1
/// is a 32-bit prefix.
Decoded decode_one(uint16_t hw1, std::optional<uint16_t> hw2,
                   uint32_t address = 0);

/// Decode a 4-byte fetch word at `at`: two 16-bit results or one 32-bit
/// result. A trailing 32-bit prefix is reported as Incomplete.
std::vector<Decoded> decode(uint32_t word, uint32_t at = 0);

/// Coarse validity predicate built from the major opcode tables of the
/// ARMv7-M Thumb encoding (16-bit space). A 32-bit prefix is not a valid
/// 16-bit instruction.
bool valid_narrow(uint16_t hw);
/// Coarse validity predicate for a 32-bit instruction (hw1 must be a prefix).
/// Coprocessor space counts as invalid: the target has no coprocessor.
bool valid_wide(uint16_t hw1, uint16_t hw2);

/// Fraction of the encoding space classified valid. Narrow16 enumerates all
/// 2^16 halfwords and ignores the budget and seed; Wide32 samples
/// sample_budget words uniformly over the 32-bit encoding space (first
/// halfword restricted to the 32-bit prefixes) from a seeded mt19937.
/// The kernel is OpenMP-parallel; the result does not depend on the thread
/// count.
double validity_density(Width width, uint64_t sample_budget, uint64_t seed);
/// Single-threaded reference implementation of validity_density.
double validity_density_serial(Width width, uint64_t sample_budget,
                               uint64_t seed);

/// The sampled 32-bit words used by validity_density (hw1 in the low half).
std::vector<uint32_t> density_samples(uint64_t sample_budget, uint64_t seed);

/// Disassembly in the assembler's syntax. PC-relative operands are printed
/// as resolved target addresses when `address` is given.
std::string disassemble(const Instruction &instr,
                        std::optional<uint32_t> address = std::nullopt);

} // namespace thumbfi
