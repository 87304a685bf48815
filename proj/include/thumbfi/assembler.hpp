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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace thumbfi {

struct SourceLocation {
    unsigned line = 0;
    unsigned column = 0;
    bool operator==(const SourceLocation &) const = default;
};

/// `.word` directive: a labelled literal pool entry holding a constant or the
/// address of a label.
struct DataWord {
    std::variant<uint32_t, std::string> value;
    bool operator==(const DataWord &) const = default;
};

/// One source line. A line carries an optional label and an optional item;
/// a label on a line of its own names the next instruction.
struct SourceLine {
    std::optional<std::string> label;
    std::variant<std::monostate, Instruction, DataWord> item;
    SourceLocation location;

    const Instruction *instruction() const {
        return std::get_if<Instruction>(&item);
    }
    const DataWord *data() const { return std::get_if<DataWord>(&item); }
    bool operator==(const SourceLine &) const = default;
};

struct SourceProgram {
    std::vector<SourceLine> lines;
    /// Entry label (`.entry`); the first instruction when absent.
    std::optional<std::string> entry;
    /// Error-handler label (`.error`) used by fault detection.
    std::optional<std::string> error_handler;

    bool defines(const std::string &label) const;
    bool operator==(const SourceProgram &) const = default;
};

/// Parse assembly text. Syntax: `mnemonic[.w|.n] operands`, `label:` or a
/// bare label line, `ldr rX, =value|=label`, `ldr rX, [pc, #off]`,
/// `.word value|label`, `.entry label`, `.error label`, `;` comments.
/// Errors carry "line:column: message".
SourceProgram parse(std::string_view text);

/// Render a program in the syntax accepted by parse().
std::string format_program(const SourceProgram &program);

struct PoolEntry {
    uint32_t address;
    uint32_t value;
    bool operator==(const PoolEntry &) const = default;
};

/// Laid-out program: code followed by one 4-aligned literal pool.
struct ProgramImage {
    uint32_t base = 0;
    /// Code, alignment padding and pool; the total size is a multiple of 4.
    std::vector<uint8_t> bytes;
    uint32_t code_size = 0;
    std::vector<PoolEntry> pool;
    std::map<std::string, uint32_t> symbols;
    /// Every instruction by address, with label operands resolved.
    std::map<uint32_t, Instruction> instructions;
    uint32_t entry = 0;
    std::optional<uint32_t> error_handler;

    uint32_t end() const { return base + uint32_t(bytes.size()); }
    bool contains(uint32_t address, uint32_t size = 1) const {
        return address >= base && address - base <= bytes.size() &&
               bytes.size() - (address - base) >= size;
    }
    uint16_t halfword(uint32_t address) const;
    uint32_t word(uint32_t address) const;
    uint32_t symbol(const std::string &name) const;

    bool operator==(const ProgramImage &) const = default;
};

constexpr uint32_t align4(uint32_t v) { return (v + 3) & ~3u; }

/// Size in bytes of each line's code contribution (0 for labels and data).
uint32_t code_size_of(const SourceLine &line);

/// Address of every line from a size-only pass (labels bind to the next
/// instruction, data lines get their pool address).
std::vector<uint32_t> line_addresses(const SourceProgram &program,
                                     uint32_t base);

/// Assign addresses, build the literal pool and resolve label operands.
/// Widths are never changed: an offset outside the declared encoding's range
/// is an error.
ProgramImage layout(const SourceProgram &program, uint32_t base = 0);

/// Convenience: parse + layout.
ProgramImage assemble(std::string_view text, uint32_t base = 0);

/// `address: hexbytes  ; disassembly` lines plus a symbol table section.
std::string dump_image(const ProgramImage &image);
/// Inverse of dump_image: rebuilds bytes, pool, symbols and the decoded
/// instruction index.
ProgramImage load_image(std::string_view text);
/// Heuristic used by the CLI to accept either assembly or an image dump.
bool looks_like_image_dump(std::string_view text);

/// Stable FNV-1a hash of the image bytes.
uint64_t image_hash(const ProgramImage &image);

} // namespace thumbfi
