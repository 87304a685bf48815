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

#include "thumbfi/assembler.hpp"
#include "thumbfi/encoding.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>
#include <sstream>

namespace thumbfi {

namespace {

std::string lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

bool is_identifier(std::string_view s) {
    if (s.empty() || !is_ident_start(s[0]) || s[0] == '.')
        return false;
    return std::all_of(s.begin(), s.end(), is_ident_char);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

class LineParser {
  public:
    LineParser(std::string_view raw, unsigned line) : raw_(raw), line_(line) {}

    [[noreturn]] void fail(size_t col, const std::string &msg) const {
        throw Error(std::to_string(line_) + ":" + std::to_string(col + 1) +
                    ": " + msg);
    }

    std::optional<int64_t> parse_number(std::string_view text) const {
        bool neg = false;
        if (!text.empty() && (text[0] == '-' || text[0] == '+')) {
            neg = text[0] == '-';
            text.remove_prefix(1);
        }
        if (text.empty())
            return std::nullopt;
        int base = 10;
        if (text.size() > 2 && text[0] == '0' &&
            (text[1] == 'x' || text[1] == 'X')) {
            base = 16;
            text.remove_prefix(2);
        }
        int64_t value = 0;
        for (char c : text) {
            int d;
            if (std::isdigit(static_cast<unsigned char>(c)))
                d = c - '0';
            else if (base == 16 && std::isxdigit(static_cast<unsigned char>(c)))
                d = std::tolower(static_cast<unsigned char>(c)) - 'a' + 10;
            else
                return std::nullopt;
            value = value * base + d;
            if (value > 0xFFFFFFFFLL)
                return std::nullopt;
        }
        return neg ? -value : value;
    }

    // Operand text with the column where it starts.
    struct Token {
        std::string_view text;
        size_t col;
    };

    std::vector<Token> split_operands(std::string_view s, size_t col) const {
        std::vector<Token> out;
        int depth = 0;
        size_t start = 0;
        for (size_t k = 0; k <= s.size(); ++k) {
            char c = k < s.size() ? s[k] : ',';
            if (c == '[')
                ++depth;
            else if (c == ']')
                --depth;
            if (c == ',' && depth == 0) {
                auto piece = s.substr(start, k - start);
                size_t lead = 0;
                while (lead < piece.size() &&
                       std::isspace(static_cast<unsigned char>(piece[lead])))
                    ++lead;
                auto t = trim(piece);
                if (t.empty())
                    fail(col + start, "empty operand");
                out.push_back({t, col + start + lead});
                start = k + 1;
            }
        }
        if (depth != 0)
            fail(col, "unbalanced brackets");
        return out;
    }

    Register reg(const Token &t) const {
        auto r = parse_register(t.text);
        if (!r)
            fail(t.col, "expected register, got '" + std::string(t.text) + "'");
        return *r;
    }

    uint32_t imm(const Token &t, bool allow_negative = false) const {
        if (t.text.empty() || t.text[0] != '#')
            fail(t.col, "expected immediate, got '" + std::string(t.text) + "'");
        auto v = parse_number(t.text.substr(1));
        if (!v || (*v < 0 && !allow_negative))
            fail(t.col, "bad immediate '" + std::string(t.text) + "'");
        return static_cast<uint32_t>(*v);
    }

    bool is_imm(const Token &t) const {
        return !t.text.empty() && t.text[0] == '#';
    }

    std::string label(const Token &t) const {
        if (!is_identifier(t.text))
            fail(t.col, "expected label, got '" + std::string(t.text) + "'");
        return std::string(t.text);
    }

    // [rn] or [rn, #imm]
    std::pair<Register, int32_t> mem(const Token &t) const {
        auto s = t.text;
        if (s.size() < 2 || s.front() != '[' || s.back() != ']')
            fail(t.col, "expected memory operand");
        auto inner = split_operands(s.substr(1, s.size() - 2), t.col + 1);
        if (inner.empty() || inner.size() > 2)
            fail(t.col, "bad memory operand");
        Register base = reg(inner[0]);
        int32_t off = 0;
        if (inner.size() == 2) {
            auto v = imm(inner[1], true);
            off = static_cast<int32_t>(v);
        }
        return {base, off};
    }

    SourceLine parse_line(SourceProgram &prog) {
        SourceLine out;
        std::string_view s = raw_;
        if (auto semi = s.find(';'); semi != std::string_view::npos)
            s = s.substr(0, semi);
        size_t pos = 0;
        auto skip_ws = [&] {
            while (pos < s.size() &&
                   std::isspace(static_cast<unsigned char>(s[pos])))
                ++pos;
        };
        skip_ws();
        if (pos >= s.size())
            return out;
        size_t word_start = pos;
        while (pos < s.size() && is_ident_char(s[pos]))
            ++pos;
        std::string_view word = s.substr(word_start, pos - word_start);
        if (word.empty())
            fail(word_start, "unexpected character '" + std::string(1, s[pos]) + "'");

        // label: prefix
        if (pos < s.size() && s[pos] == ':') {
            if (!is_identifier(word))
                fail(word_start, "bad label '" + std::string(word) + "'");
            out.label = std::string(word);
            ++pos;
            skip_ws();
            if (pos >= s.size())
                return out;
            word_start = pos;
            while (pos < s.size() && is_ident_char(s[pos]))
                ++pos;
            word = s.substr(word_start, pos - word_start);
            if (word.empty())
                fail(word_start, "expected mnemonic");
        }
        out.location = {line_, unsigned(word_start + 1)};
        std::string_view rest = s.substr(pos);
        size_t rest_col = pos;

        std::string mnem = lower(word);
        if (mnem == ".entry" || mnem == ".error") {
            auto ops = split_operands(trim(rest), rest_col + (rest.size() - trim(rest).size() ? 1 : 0));
            if (ops.size() != 1 || out.label)
                fail(word_start, mnem + " takes exactly one label");
            (mnem == ".entry" ? prog.entry : prog.error_handler) = label(ops[0]);
            return out;
        }
        if (mnem == ".word") {
            auto ops = split_operands(trim(rest), rest_col);
            if (ops.size() != 1)
                fail(word_start, ".word takes one value");
            if (auto v = parse_number(ops[0].text); v) {
                out.item = DataWord{static_cast<uint32_t>(*v)};
            } else {
                out.item = DataWord{label(ops[0])};
            }
            return out;
        }
        if (mnem.size() > 1 && mnem[0] == '.')
            fail(word_start, "unknown directive '" + std::string(word) + "'");

        // Bare identifier on its own line is a label (armasm style).
        if (trim(rest).empty() && !out.label && !is_mnemonic(mnem)) {
            if (!is_identifier(word))
                fail(word_start, "bad label '" + std::string(word) + "'");
            out.label = std::string(word);
            out.item = std::monostate{};
            return out;
        }

        std::optional<Width> forced;
        if (mnem.size() > 2 && mnem.compare(mnem.size() - 2, 2, ".w") == 0) {
            forced = Width::Wide32;
            mnem.resize(mnem.size() - 2);
        } else if (mnem.size() > 2 &&
                   mnem.compare(mnem.size() - 2, 2, ".n") == 0) {
            forced = Width::Narrow16;
            mnem.resize(mnem.size() - 2);
        }
        if (!is_mnemonic(mnem))
            fail(word_start, "unknown mnemonic '" + std::string(word) + "'");

        size_t lead = 0;
        while (lead < rest.size() &&
               std::isspace(static_cast<unsigned char>(rest[lead])))
            ++lead;
        auto ops = trim(rest).empty()
                       ? std::vector<Token>{}
                       : split_operands(trim(rest), rest_col + lead);
        try {
            Instruction instr = build(mnem, ops, word_start);
            Width w = forced ? *forced : preferred_width(instr);
            if (forced == Width::Wide32 && !wide_possible(instr))
                fail(word_start, "'" + mnem + "' has no 32-bit encoding for these operands");
            if (forced == Width::Narrow16 && !narrow_possible(instr))
                fail(word_start, "'" + mnem + "' has no 16-bit encoding for these operands");
            if (!forced && w == Width::Wide32 && !wide_possible(instr))
                fail(word_start, "operands of '" + mnem + "' are not encodable");
            out.item = instr.with_width(w);
        } catch (const Error &e) {
            std::string msg = e.what();
            if (!msg.empty() && std::isdigit(static_cast<unsigned char>(msg[0])))
                throw;
            fail(word_start, msg);
        }
        return out;
    }

    static bool is_mnemonic(const std::string &m) {
        static const std::set<std::string> known = {
            "mov", "movs", "add", "adds", "sub", "subs", "adr", "ldr", "str",
            "cmp", "beq", "bne", "b", "bl", "bx", "msr", "nop", "halt"};
        return known.count(m) != 0;
    }

    Instruction build(const std::string &m, const std::vector<Token> &ops,
                      size_t col) const {
        auto need = [&](size_t lo, size_t hi) {
            if (ops.size() < lo || ops.size() > hi)
                fail(col, "wrong number of operands for '" + m + "'");
        };
        const Width w = Width::Narrow16; // replaced by the caller
        if (m == "nop" || m == "halt") {
            need(0, 0);
            return Instruction(m == "nop" ? Op::Nop : Op::Halt, {}, w);
        }
        if (m == "mov" || m == "movs") {
            need(2, 2);
            Op op = m == "mov" ? Op::Mov : Op::Movs;
            Operand src = is_imm(ops[1]) ? Operand(Immediate{imm(ops[1])})
                                         : Operand(reg(ops[1]));
            return Instruction(op, {reg(ops[0]), src}, w);
        }
        if (m == "add" || m == "adds" || m == "sub" || m == "subs") {
            need(2, 3);
            Op op = m == "add"    ? Op::Add
                    : m == "adds" ? Op::Adds
                    : m == "sub"  ? Op::Sub
                                  : Op::Subs;
            Register rd = reg(ops[0]);
            Register rn = ops.size() == 3 ? reg(ops[1]) : rd;
            const Token &last = ops.back();
            Operand src = is_imm(last) ? Operand(Immediate{imm(last)})
                                       : Operand(reg(last));
            return Instruction(op, {rd, rn, src}, w);
        }
        if (m == "cmp") {
            need(2, 2);
            Operand src = is_imm(ops[1]) ? Operand(Immediate{imm(ops[1])})
                                         : Operand(reg(ops[1]));
            return Instruction(Op::Cmp, {reg(ops[0]), src}, w);
        }
        if (m == "adr") {
            need(2, 2);
            return Instruction(Op::Adr, {reg(ops[0]), LabelRef{label(ops[1])}},
                               w);
        }
        if (m == "ldr" || m == "str") {
            need(2, 2);
            Register rt = reg(ops[0]);
            auto t = ops[1].text;
            if (m == "ldr" && !t.empty() && t[0] == '=') {
                auto v = parse_number(t.substr(1));
                if (v)
                    return Instruction(
                        Op::LdrLiteral,
                        {rt, LiteralConst{static_cast<uint32_t>(*v)}}, w);
                Token lt{t.substr(1), ops[1].col + 1};
                return Instruction(Op::LdrLiteral,
                                   {rt, LiteralAddress{label(lt)}}, w);
            }
            if (!t.empty() && t[0] == '[') {
                auto inner = split_operands(t.substr(1, t.size() - 2), ops[1].col + 1);
                if (!inner.empty() && lower(inner[0].text) == "pc") {
                    if (m == "str")
                        fail(ops[1].col, "str to a pc-relative address");
                    auto [base, off] = mem(ops[1]);
                    (void)base;
                    return Instruction(Op::LdrLiteral, {rt, PcOffset{off}}, w);
                }
                auto [base, off] = mem(ops[1]);
                return Instruction(m == "ldr" ? Op::LdrImm : Op::StrImm,
                                   {rt, MemRef{base, off}}, w);
            }
            if (m == "str")
                fail(ops[1].col, "expected memory operand");
            return Instruction(Op::LdrLiteral, {rt, LabelRef{label(ops[1])}}, w);
        }
        if (m == "b" || m == "bl" || m == "beq" || m == "bne") {
            need(1, 1);
            LabelRef target{label(ops[0])};
            if (m == "b")
                return Instruction(Op::B, {target}, w);
            if (m == "bl")
                return Instruction(Op::Bl, {target}, w);
            return Instruction(Op::BCond, {target}, w,
                               m == "beq" ? Cond::Eq : Cond::Ne);
        }
        if (m == "bx") {
            need(1, 1);
            return Instruction(Op::Bx, {reg(ops[0])}, w);
        }
        if (m == "msr") {
            need(2, 2);
            auto s = parse_special_register(ops[0].text);
            if (!s)
                fail(ops[0].col, "unknown special register '" +
                                     std::string(ops[0].text) + "'");
            return Instruction(Op::Msr, {*s, reg(ops[1])}, w);
        }
        fail(col, "unknown mnemonic '" + m + "'");
    }

  private:
    std::string_view raw_;
    unsigned line_;
};

} // namespace

bool SourceProgram::defines(const std::string &label) const {
    return std::any_of(lines.begin(), lines.end(),
                       [&](const SourceLine &l) { return l.label == label; });
}

SourceProgram parse(std::string_view text) {
    SourceProgram prog;
    std::map<std::string, unsigned> seen;
    unsigned line_no = 0;
    size_t start = 0;
    while (start <= text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string_view::npos)
            end = text.size();
        ++line_no;
        std::string_view raw = text.substr(start, end - start);
        if (!raw.empty() && raw.back() == '\r')
            raw.remove_suffix(1);
        LineParser lp(raw, line_no);
        SourceLine line = lp.parse_line(prog);
        if (line.label) {
            auto [it, fresh] = seen.emplace(*line.label, line_no);
            if (!fresh)
                throw Error(std::to_string(line_no) + ":1: duplicate label '" +
                            *line.label + "' (first defined on line " +
                            std::to_string(it->second) + ")");
        }
        if (line.label || !std::holds_alternative<std::monostate>(line.item)) {
            if (line.location.line == 0)
                line.location = {line_no, 1};
            // A label alone on the line before a .word names the word.
            if (line.data() && !line.label && !prog.lines.empty() &&
                prog.lines.back().label &&
                std::holds_alternative<std::monostate>(prog.lines.back().item)) {
                line.label = prog.lines.back().label;
                prog.lines.pop_back();
            }
            prog.lines.push_back(std::move(line));
        }
        if (end == text.size())
            break;
        start = end + 1;
    }

    auto check = [&](const std::string &name, const SourceLocation &loc) {
        if (!seen.count(name))
            throw Error(std::to_string(loc.line) + ":" +
                        std::to_string(loc.column) + ": undefined label '" +
                        name + "'");
    };
    for (const auto &l : prog.lines) {
        if (auto i = l.instruction())
            if (auto ref = i->label_reference())
                check(*ref, l.location);
        if (auto d = l.data())
            if (auto name = std::get_if<std::string>(&d->value))
                check(*name, l.location);
    }
    if (prog.entry)
        check(*prog.entry, {0, 0});
    if (prog.error_handler)
        check(*prog.error_handler, {0, 0});
    return prog;
}

std::string format_program(const SourceProgram &program) {
    std::ostringstream out;
    if (program.entry)
        out << ".entry " << *program.entry << "\n";
    if (program.error_handler)
        out << ".error " << *program.error_handler << "\n";
    for (const auto &line : program.lines) {
        if (auto d = line.data()) {
            if (line.label)
                out << *line.label << ":";
            out << " .word ";
            if (auto v = std::get_if<uint32_t>(&d->value)) {
                char buf[16];
                std::snprintf(buf, sizeof buf, "0x%08X", *v);
                out << buf;
            } else {
                out << std::get<std::string>(d->value);
            }
            out << "\n";
            continue;
        }
        if (line.label)
            out << *line.label << ":\n";
        if (auto i = line.instruction())
            out << "    " << disassemble(*i) << "\n";
    }
    return out.str();
}

uint16_t ProgramImage::halfword(uint32_t address) const {
    if (!contains(address, 2))
        throw Error("address " + hex32(address) + " outside image");
    size_t off = address - base;
    return uint16_t(bytes[off] | bytes[off + 1] << 8);
}

uint32_t ProgramImage::word(uint32_t address) const {
    if (!contains(address, 4))
        throw Error("address " + hex32(address) + " outside image");
    size_t off = address - base;
    return uint32_t(bytes[off]) | uint32_t(bytes[off + 1]) << 8 |
           uint32_t(bytes[off + 2]) << 16 | uint32_t(bytes[off + 3]) << 24;
}

uint32_t ProgramImage::symbol(const std::string &name) const {
    auto it = symbols.find(name);
    if (it == symbols.end())
        throw Error("undefined label '" + name + "'");
    return it->second;
}

uint32_t code_size_of(const SourceLine &line) {
    if (auto i = line.instruction())
        return width_bytes(i->width());
    return 0;
}

namespace {

bool needs_pool_entry(const Instruction &i) {
    return i.op() == Op::LdrLiteral &&
           (i.holds<LiteralConst>(1) || i.holds<LiteralAddress>(1));
}

struct Placement {
    std::vector<uint32_t> line_address;
    std::vector<std::optional<size_t>> pool_slot; // per line
    uint32_t code_end;
    uint32_t pool_base;
    size_t pool_count;
    std::map<std::string, uint32_t> symbols;
};

Placement place(const SourceProgram &program, uint32_t base) {
    Placement p;
    p.line_address.resize(program.lines.size());
    p.pool_slot.resize(program.lines.size());
    uint32_t addr = base;
    size_t slots = 0;
    for (size_t k = 0; k < program.lines.size(); ++k) {
        const auto &line = program.lines[k];
        if (line.data() || (line.instruction() && needs_pool_entry(*line.instruction())))
            p.pool_slot[k] = slots++;
        if (!line.data()) {
            p.line_address[k] = addr;
            addr += code_size_of(line);
        }
    }
    p.code_end = addr;
    p.pool_base = align4(addr);
    p.pool_count = slots;
    for (size_t k = 0; k < program.lines.size(); ++k) {
        if (program.lines[k].data())
            p.line_address[k] = p.pool_base + uint32_t(4 * *p.pool_slot[k]);
        if (program.lines[k].label)
            p.symbols[*program.lines[k].label] = p.line_address[k];
    }
    return p;
}

[[noreturn]] void layout_error(const SourceLine &line, const std::string &msg) {
    throw Error(std::to_string(line.location.line) + ":" +
                std::to_string(line.location.column) + ": " + msg);
}

} // namespace

std::vector<uint32_t> line_addresses(const SourceProgram &program,
                                     uint32_t base) {
    return place(program, base).line_address;
}

ProgramImage layout(const SourceProgram &program, uint32_t base) {
    if (base % 4 != 0)
        throw Error("image base must be 4-byte aligned");
    Placement p = place(program, base);
    ProgramImage img;
    img.base = base;
    img.code_size = p.code_end - base;
    img.symbols = p.symbols;

    auto lookup = [&](const SourceLine &line, const std::string &name) {
        auto it = p.symbols.find(name);
        if (it == p.symbols.end())
            layout_error(line, "undefined label '" + name + "'");
        return it->second;
    };

    std::vector<uint32_t> pool_values(p.pool_count, 0);
    for (size_t k = 0; k < program.lines.size(); ++k) {
        const auto &line = program.lines[k];
        if (!p.pool_slot[k])
            continue;
        uint32_t value = 0;
        if (auto d = line.data()) {
            if (auto v = std::get_if<uint32_t>(&d->value))
                value = *v;
            else
                value = lookup(line, std::get<std::string>(d->value));
        } else {
            const auto &i = *line.instruction();
            if (i.holds<LiteralConst>(1))
                value = i.get<LiteralConst>(1).value;
            else
                value = lookup(line, i.get<LiteralAddress>(1).label);
        }
        pool_values[*p.pool_slot[k]] = value;
    }

    uint32_t total = p.pool_base - base + uint32_t(4 * p.pool_count);
    total = align4(total);
    img.bytes.assign(total, 0);
    // Alignment padding between code and pool is filled with nop.
    for (uint32_t a = p.code_end; a + 2 <= p.pool_base; a += 2) {
        img.bytes[a - base] = 0x00;
        img.bytes[a - base + 1] = 0xBF;
    }

    for (size_t k = 0; k < program.lines.size(); ++k) {
        const auto &line = program.lines[k];
        const Instruction *ip = line.instruction();
        if (!ip)
            continue;
        uint32_t addr = p.line_address[k];
        Instruction instr = *ip;
        try {
            switch (instr.op()) {
            case Op::B:
            case Op::BCond:
            case Op::Bl:
                if (instr.holds<LabelRef>(0)) {
                    uint32_t target = lookup(line, instr.get<LabelRef>(0).name);
                    instr = instr.with_operand(
                        0, PcOffset{int32_t(target - (addr + 4))});
                }
                break;
            case Op::Adr:
                if (instr.holds<LabelRef>(1)) {
                    uint32_t target = lookup(line, instr.get<LabelRef>(1).name);
                    instr = instr.with_operand(
                        1, PcOffset{int32_t(target - ((addr + 4) & ~3u))});
                }
                break;
            case Op::LdrLiteral: {
                std::optional<uint32_t> target;
                if (instr.holds<LabelRef>(1))
                    target = lookup(line, instr.get<LabelRef>(1).name);
                else if (p.pool_slot[k])
                    target = p.pool_base + uint32_t(4 * *p.pool_slot[k]);
                uint32_t pc_base = (addr + 4) & ~3u;
                if (target) {
                    instr = instr.with_operand(
                        1, PcOffset{int32_t(*target - pc_base)});
                } else {
                    target = pc_base + uint32_t(instr.get<PcOffset>(1).value);
                }
                if (*target % 4 != 0)
                    layout_error(line, "misaligned literal at " + hex32(*target));
                break;
            }
            default:
                break;
            }
            auto enc = encode(instr).bytes();
            std::copy(enc.begin(), enc.end(), img.bytes.begin() + (addr - base));
        } catch (const Error &e) {
            std::string msg = e.what();
            if (!msg.empty() && std::isdigit(static_cast<unsigned char>(msg[0])))
                throw;
            layout_error(line, msg);
        }
        img.instructions.emplace(addr, instr);
    }

    for (size_t s = 0; s < p.pool_count; ++s) {
        uint32_t a = p.pool_base + uint32_t(4 * s);
        img.pool.push_back({a, pool_values[s]});
        for (unsigned b = 0; b < 4; ++b)
            img.bytes[a - base + b] = uint8_t(pool_values[s] >> (8 * b));
    }

    if (program.entry)
        img.entry = img.symbol(*program.entry);
    else
        img.entry = base;
    if (program.error_handler)
        img.error_handler = img.symbol(*program.error_handler);
    return img;
}

ProgramImage assemble(std::string_view text, uint32_t base) {
    return layout(parse(text), base);
}

std::string dump_image(const ProgramImage &image) {
    std::ostringstream out;
    char buf[64];
    std::snprintf(buf, sizeof buf, "image base %08x size %08x entry %08x",
                  image.base, unsigned(image.bytes.size()), image.entry);
    out << buf;
    if (image.error_handler) {
        std::snprintf(buf, sizeof buf, " error %08x", *image.error_handler);
        out << buf;
    }
    out << "\n";

    auto emit = [&](uint32_t addr, unsigned n, const std::string &text) {
        std::snprintf(buf, sizeof buf, "%08x:", addr);
        out << buf;
        for (unsigned b = 0; b < n; ++b) {
            std::snprintf(buf, sizeof buf, " %02x", image.bytes[addr - image.base + b]);
            out << buf;
        }
        out << "  ; " << text << "\n";
    };

    uint32_t code_end = image.base + image.code_size;
    uint32_t addr = image.base;
    for (const auto &[a, instr] : image.instructions) {
        emit(a, width_bytes(instr.width()), disassemble(instr, a));
        addr = a + width_bytes(instr.width());
    }
    (void)addr;
    for (uint32_t a = code_end; a + 2 <= align4(code_end) && a < image.end(); a += 2)
        emit(a, 2, ".align");
    for (const auto &e : image.pool) {
        std::snprintf(buf, sizeof buf, ".word 0x%08x", e.value);
        emit(e.address, 4, buf);
    }
    out << "symbols:\n";
    std::vector<std::pair<uint32_t, std::string>> syms;
    for (const auto &[name, a] : image.symbols)
        syms.emplace_back(a, name);
    std::sort(syms.begin(), syms.end());
    for (const auto &[a, name] : syms) {
        std::snprintf(buf, sizeof buf, "%08x ", a);
        out << buf << name << "\n";
    }
    return out.str();
}

bool looks_like_image_dump(std::string_view text) {
    auto t = trim(text);
    return t.rfind("image base ", 0) == 0;
}

ProgramImage load_image(std::string_view text) {
    ProgramImage img;
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line.rfind("image base ", 0) != 0)
        throw Error("not an image dump: missing header");
    {
        std::istringstream h(line);
        std::string tok;
        unsigned long size = 0;
        while (h >> tok) {
            std::string val;
            if (tok == "base" || tok == "size" || tok == "entry" || tok == "error") {
                if (!(h >> val))
                    throw Error("image dump: truncated header");
                unsigned long v = std::stoul(val, nullptr, 16);
                if (tok == "base")
                    img.base = uint32_t(v);
                else if (tok == "size")
                    size = v;
                else if (tok == "entry")
                    img.entry = uint32_t(v);
                else
                    img.error_handler = uint32_t(v);
            }
        }
        img.bytes.assign(size, 0);
    }
    bool in_symbols = false;
    std::optional<uint32_t> pool_start;
    unsigned line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        auto t = trim(line);
        if (t.empty())
            continue;
        if (t[0] == ';')
            continue;
        if (t == "symbols:") {
            in_symbols = true;
            continue;
        }
        try {
            if (in_symbols) {
                std::istringstream s{std::string(t)};
                std::string addr, name;
                s >> addr >> name;
                img.symbols[name] = uint32_t(std::stoul(addr, nullptr, 16));
                continue;
            }
            auto colon = t.find(':');
            auto semi = t.find(';');
            if (colon == std::string_view::npos)
                throw Error("expected 'address:'");
            uint32_t addr = uint32_t(std::stoul(std::string(t.substr(0, colon)), nullptr, 16));
            std::istringstream hexes{std::string(t.substr(colon + 1, semi - colon - 1))};
            std::string byte;
            uint32_t a = addr;
            while (hexes >> byte) {
                if (!img.contains(a))
                    throw Error("byte outside declared image size");
                img.bytes[a - img.base] = uint8_t(std::stoul(byte, nullptr, 16));
                ++a;
            }
            std::string comment = semi == std::string_view::npos
                                      ? ""
                                      : std::string(trim(t.substr(semi + 1)));
            if (comment.rfind(".word", 0) == 0) {
                if (!pool_start)
                    pool_start = addr;
                img.pool.push_back({addr, img.word(addr)});
            } else if (comment == ".align") {
                if (!pool_start)
                    img.code_size = std::max(img.code_size, addr - img.base);
            } else if (!pool_start) {
                img.code_size = a - img.base;
            }
        } catch (const std::exception &e) {
            throw Error("image dump line " + std::to_string(line_no) + ": " +
                        e.what());
        }
    }
    // Rebuild the instruction index by decoding the code region linearly.
    uint32_t a = img.base, code_end = img.base + img.code_size;
    while (a + 2 <= code_end) {
        uint16_t hw1 = img.halfword(a);
        std::optional<uint16_t> hw2;
        if (is_wide_prefix(hw1) && a + 4 <= code_end)
            hw2 = img.halfword(a + 2);
        auto d = decode_one(hw1, hw2, a);
        if (d.instruction)
            img.instructions.emplace(a, *d.instruction);
        a += width_bytes(d.width);
    }
    return img;
}

uint64_t image_hash(const ProgramImage &image) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](uint8_t b) {
        h ^= b;
        h *= 0x100000001b3ULL;
    };
    for (unsigned s = 0; s < 4; ++s)
        mix(uint8_t(image.base >> (8 * s)));
    for (auto b : image.bytes)
        mix(b);
    return h;
}

} // namespace thumbfi
