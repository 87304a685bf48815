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

#include "thumbfi/encoding.hpp"

#include <bit>
#include <cstdio>
#include <random>
#include <sstream>

namespace thumbfi {

namespace {

constexpr unsigned kCondEq = 0;
constexpr unsigned kCondNe = 1;

// Data-processing opcodes shared by the modified-immediate and
// shifted-register 32-bit forms.
constexpr unsigned kDpMov = 2;
constexpr unsigned kDpAdd = 8;
constexpr unsigned kDpSub = 13;

Encoding narrow(uint16_t hw) { return Encoding{Width::Narrow16, {hw, 0}}; }
Encoding wide(uint16_t hw1, uint16_t hw2) {
    return Encoding{Width::Wide32, {hw1, hw2}};
}

[[noreturn]] void not_encodable(const Instruction &i, const char *why) {
    throw Error("cannot encode '" + disassemble(i) + "' as " +
                (i.width() == Width::Wide32 ? "32-bit" : "16-bit") + ": " +
                why);
}

int32_t sign_extend(uint32_t value, unsigned bits) {
    uint32_t m = 1u << (bits - 1);
    return static_cast<int32_t>((value ^ m) - m);
}

// i:imm3:imm8 packing of a 12-bit field into a 32-bit encoding.
void pack_imm12(uint16_t &hw1, uint16_t &hw2, uint32_t imm12) {
    hw1 |= uint16_t(((imm12 >> 11) & 1) << 10);
    hw2 |= uint16_t(((imm12 >> 8) & 7) << 12 | (imm12 & 0xFF));
}

uint32_t unpack_imm12(uint16_t hw1, uint16_t hw2) {
    return ((hw1 >> 10) & 1) << 11 | ((hw2 >> 12) & 7) << 8 | (hw2 & 0xFF);
}

Encoding dp_modified(unsigned op, bool s, unsigned rn, unsigned rd,
                     uint16_t imm12) {
    uint16_t hw1 = uint16_t(0xF000 | op << 5 | (s ? 1 : 0) << 4 | rn);
    uint16_t hw2 = uint16_t(rd << 8);
    pack_imm12(hw1, hw2, imm12);
    return wide(hw1, hw2);
}

Encoding dp_plain(uint16_t base, unsigned rn, unsigned rd, uint32_t imm12) {
    uint16_t hw1 = uint16_t(base | rn);
    uint16_t hw2 = uint16_t(rd << 8);
    pack_imm12(hw1, hw2, imm12);
    return wide(hw1, hw2);
}

Encoding dp_register(unsigned op, bool s, unsigned rn, unsigned rd,
                     unsigned rm) {
    return wide(uint16_t(0xEA00 | op << 5 | (s ? 1 : 0) << 4 | rn),
                uint16_t(rd << 8 | rm));
}

Encoding encode_branch(const Instruction &i, int32_t off) {
    if (off % 2 != 0)
        not_encodable(i, "odd branch offset");
    uint32_t u = static_cast<uint32_t>(off);
    if (i.width() == Width::Narrow16) {
        if (i.op() == Op::BCond) {
            if (off < -256 || off > 254)
                not_encodable(i, "offset out of range for width");
            unsigned cond = i.cond() == Cond::Eq ? kCondEq : kCondNe;
            return narrow(uint16_t(0xD000 | cond << 8 | ((u >> 1) & 0xFF)));
        }
        if (i.op() == Op::B) {
            if (off < -2048 || off > 2046)
                not_encodable(i, "offset out of range for width");
            return narrow(uint16_t(0xE000 | ((u >> 1) & 0x7FF)));
        }
        not_encodable(i, "no 16-bit encoding");
    }
    unsigned s = off < 0 ? 1 : 0;
    if (i.op() == Op::BCond) {
        if (off < -(1 << 20) || off >= (1 << 20))
            not_encodable(i, "offset out of range for width");
        unsigned cond = i.cond() == Cond::Eq ? kCondEq : kCondNe;
        unsigned j1 = (u >> 18) & 1, j2 = (u >> 19) & 1;
        return wide(uint16_t(0xF000 | s << 10 | cond << 6 | ((u >> 12) & 0x3F)),
                    uint16_t(0x8000 | j1 << 13 | j2 << 11 | ((u >> 1) & 0x7FF)));
    }
    if (off < -(1 << 24) || off >= (1 << 24))
        not_encodable(i, "offset out of range for width");
    unsigned i1 = (u >> 23) & 1, i2 = (u >> 22) & 1;
    unsigned j1 = (~(i1 ^ s)) & 1, j2 = (~(i2 ^ s)) & 1;
    uint16_t hw2 = i.op() == Op::Bl ? 0xD000 : 0x9000;
    return wide(uint16_t(0xF000 | s << 10 | ((u >> 12) & 0x3FF)),
                uint16_t(hw2 | j1 << 13 | j2 << 11 | ((u >> 1) & 0x7FF)));
}

int32_t target_offset(const Instruction &i, size_t idx) {
    if (!i.holds<PcOffset>(idx))
        throw Error("cannot encode '" + disassemble(i) +
                    "': unresolved label operand");
    return i.get<PcOffset>(idx).value;
}

// adr and ldr (literal) share the Align(PC,4)-relative offset rules.
Encoding encode_pc_relative(const Instruction &i) {
    unsigned rd = i.reg(0).index();
    int32_t off = target_offset(i, 1);
    bool is_ldr = i.op() == Op::LdrLiteral;
    if (i.width() == Width::Narrow16) {
        if (!i.reg(0).is_low())
            not_encodable(i, "high register");
        if (off < 0 || off > 1020 || off % 4 != 0)
            not_encodable(i, "offset out of range for width");
        uint16_t base = is_ldr ? 0x4800 : 0xA000;
        return narrow(uint16_t(base | rd << 8 | off / 4));
    }
    if (off < -4095 || off > 4095)
        not_encodable(i, "offset out of range for width");
    uint32_t mag = static_cast<uint32_t>(off < 0 ? -off : off);
    if (is_ldr)
        return wide(off < 0 ? 0xF85F : 0xF8DF, uint16_t(rd << 12 | mag));
    return dp_plain(off < 0 ? 0xF2A0 : 0xF200, 15, rd, mag);
}

Encoding encode_load_store(const Instruction &i) {
    bool load = i.op() == Op::LdrImm;
    unsigned rt = i.reg(0).index();
    auto m = i.get<MemRef>(1);
    unsigned rn = m.base.index();
    if (i.width() == Width::Narrow16) {
        if (!i.reg(0).is_low() || m.offset < 0 || m.offset % 4 != 0)
            not_encodable(i, "operands need a 32-bit encoding");
        if (m.base.is_low() && m.offset <= 124)
            return narrow(uint16_t((load ? 0x6800 : 0x6000) |
                                   (m.offset / 4) << 6 | rn << 3 | rt));
        if (rn == Register::SP && m.offset <= 1020)
            return narrow(
                uint16_t((load ? 0x9800 : 0x9000) | rt << 8 | m.offset / 4));
        not_encodable(i, "offset out of range for width");
    }
    if (m.offset >= 0 && m.offset <= 4095)
        return wide(uint16_t((load ? 0xF8D0 : 0xF8C0) | rn),
                    uint16_t(rt << 12 | m.offset));
    if (m.offset < 0 && m.offset >= -255)
        return wide(uint16_t((load ? 0xF850 : 0xF840) | rn),
                    uint16_t(rt << 12 | 0x0C00 | -m.offset));
    not_encodable(i, "offset out of range for width");
}

Encoding encode_mov(const Instruction &i) {
    bool s = i.op() == Op::Movs;
    unsigned rd = i.reg(0).index();
    if (i.holds<Register>(1)) {
        unsigned rm = i.reg(1).index();
        if (i.width() == Width::Narrow16) {
            if (!s)
                return narrow(uint16_t(0x4600 | (rd >> 3) << 7 | rm << 3 |
                                       (rd & 7)));
            if (rd > 7 || rm > 7)
                not_encodable(i, "high register");
            return narrow(uint16_t(rm << 3 | rd));
        }
        return dp_register(kDpMov, s, 15, rd, rm);
    }
    uint32_t imm = i.get<Immediate>(1).value;
    if (i.width() == Width::Narrow16) {
        if (!s)
            not_encodable(i, "mov with immediate has no 16-bit form");
        if (rd > 7 || imm > 255)
            not_encodable(i, "operands need a 32-bit encoding");
        return narrow(uint16_t(0x2000 | rd << 8 | imm));
    }
    if (auto m = encode_modified_immediate(imm))
        return dp_modified(kDpMov, s, 15, rd, *m);
    if (!s && imm <= 0xFFFF) {
        uint16_t hw1 = uint16_t(0xF240 | ((imm >> 11) & 1) << 10 | imm >> 12);
        uint16_t hw2 = uint16_t(((imm >> 8) & 7) << 12 | rd << 8 | (imm & 0xFF));
        return wide(hw1, hw2);
    }
    not_encodable(i, "immediate not representable");
}

Encoding encode_add_sub(const Instruction &i) {
    bool add = i.op() == Op::Add || i.op() == Op::Adds;
    bool s = i.op() == Op::Adds || i.op() == Op::Subs;
    unsigned rd = i.reg(0).index(), rn = i.reg(1).index();
    bool low = i.reg(0).is_low() && i.reg(1).is_low();
    if (i.holds<Register>(2)) {
        unsigned rm = i.reg(2).index();
        if (i.width() == Width::Narrow16) {
            if (s) {
                if (!low || rm > 7)
                    not_encodable(i, "high register");
                return narrow(uint16_t((add ? 0x1800 : 0x1A00) | rm << 6 |
                                       rn << 3 | rd));
            }
            if (add && rd == rn)
                return narrow(uint16_t(0x4400 | (rd >> 3) << 7 | rm << 3 |
                                       (rd & 7)));
            not_encodable(i, "no 16-bit form for these operands");
        }
        return dp_register(add ? kDpAdd : kDpSub, s, rn, rd, rm);
    }
    uint32_t imm = i.get<Immediate>(2).value;
    if (i.width() == Width::Narrow16) {
        if (s) {
            if (!low)
                not_encodable(i, "high register");
            if (imm <= 7)
                return narrow(uint16_t((add ? 0x1C00 : 0x1E00) | imm << 6 |
                                       rn << 3 | rd));
            if (rd == rn && imm <= 255)
                return narrow(uint16_t((add ? 0x3000 : 0x3800) | rd << 8 | imm));
            not_encodable(i, "immediate out of range for width");
        }
        if (imm % 4 == 0 && rn == Register::SP) {
            if (add && rd < 8 && imm <= 1020)
                return narrow(uint16_t(0xA800 | rd << 8 | imm / 4));
            if (rd == Register::SP && imm <= 508)
                return narrow(uint16_t((add ? 0xB000 : 0xB080) | imm / 4));
        }
        not_encodable(i, "no 16-bit form for these operands");
    }
    if (auto m = encode_modified_immediate(imm))
        return dp_modified(add ? kDpAdd : kDpSub, s, rn, rd, *m);
    if (!s && imm <= 4095)
        return dp_plain(add ? 0xF200 : 0xF2A0, rn, rd, imm);
    not_encodable(i, "immediate not representable");
}

Encoding encode_cmp(const Instruction &i) {
    unsigned rn = i.reg(0).index();
    if (i.holds<Register>(1)) {
        unsigned rm = i.reg(1).index();
        if (i.width() == Width::Narrow16) {
            if (rn < 8 && rm < 8)
                return narrow(uint16_t(0x4280 | rm << 3 | rn));
            return narrow(uint16_t(0x4500 | (rn >> 3) << 7 | rm << 3 | (rn & 7)));
        }
        return dp_register(kDpSub, true, rn, 15, rm);
    }
    uint32_t imm = i.get<Immediate>(1).value;
    if (i.width() == Width::Narrow16) {
        if (rn > 7 || imm > 255)
            not_encodable(i, "operands need a 32-bit encoding");
        return narrow(uint16_t(0x2800 | rn << 8 | imm));
    }
    if (auto m = encode_modified_immediate(imm))
        return dp_modified(kDpSub, true, rn, 15, *m);
    not_encodable(i, "immediate not representable");
}

} // namespace

std::optional<uint16_t> encode_modified_immediate(uint32_t v) {
    if (v <= 0xFF)
        return uint16_t(v);
    uint32_t b0 = v & 0xFF, b1 = (v >> 8) & 0xFF;
    if (b0 != 0 && v == (b0 | b0 << 16))
        return uint16_t(0x100 | b0);
    if (b1 != 0 && v == (b1 << 8 | b1 << 24))
        return uint16_t(0x200 | b1);
    if (b0 != 0 && v == b0 * 0x01010101u)
        return uint16_t(0x300 | b0);
    for (unsigned rot = 8; rot < 32; ++rot) {
        uint32_t unrotated = std::rotl(v, static_cast<int>(rot));
        if (unrotated >= 0x80 && unrotated <= 0xFF)
            return uint16_t(rot << 7 | (unrotated & 0x7F));
    }
    return std::nullopt;
}

uint32_t expand_modified_immediate(uint16_t imm12) {
    uint32_t imm8 = imm12 & 0xFF;
    if ((imm12 >> 10) == 0) {
        switch ((imm12 >> 8) & 3) {
        case 0:
            return imm8;
        case 1:
            return imm8 | imm8 << 16;
        case 2:
            return imm8 << 8 | imm8 << 24;
        default:
            return imm8 * 0x01010101u;
        }
    }
    uint32_t unrotated = 0x80 | (imm12 & 0x7F);
    return std::rotr(unrotated, static_cast<int>(imm12 >> 7));
}

std::vector<uint8_t> Encoding::bytes() const {
    std::vector<uint8_t> out;
    unsigned n = width == Width::Wide32 ? 2 : 1;
    for (unsigned h = 0; h < n; ++h) {
        out.push_back(uint8_t(halfwords[h] & 0xFF));
        out.push_back(uint8_t(halfwords[h] >> 8));
    }
    return out;
}

Encoding encode(const Instruction &i) {
    bool w = i.width() == Width::Wide32;
    switch (i.op()) {
    case Op::Nop:
        return w ? wide(0xF3AF, 0x8000) : narrow(0xBF00);
    case Op::Halt:
        if (w)
            not_encodable(i, "halt has no 32-bit form");
        return narrow(0xBE00);
    case Op::Mov:
    case Op::Movs:
        return encode_mov(i);
    case Op::Add:
    case Op::Adds:
    case Op::Sub:
    case Op::Subs:
        return encode_add_sub(i);
    case Op::Cmp:
        return encode_cmp(i);
    case Op::Adr:
    case Op::LdrLiteral:
        return encode_pc_relative(i);
    case Op::LdrImm:
    case Op::StrImm:
        return encode_load_store(i);
    case Op::BCond:
    case Op::B:
    case Op::Bl:
        return encode_branch(i, target_offset(i, 0));
    case Op::Bx:
        if (w)
            not_encodable(i, "bx has no 32-bit form");
        return narrow(uint16_t(0x4700 | i.reg(0).index() << 3));
    case Op::Msr:
        if (!w)
            not_encodable(i, "msr has no 16-bit form");
        return wide(uint16_t(0xF380 | i.reg(1).index()),
                    uint16_t(0x8800 | special_register_sysm(
                                          i.get<SpecialRegister>(0))));
    }
    throw Error("unknown instruction");
}

std::vector<uint8_t> encode_bytes(const Instruction &instr) {
    return encode(instr).bytes();
}

std::string decode_class_name(DecodeClass cls) {
    switch (cls) {
    case DecodeClass::Subset:
        return "subset";
    case DecodeClass::Unsupported:
        return "unsupported";
    case DecodeClass::Undefined:
        return "undefined";
    case DecodeClass::Incomplete:
        return "incomplete";
    }
    return "?";
}

bool valid_narrow(uint16_t hw) {
    if (is_wide_prefix(hw))
        return false;
    if ((hw & 0xF000) == 0xB000) {
        unsigned op = (hw >> 5) & 0x7F;
        if ((op & 0x70) == 0x00 || (op & 0x70) == 0x10)
            return true; // add/sub sp, cbz, extends
        if ((op & 0x70) == 0x20)
            return true; // push
        if ((op & 0x78) == 0x30)
            return op == 0x33; // cps
        if ((op & 0x78) == 0x38 || (op & 0x78) == 0x40)
            return false;
        if ((op & 0x78) == 0x48 || (op & 0x78) == 0x58)
            return true; // cbnz
        if ((op & 0x78) == 0x50)
            return (op & 0x7E) != 0x54; // rev family
        return true; // pop, bkpt, it and hints
    }
    if ((hw & 0xF000) == 0xD000)
        return ((hw >> 8) & 0xF) != 0xE; // udf
    return true;
}

bool valid_wide(uint16_t hw1, uint16_t hw2) {
    if (!is_wide_prefix(hw1))
        return false;
    unsigned op1 = (hw1 >> 11) & 3;
    unsigned op2 = (hw1 >> 4) & 0x7F;
    unsigned rn = hw1 & 0xF;

    if (op1 == 1) {
        if ((op2 & 0x64) == 0x00) {
            unsigned opc = (hw1 >> 7) & 3;
            return opc == 1 || opc == 2; // ldm/stm ia, db
        }
        if ((op2 & 0x64) == 0x04)
            return true; // dual, exclusive, table branch
        if ((op2 & 0x60) == 0x20) {
            if (hw2 & 0x8000)
                return false;
            unsigned op = (hw1 >> 5) & 0xF;
            return op <= 4 || op == 8 || op == 10 || op == 11 || op == 13 ||
                   op == 14;
        }
        return false; // coprocessor
    }

    if (op1 == 2) {
        if ((hw2 & 0x8000) == 0) {
            if ((op2 & 0x20) == 0) {
                unsigned op = (hw1 >> 5) & 0xF;
                return op <= 4 || op == 8 || op == 10 || op == 11 ||
                       op == 13 || op == 14;
            }
            unsigned op = (hw1 >> 4) & 0x1F;
            switch (op) {
            case 0x00: // addw, adr
            case 0x04: // movw
            case 0x0A: // subw, adr
            case 0x0C: // movt
            case 0x10: // ssat
            case 0x12:
            case 0x14: // sbfx
            case 0x16: // bfi, bfc
            case 0x18: // usat
            case 0x1A:
            case 0x1C: // ubfx
                return true;
            default:
                return false;
            }
        }
        unsigned bop = (hw2 >> 12) & 7;
        if ((bop & 5) == 0) {
            if (((hw1 >> 7) & 7) != 7)
                return true; // conditional branch
            switch (op2) {
            case 0x38:
            case 0x39: {
                unsigned sysm = hw2 & 0xFF;
                return sysm <= 3 || (sysm >= 5 && sysm <= 9) ||
                       (sysm >= 16 && sysm <= 20);
            }
            case 0x3A:
                return ((hw2 >> 8) & 7) == 0; // hints
            case 0x3B: {
                unsigned op = (hw2 >> 4) & 0xF;
                return op == 2 || op == 4 || op == 5 || op == 6;
            }
            case 0x3E:
            case 0x3F:
                return true; // mrs
            default:
                return false;
            }
        }
        if ((bop & 5) == 1)
            return true; // b.w
        if ((bop & 5) == 5)
            return true; // bl
        return false;    // blx (ARM state) does not exist here
    }

    // op1 == 3
    if (op2 & 0x40)
        return false; // coprocessor
    if ((op2 & 0x71) == 0x00) {
        unsigned op = (hw1 >> 5) & 7;
        if (op == 3 || op == 7 || rn == 15)
            return false;
        if (op >= 4)
            return true;
        if (hw2 & 0x0800)
            return (hw2 & 0x0500) != 0; // P or W must be set
        return ((hw2 >> 6) & 0x3F) == 0;
    }
    if ((op2 & 0x67) == 0x01 || (op2 & 0x67) == 0x03)
        return true; // byte and halfword loads, hints
    if ((op2 & 0x67) == 0x05) {
        if (hw1 & 0x0100)
            return false;
        if (rn == 15 || (hw1 & 0x0080))
            return true;
        if (hw2 & 0x0800)
            return (hw2 & 0x0500) != 0;
        return ((hw2 >> 6) & 0x3F) == 0;
    }
    if ((op2 & 0x67) == 0x07)
        return false;
    if ((op2 & 0x70) == 0x20) {
        if ((hw2 & 0xF000) != 0xF000)
            return false;
        unsigned a = (hw1 >> 4) & 0xF, b = (hw2 >> 4) & 0xF;
        if (a < 8 && b == 0)
            return true; // shifts
        if ((a == 0 || a == 1 || a == 4 || a == 5) && (b & 8))
            return rn == 15; // sxth, uxth, sxtb, uxtb
        if (a == 9 && b >= 8 && b <= 11)
            return true; // rev, rev16, rbit, revsh
        if (a == 11 && b == 8)
            return true; // clz
        return false;
    }
    if ((op2 & 0x78) == 0x30) {
        unsigned a = (hw1 >> 4) & 7, b = (hw2 >> 4) & 3;
        if ((hw2 >> 6) & 3)
            return false;
        return a == 0 && b <= 1; // mla, mul, mls
    }
    if ((op2 & 0x78) == 0x38) {
        unsigned a = (hw1 >> 4) & 7, b = (hw2 >> 4) & 0xF;
        return (b == 0 && (a == 0 || a == 2 || a == 4 || a == 6)) ||
               (b == 15 && (a == 1 || a == 3));
    }
    return false;
}

namespace {

struct DecodeBuilder {
    Decoded &d;

    void subset(Op op, std::vector<Operand> ops, Cond cond = Cond::Always) {
        try {
            d.instruction = Instruction(op, std::move(ops), d.width, cond);
            d.cls = DecodeClass::Subset;
        } catch (const Error &) {
            // e.g. a pc operand: valid encoding, outside the subset
            d.cls = DecodeClass::Unsupported;
        }
    }
};

Register R(unsigned i) { return Register(i); }

bool decode_subset16(uint16_t hw, DecodeBuilder &b) {
    unsigned lo3 = hw & 7, mid3 = (hw >> 3) & 7, hi3 = (hw >> 8) & 7;
    if (hw == 0xBF00) {
        b.subset(Op::Nop, {});
        return true;
    }
    if (hw == 0xBE00) {
        b.subset(Op::Halt, {});
        return true;
    }
    if ((hw & 0xFFC0) == 0x0000) {
        b.subset(Op::Movs, {R(lo3), R(mid3)});
        return true;
    }
    switch (hw & 0xFE00) {
    case 0x1800:
    case 0x1A00:
        b.subset(hw & 0x0200 ? Op::Subs : Op::Adds,
                 {R(lo3), R(mid3), R((hw >> 6) & 7)});
        return true;
    case 0x1C00:
    case 0x1E00:
        b.subset(hw & 0x0200 ? Op::Subs : Op::Adds,
                 {R(lo3), R(mid3), Immediate{uint32_t((hw >> 6) & 7)}});
        return true;
    }
    Immediate imm8{uint32_t(hw & 0xFF)};
    switch (hw & 0xF800) {
    case 0x2000:
        b.subset(Op::Movs, {R(hi3), imm8});
        return true;
    case 0x2800:
        b.subset(Op::Cmp, {R(hi3), imm8});
        return true;
    case 0x3000:
        b.subset(Op::Adds, {R(hi3), R(hi3), imm8});
        return true;
    case 0x3800:
        b.subset(Op::Subs, {R(hi3), R(hi3), imm8});
        return true;
    case 0x4800:
        b.subset(Op::LdrLiteral, {R(hi3), PcOffset{int32_t(imm8.value * 4)}});
        return true;
    case 0x6000:
    case 0x6800:
        b.subset(hw & 0x0800 ? Op::LdrImm : Op::StrImm,
                 {R(lo3), MemRef{R(mid3), int32_t(((hw >> 6) & 0x1F) * 4)}});
        return true;
    case 0x9000:
    case 0x9800:
        b.subset(hw & 0x0800 ? Op::LdrImm : Op::StrImm,
                 {R(hi3), MemRef{R(Register::SP), int32_t(imm8.value * 4)}});
        return true;
    case 0xA000:
        b.subset(Op::Adr, {R(hi3), PcOffset{int32_t(imm8.value * 4)}});
        return true;
    case 0xA800:
        b.subset(Op::Add,
                 {R(hi3), R(Register::SP), Immediate{imm8.value * 4}});
        return true;
    case 0xE000:
        b.subset(Op::B, {PcOffset{sign_extend(uint32_t(hw & 0x7FF) << 1, 12)}});
        return true;
    }
    if ((hw & 0xFFC0) == 0x4280) {
        b.subset(Op::Cmp, {R(lo3), R(mid3)});
        return true;
    }
    unsigned hi_d = ((hw >> 7) & 1) << 3 | lo3, hi_m = (hw >> 3) & 0xF;
    switch (hw & 0xFF00) {
    case 0x4400:
        b.subset(Op::Add, {R(hi_d), R(hi_d), R(hi_m)});
        return true;
    case 0x4500:
        if (hi_d < 8 && hi_m < 8)
            return false; // unpredictable
        b.subset(Op::Cmp, {R(hi_d), R(hi_m)});
        return true;
    case 0x4600:
        b.subset(Op::Mov, {R(hi_d), R(hi_m)});
        return true;
    }
    if ((hw & 0xFF87) == 0x4700) {
        b.subset(Op::Bx, {R(hi_m)});
        return true;
    }
    if ((hw & 0xFF00) == 0xB000) {
        Immediate imm{uint32_t(hw & 0x7F) * 4};
        b.subset(hw & 0x80 ? Op::Sub : Op::Add,
                 {R(Register::SP), R(Register::SP), imm});
        return true;
    }
    if ((hw & 0xF000) == 0xD000) {
        unsigned cond = (hw >> 8) & 0xF;
        if (cond > kCondNe)
            return false;
        b.subset(Op::BCond,
                 {PcOffset{sign_extend(uint32_t(hw & 0xFF) << 1, 9)}},
                 cond == kCondEq ? Cond::Eq : Cond::Ne);
        return true;
    }
    return false;
}

bool decode_subset32(uint16_t hw1, uint16_t hw2, DecodeBuilder &b) {
    if (hw1 == 0xF3AF && hw2 == 0x8000) {
        b.subset(Op::Nop, {});
        return true;
    }
    unsigned rn = hw1 & 0xF, rd = (hw2 >> 8) & 0xF, rt = hw2 >> 12;
    bool s = (hw1 >> 4) & 1;

    if ((hw1 & 0xF800) == 0xF000 && (hw2 & 0x8000)) {
        uint32_t sbit = (hw1 >> 10) & 1, j1 = (hw2 >> 13) & 1,
                 j2 = (hw2 >> 11) & 1;
        uint32_t imm11 = hw2 & 0x7FF;
        if ((hw2 & 0x5000) == 0x5000 || (hw2 & 0x5000) == 0x1000) {
            uint32_t i1 = (~(j1 ^ sbit)) & 1, i2 = (~(j2 ^ sbit)) & 1;
            uint32_t raw = sbit << 24 | i1 << 23 | i2 << 22 |
                           uint32_t(hw1 & 0x3FF) << 12 | imm11 << 1;
            b.subset((hw2 & 0x4000) ? Op::Bl : Op::B,
                     {PcOffset{sign_extend(raw, 25)}});
            return true;
        }
        if ((hw2 & 0x5000) == 0) {
            unsigned cond = (hw1 >> 6) & 0xF;
            if ((cond >> 1) != 7) {
                if (cond > kCondNe)
                    return false;
                uint32_t raw = sbit << 20 | j2 << 19 | j1 << 18 |
                               uint32_t(hw1 & 0x3F) << 12 | imm11 << 1;
                b.subset(Op::BCond, {PcOffset{sign_extend(raw, 21)}},
                         cond == kCondEq ? Cond::Eq : Cond::Ne);
                return true;
            }
            if ((hw1 & 0xFFF0) == 0xF380 && (hw2 & 0xFF00) == 0x8800) {
                auto sreg = special_register_from_sysm(hw2 & 0xFF);
                if (!sreg || rn == Register::SP)
                    return false;
                b.subset(Op::Msr, {*sreg, R(rn)});
                return true;
            }
        }
        return false;
    }

    if ((hw1 & 0xFA00) == 0xF000 && !(hw2 & 0x8000)) {
        unsigned op = (hw1 >> 5) & 0xF;
        uint16_t imm12 = uint16_t(unpack_imm12(hw1, hw2));
        if ((imm12 >> 10) == 0 && ((imm12 >> 8) & 3) != 0 && (imm12 & 0xFF) == 0)
            return false; // unpredictable constant
        Immediate imm{expand_modified_immediate(imm12)};
        if (op == kDpMov && rn == 15 && rd != 15) {
            b.subset(s ? Op::Movs : Op::Mov, {R(rd), imm});
            return true;
        }
        if ((op == kDpAdd || op == kDpSub) && rn != 15) {
            if (rd == 15) {
                if (op == kDpSub && s) {
                    b.subset(Op::Cmp, {R(rn), imm});
                    return true;
                }
                return false;
            }
            Op o = op == kDpAdd ? (s ? Op::Adds : Op::Add)
                                : (s ? Op::Subs : Op::Sub);
            b.subset(o, {R(rd), R(rn), imm});
            return true;
        }
        return false;
    }

    if ((hw1 & 0xFA00) == 0xF200 && !(hw2 & 0x8000)) {
        unsigned op = (hw1 >> 4) & 0x1F;
        uint32_t imm12 = unpack_imm12(hw1, hw2);
        if (rd == 15)
            return false;
        if (op == 0x00 || op == 0x0A) {
            bool add = op == 0x00;
            if (rn == 15) {
                int32_t off = add ? int32_t(imm12) : -int32_t(imm12);
                b.subset(Op::Adr, {R(rd), PcOffset{off}});
            } else {
                b.subset(add ? Op::Add : Op::Sub, {R(rd), R(rn), Immediate{imm12}});
            }
            return true;
        }
        if (op == 0x04) {
            uint32_t imm16 = uint32_t(rn) << 12 | imm12;
            b.subset(Op::Mov, {R(rd), Immediate{imm16}});
            return true;
        }
        return false;
    }

    if ((hw1 & 0xFE00) == 0xEA00 && !(hw2 & 0x8000)) {
        unsigned op = (hw1 >> 5) & 0xF;
        unsigned rm = hw2 & 0xF;
        bool no_shift = (hw2 & 0x70F0) == 0;
        if (!no_shift || rm == 15)
            return false;
        if (op == kDpMov && rn == 15 && rd != 15) {
            b.subset(s ? Op::Movs : Op::Mov, {R(rd), R(rm)});
            return true;
        }
        if ((op == kDpAdd || op == kDpSub) && rn != 15) {
            if (rd == 15) {
                if (op == kDpSub && s) {
                    b.subset(Op::Cmp, {R(rn), R(rm)});
                    return true;
                }
                return false;
            }
            Op o = op == kDpAdd ? (s ? Op::Adds : Op::Add)
                                : (s ? Op::Subs : Op::Sub);
            b.subset(o, {R(rd), R(rn), R(rm)});
            return true;
        }
        return false;
    }

    if ((hw1 & 0xFF7F) == 0xF85F) {
        int32_t off = int32_t(hw2 & 0xFFF);
        b.subset(Op::LdrLiteral, {R(rt), PcOffset{(hw1 & 0x80) ? off : -off}});
        return true;
    }
    if ((hw1 & 0xFFE0) == 0xF8C0 && rn != 15) {
        b.subset((hw1 & 0x10) ? Op::LdrImm : Op::StrImm,
                 {R(rt), MemRef{R(rn), int32_t(hw2 & 0xFFF)}});
        return true;
    }
    if ((hw1 & 0xFFE0) == 0xF840 && rn != 15 && (hw2 & 0x0F00) == 0x0C00) {
        b.subset((hw1 & 0x10) ? Op::LdrImm : Op::StrImm,
                 {R(rt), MemRef{R(rn), -int32_t(hw2 & 0xFF)}});
        return true;
    }
    return false;
}

} // namespace

Decoded decode_one(uint16_t hw1, std::optional<uint16_t> hw2,
                   uint32_t address) {
    Decoded d{DecodeClass::Undefined, Width::Narrow16, address, {hw1, 0}, {}};
    DecodeBuilder b{d};
    if (!is_wide_prefix(hw1)) {
        if (!decode_subset16(hw1, b))
            d.cls = valid_narrow(hw1) ? DecodeClass::Unsupported
                                      : DecodeClass::Undefined;
        return d;
    }
    d.width = Width::Wide32;
    if (!hw2) {
        d.cls = DecodeClass::Incomplete;
        return d;
    }
    d.halfwords[1] = *hw2;
    if (!decode_subset32(hw1, *hw2, b))
        d.cls = valid_wide(hw1, *hw2) ? DecodeClass::Unsupported
                                      : DecodeClass::Undefined;
    return d;
}

std::vector<Decoded> decode(uint32_t word, uint32_t at) {
    uint16_t lo = uint16_t(word & 0xFFFF), hi = uint16_t(word >> 16);
    if (is_wide_prefix(lo))
        return {decode_one(lo, hi, at)};
    return {decode_one(lo, std::nullopt, at),
            decode_one(hi, std::nullopt, at + 2)};
}

std::vector<uint32_t> density_samples(uint64_t sample_budget, uint64_t seed) {
    std::mt19937 gen(static_cast<std::mt19937::result_type>(seed));
    std::vector<uint32_t> words(sample_budget);
    for (auto &w : words) {
        uint32_t a = gen(), b = gen();
        uint32_t prefix = 0x1D + (a >> 16) % 3;
        uint32_t hw1 = prefix << 11 | (a & 0x7FF);
        w = hw1 | (b & 0xFFFF) << 16;
    }
    return words;
}

double validity_density_serial(Width width, uint64_t sample_budget,
                               uint64_t seed) {
    if (sample_budget == 0)
        throw Error("sample budget must be at least 1");
    if (width == Width::Narrow16) {
        uint64_t valid = 0;
        for (uint32_t hw = 0; hw <= 0xFFFF; ++hw)
            valid += valid_narrow(uint16_t(hw)) ? 1 : 0;
        return double(valid) / 65536.0;
    }
    auto words = density_samples(sample_budget, seed);
    uint64_t valid = 0;
    for (auto w : words)
        valid += valid_wide(uint16_t(w & 0xFFFF), uint16_t(w >> 16)) ? 1 : 0;
    return double(valid) / double(words.size());
}

double validity_density(Width width, uint64_t sample_budget, uint64_t seed) {
    if (sample_budget == 0)
        throw Error("sample budget must be at least 1");
    int64_t valid = 0;
    if (width == Width::Narrow16) {
#pragma omp parallel for reduction(+ : valid) schedule(static)
        for (int64_t hw = 0; hw <= 0xFFFF; ++hw)
            valid += valid_narrow(uint16_t(hw)) ? 1 : 0;
        return double(valid) / 65536.0;
    }
    auto words = density_samples(sample_budget, seed);
    const auto n = static_cast<int64_t>(words.size());
#pragma omp parallel for reduction(+ : valid) schedule(static)
    for (int64_t k = 0; k < n; ++k) {
        uint32_t w = words[static_cast<size_t>(k)];
        valid += valid_wide(uint16_t(w & 0xFFFF), uint16_t(w >> 16)) ? 1 : 0;
    }
    return double(valid) / double(n);
}

namespace {

std::string hex_plain(uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

std::string immediate_text(uint32_t v) {
    if (v <= 0xFFFF)
        return "#" + std::to_string(v);
    char buf[16];
    std::snprintf(buf, sizeof buf, "#0x%X", v);
    return buf;
}

uint32_t align4(uint32_t v) { return v & ~3u; }

} // namespace

std::string disassemble(const Instruction &instr,
                        std::optional<uint32_t> address) {
    std::ostringstream out;
    out << mnemonic_name(instr.op(), instr.cond());
    if (instr.width() == Width::Wide32 && narrow_possible(instr))
        out << ".w";
    else if (instr.width() == Width::Narrow16 && !narrow_possible(instr))
        out << ".n";
    const auto &ops = instr.operands();
    for (size_t k = 0; k < ops.size(); ++k) {
        out << (k == 0 ? " " : ", ");
        std::visit(
            [&](const auto &o) {
                using T = std::decay_t<decltype(o)>;
                if constexpr (std::is_same_v<T, Register>) {
                    out << o.name();
                } else if constexpr (std::is_same_v<T, SpecialRegister>) {
                    out << special_register_name(o);
                } else if constexpr (std::is_same_v<T, Immediate>) {
                    out << immediate_text(o.value);
                } else if constexpr (std::is_same_v<T, MemRef>) {
                    out << "[" << o.base.name() << ", #" << o.offset << "]";
                } else if constexpr (std::is_same_v<T, LabelRef>) {
                    out << o.name;
                } else if constexpr (std::is_same_v<T, PcOffset>) {
                    if (instr.op() == Op::LdrLiteral) {
                        out << "[pc, #" << o.value << "]";
                    } else if (address) {
                        uint32_t base = instr.op() == Op::Adr
                                            ? align4(*address + 4)
                                            : *address + 4;
                        out << hex_plain(base + uint32_t(o.value));
                    } else {
                        out << "#" << o.value;
                    }
                } else if constexpr (std::is_same_v<T, LiteralConst>) {
                    char buf[16];
                    std::snprintf(buf, sizeof buf, "=0x%08X", o.value);
                    out << buf;
                } else if constexpr (std::is_same_v<T, LiteralAddress>) {
                    out << "=" << o.label;
                }
            },
            ops[k]);
    }
    return out.str();
}

} // namespace thumbfi
