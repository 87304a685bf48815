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

#include "thumbfi/rewriter.hpp"

#include <algorithm>
#include <set>

namespace thumbfi {

std::string scheme_name(Scheme scheme) {
    return scheme == Scheme::FaultTolerance ? "ft" : "fd";
}

Scheme parse_scheme(std::string_view text) {
    if (text == "ft")
        return Scheme::FaultTolerance;
    if (text == "fd")
        return Scheme::FaultDetection;
    throw Error("bad scheme '" + std::string(text) + "' (ft|fd)");
}

std::string RewritePlan::to_string() const {
    std::string out = scheme_name(scheme);
    out += force_wide ? " wide" : " default-width";
    out += " only=";
    if (only.empty()) {
        out += "all";
    } else {
        for (size_t k = 0; k < only.size(); ++k)
            out += (k ? "," : "") + only[k];
    }
    if (scratch)
        out += " scratch=" + scratch->name();
    return out;
}

const std::vector<std::string> &filter_mnemonics() {
    static const std::vector<std::string> names = {
        "mov", "movs", "add", "adds", "sub", "subs", "adr", "ldr", "str",
        "cmp", "beq", "bne", "b", "bl", "bx", "msr", "nop", "halt"};
    return names;
}

bool fd_coverable(const Instruction &i) {
    switch (i.op()) {
    case Op::Mov:
    case Op::Movs:
    case Op::Add:
    case Op::Adds:
    case Op::Sub:
    case Op::Subs:
    case Op::Adr:
    case Op::LdrLiteral:
    case Op::LdrImm:
        return true;
    default:
        return false;
    }
}

namespace {

std::string mnemonic_of(const Instruction &i) {
    return mnemonic_name(i.op(), i.cond());
}

bool needs_scratch_ft(const Instruction &i) {
    if (i.op() == Op::Bl)
        return true;
    switch (i.op()) {
    case Op::Add:
    case Op::Adds:
    case Op::Sub:
    case Op::Subs:
    case Op::LdrImm: {
        auto src = i.sources();
        return std::find(src.begin(), src.end(), *i.destination()) != src.end();
    }
    default:
        return false;
    }
}

std::set<std::string> validated_filter(const RewritePlan &plan) {
    std::set<std::string> out;
    const auto &known = filter_mnemonics();
    for (const auto &m : plan.only) {
        if (std::find(known.begin(), known.end(), m) == known.end())
            throw Error("unknown mnemonic '" + m + "' in filter");
        out.insert(m);
    }
    return out;
}

bool in_scope(const Instruction &i, const std::set<std::string> &filter,
              Scheme scheme) {
    if (filter.empty())
        return scheme == Scheme::FaultTolerance || fd_coverable(i);
    return filter.count(mnemonic_of(i)) != 0;
}

bool program_uses(const SourceProgram &p, Register r, unsigned *line) {
    for (const auto &l : p.lines) {
        auto i = l.instruction();
        if (!i)
            continue;
        if (i->uses(r) || (r == Register(Register::LR) && i->op() == Op::Bl)) {
            if (line)
                *line = l.location.line;
            return true;
        }
    }
    return false;
}

class LabelFactory {
  public:
    explicit LabelFactory(const SourceProgram &p) {
        for (const auto &l : p.lines)
            if (l.label)
                taken_.insert(*l.label);
    }
    std::string fresh(const std::string &prefix) {
        for (;;) {
            std::string name = prefix + std::to_string(counter_[prefix]++);
            if (taken_.insert(name).second)
                return name;
        }
    }

  private:
    std::set<std::string> taken_;
    std::map<std::string, unsigned> counter_;
};

/// Turns literal loads into label form so that a duplicate placed at another
/// address still reads the same pool word. `ldr rX, =V` gets a named pool
/// entry; `ldr rX, [pc, #off]` is bound to the data word it addresses.
struct LiteralBinder {
    SourceProgram program;
    LabelFactory &labels;

    LiteralBinder(const SourceProgram &p, LabelFactory &f, uint32_t base)
        : program(p), labels(f) {
        auto addr = line_addresses(program, base);
        for (size_t k = 0; k < program.lines.size(); ++k) {
            auto i = program.lines[k].instruction();
            if (!i || i->op() != Op::LdrLiteral || !i->holds<PcOffset>(1))
                continue;
            uint32_t target =
                ((addr[k] + 4) & ~3u) + uint32_t(i->get<PcOffset>(1).value);
            std::optional<size_t> hit;
            for (size_t d = 0; d < program.lines.size(); ++d)
                if (program.lines[d].data() && addr[d] == target)
                    hit = d;
            if (!hit)
                throw Error(std::to_string(program.lines[k].location.line) +
                            ":" + std::to_string(program.lines[k].location.column) +
                            ": pc-relative load of " + hex32(target) +
                            " does not address a .word entry");
            auto &data_line = program.lines[*hit];
            if (!data_line.label)
                data_line.label = labels.fresh("__lit_");
            program.lines[k].item =
                i->with_operand(1, LabelRef{*data_line.label});
        }
    }

    /// Label-form replacement for an `=V` / `=label` load; the data line is
    /// collected for the end of the program.
    Instruction bind(const Instruction &i, std::vector<SourceLine> &pool) {
        if (i.op() != Op::LdrLiteral ||
            !(i.holds<LiteralConst>(1) || i.holds<LiteralAddress>(1)))
            return i;
        SourceLine data;
        data.label = labels.fresh("__lit_");
        if (i.holds<LiteralConst>(1))
            data.item = DataWord{i.get<LiteralConst>(1).value};
        else
            data.item = DataWord{i.get<LiteralAddress>(1).label};
        pool.push_back(data);
        return i.with_operand(1, LabelRef{*data.label});
    }
};

class Emitter {
  public:
    Emitter(uint32_t base, bool force_wide)
        : addr_(base), force_wide_(force_wide) {}

    void label(const std::string &name, SourceLocation loc) {
        SourceLine l;
        l.label = name;
        l.location = loc;
        out_.push_back(l);
    }

    void data(SourceLine line) { out_.push_back(std::move(line)); }

    /// Emit at the given width, widened when forced and possible.
    void emit(const Instruction &i, SourceLocation loc) {
        Instruction w = i;
        if (force_wide_ && wide_possible(i))
            w = i.with_width(Width::Wide32);
        // A forced wide instruction straddling two words would share each of
        // them with a neighbour; pad so it owns exactly one fetch word.
        if (force_wide_ && w.width() == Width::Wide32 && addr_ % 4 == 2) {
            SourceLine pad;
            pad.item = Instruction(Op::Nop, {}, Width::Narrow16);
            pad.location = loc;
            out_.push_back(pad);
            addr_ += 2;
        }
        SourceLine l;
        l.item = w;
        l.location = loc;
        out_.push_back(l);
        addr_ += width_bytes(w.width());
    }

    /// New instruction: canonical width, then forced widening.
    void emit_new(const Instruction &i, SourceLocation loc) {
        emit(i.with_width(preferred_width(i)), loc);
    }

    /// Pass-through: widened only when the whole program is in scope.
    void keep(const Instruction &i, SourceLocation loc, bool widen) {
        if (widen) {
            emit(i, loc);
        } else {
            SourceLine l;
            l.item = i;
            l.location = loc;
            out_.push_back(l);
            addr_ += width_bytes(i.width());
        }
    }

    uint32_t address() const { return addr_; }
    bool force_wide() const { return force_wide_; }
    std::vector<SourceLine> take() { return std::move(out_); }

  private:
    std::vector<SourceLine> out_;
    uint32_t addr_;
    bool force_wide_;
};

// Same width as the original unless forced; re-targeted duplicates may need
// a wider encoding than the original had.
Instruction retarget(const Instruction &i, Register scratch) {
    Instruction dup = i.with_operand(0, scratch);
    if (dup.width() == Width::Narrow16 && !narrow_possible(dup))
        dup = dup.with_width(Width::Wide32);
    return dup;
}

void check_scratch_for_fd(const Instruction &i, Register scratch) {
    if (i.uses(scratch))
        throw Error("scratch register collision: " + scratch.name());
}

} // namespace

Register resolve_scratch(const SourceProgram &program,
                         const RewritePlan &plan) {
    unsigned line = 0;
    if (plan.scratch) {
        if (plan.scratch->index() > 12)
            throw Error("scratch register must be one of r0-r12");
        if (program_uses(program, *plan.scratch, &line))
            throw Error("scratch register collision: " + plan.scratch->name() +
                        " is used on line " + std::to_string(line));
        return *plan.scratch;
    }
    std::vector<unsigned> order;
    if (plan.scheme == Scheme::FaultTolerance)
        order = {1, 12, 11, 10, 9, 8, 7, 6, 5, 4, 3, 2, 0};
    else
        order = {12, 11, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 0};
    for (unsigned r : order)
        if (!program_uses(program, Register(r), nullptr))
            return Register(r);
    throw Error("no free scratch register");
}

SourceProgram apply_fault_tolerance(const SourceProgram &program,
                                    const RewritePlan &plan) {
    auto filter = validated_filter(plan);
    LabelFactory labels(program);
    LiteralBinder binder(program, labels, plan.base);
    const SourceProgram &src = binder.program;

    std::optional<Register> scratch;
    for (const auto &l : src.lines)
        if (auto i = l.instruction();
            i && in_scope(*i, filter, plan.scheme) && needs_scratch_ft(*i)) {
            scratch = resolve_scratch(src, plan);
            break;
        }

    Emitter em(plan.base, plan.force_wide);
    std::vector<SourceLine> pool;
    for (const auto &line : src.lines) {
        if (line.data()) {
            em.data(line);
            continue;
        }
        if (line.label)
            em.label(*line.label, line.location);
        const Instruction *ip = line.instruction();
        if (!ip)
            continue;
        const auto loc = line.location;
        if (!in_scope(*ip, filter, plan.scheme)) {
            em.keep(*ip, loc, plan.force_wide && filter.empty());
            continue;
        }
        Instruction i = binder.bind(*ip, pool);

        if (i.op() == Op::Bl) {
            const Register lr(Register::LR);
            std::string ret = labels.fresh("__ft_ret_");
            const auto &target = i.get<LabelRef>(0).name;
            Instruction adr(Op::Adr, {*scratch, LabelRef{ret}}, Width::Narrow16);
            Instruction add(Op::Add, {lr, *scratch, Immediate{1}}, Width::Wide32);
            Instruction b(Op::B, {LabelRef{target}}, Width::Narrow16);
            em.emit_new(adr, loc);
            em.emit_new(adr, loc);
            em.emit_new(add, loc);
            em.emit_new(add, loc);
            em.emit_new(b, loc);
            em.emit_new(b, loc);
            bool narrow_adr = !(plan.force_wide || !narrow_possible(adr));
            if (narrow_adr && em.address() % 4 != 0)
                em.emit_new(Instruction(Op::Nop, {}, Width::Narrow16), loc);
            em.label(ret, loc);
            continue;
        }
        if (needs_scratch_ft(i)) {
            Register dst = *i.destination();
            Instruction work = retarget(i, *scratch);
            Instruction mov(Op::Mov, {dst, *scratch}, Width::Narrow16);
            em.emit(work, loc);
            em.emit(work, loc);
            em.emit_new(mov, loc);
            em.emit_new(mov, loc);
            continue;
        }
        em.emit(i, loc);
        em.emit(i, loc);
    }
    for (auto &d : pool)
        em.data(d);

    SourceProgram out;
    out.entry = program.entry;
    out.error_handler = program.error_handler;
    out.lines = em.take();
    return out;
}

SourceProgram apply_fault_detection(const SourceProgram &program,
                                    const RewritePlan &plan) {
    auto filter = validated_filter(plan);
    for (const auto &m : filter) {
        static const std::set<std::string> coverable = {
            "mov", "movs", "add", "adds", "sub", "subs", "adr", "ldr"};
        if (!coverable.count(m))
            throw Error("uncoverable mnemonic '" + m +
                        "': detection applies only to instructions writing a "
                        "general register without using flags");
    }
    if (!program.error_handler)
        throw Error("missing error handler: fault detection needs an .error label");
    if (!program.defines(*program.error_handler))
        throw Error("undefined label '" + *program.error_handler + "'");

    LabelFactory labels(program);
    LiteralBinder binder(program, labels, plan.base);
    const SourceProgram &src = binder.program;

    bool any = false;
    for (const auto &l : src.lines)
        if (auto i = l.instruction(); i && in_scope(*i, filter, plan.scheme))
            any = true;
    std::optional<Register> scratch;
    if (any)
        scratch = resolve_scratch(src, plan);

    Emitter em(plan.base, plan.force_wide);
    std::vector<SourceLine> pool;
    for (const auto &line : src.lines) {
        if (line.data()) {
            em.data(line);
            continue;
        }
        if (line.label)
            em.label(*line.label, line.location);
        const Instruction *ip = line.instruction();
        if (!ip)
            continue;
        const auto loc = line.location;
        if (!in_scope(*ip, filter, plan.scheme)) {
            em.keep(*ip, loc, plan.force_wide && filter.empty());
            continue;
        }
        Instruction i = binder.bind(*ip, pool);
        check_scratch_for_fd(i, *scratch);
        Register dst = *i.destination();
        Instruction dup = retarget(i, *scratch);
        auto src_regs = i.sources();
        bool overwrites_source =
            std::find(src_regs.begin(), src_regs.end(), dst) != src_regs.end();
        if (overwrites_source) {
            em.emit(dup, loc);
            em.emit(i, loc);
        } else {
            em.emit(i, loc);
            em.emit(dup, loc);
        }
        em.emit_new(Instruction(Op::Cmp, {dst, *scratch}, Width::Narrow16), loc);
        em.emit_new(Instruction(Op::BCond, {LabelRef{*program.error_handler}},
                                Width::Narrow16, Cond::Ne),
                    loc);
    }
    for (auto &d : pool)
        em.data(d);

    SourceProgram out;
    out.entry = program.entry;
    out.error_handler = program.error_handler;
    out.lines = em.take();
    return out;
}

SourceProgram rewrite(const SourceProgram &program, const RewritePlan &plan) {
    return plan.scheme == Scheme::FaultTolerance
               ? apply_fault_tolerance(program, plan)
               : apply_fault_detection(program, plan);
}

} // namespace thumbfi
