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

// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--known-deviation N]...
//
// Exit status is the number of failing criteria not listed as a known
// deviation. Known deviations still print FAIL.

#include "support/oracle.hpp"
#include "thumbfi/benchmarks.hpp"
#include "thumbfi/campaign.hpp"
#include "thumbfi/encoding.hpp"
#include "thumbfi/rewriter.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <set>
#include <sstream>

using namespace thumbfi;

namespace {

struct Verdict {
    bool pass;
    std::string detail;
};

struct Prepared {
    ProgramImage image;
    RunResult golden;
    Limits limits;
};

Prepared prepare(const SourceProgram &prog) {
    Prepared p{layout(prog), {}, {}};
    p.golden = golden_run(p.image, p.limits);
    return p;
}

Prepared prepare(const std::string &bench, std::optional<RewritePlan> plan = {}) {
    auto prog = parse(load_benchmark(bench).source);
    return prepare(plan ? rewrite(prog, *plan) : prog);
}

CampaignSummary sweep(const Prepared &p, const std::string &desc, EventSet ev,
                      const Target &target) {
    auto cat = generate_catalog(CatalogDescriptor::parse(desc, ev), p.golden);
    CampaignOptions o;
    o.limits = p.limits;
    return run_campaign(p.image, p.golden, cat, target, o).summary;
}

RewritePlan plan(Scheme s, bool wide, std::vector<std::string> only = {}) {
    RewritePlan r;
    r.scheme = s;
    r.force_wide = wide;
    r.only = std::move(only);
    return r;
}

uint64_t n(const CampaignSummary &s, Classification c) { return s.count(c); }

std::string hex(const std::vector<uint8_t> &b) {
    std::string s;
    char buf[4];
    for (auto x : b) {
        std::snprintf(buf, sizeof buf, "%02x", x);
        s += buf;
    }
    return s;
}

Verdict encoding_fidelity() {
    auto entries = oracle::load(TEST_DATA_DIR "/encoding_oracle.txt");
    std::set<std::pair<Op, Width>> covered;
    size_t bad = 0;
    for (const auto &e : entries) {
        bool ok = false;
        try {
            auto enc = encode(e.instr);
            auto d = decode_one(enc.halfwords[0], enc.width == Width::Wide32
                                                      ? std::optional(enc.halfwords[1])
                                                      : std::nullopt);
            ok = hex(enc.bytes()) == hex(e.bytes) && d.cls == DecodeClass::Subset &&
                 *d.instruction == e.instr;
        } catch (const Error &) {
        }
        bad += !ok;
        covered.insert({e.instr.op(), e.instr.width()});
    }
    // every mnemonic at every width it has
    size_t expected_pairs = 0;
    for (Op op : {Op::Mov, Op::Movs, Op::Add, Op::Adds, Op::Sub, Op::Subs, Op::Adr,
                  Op::LdrLiteral, Op::LdrImm, Op::StrImm, Op::Cmp, Op::BCond, Op::B})
        expected_pairs += covered.count({op, Width::Narrow16}) + covered.count({op, Width::Wide32});
    bool grid_complete = expected_pairs == 26 && covered.count({Op::Bl, Width::Wide32}) &&
                         covered.count({Op::Bx, Width::Narrow16}) &&
                         covered.count({Op::Msr, Width::Wide32}) &&
                         covered.count({Op::Nop, Width::Narrow16}) &&
                         covered.count({Op::Nop, Width::Wide32}) &&
                         covered.count({Op::Halt, Width::Narrow16});
    auto ref = std::find_if(entries.begin(), entries.end(), [](const oracle::Entry &e) {
        return e.description == "ldr_literal n r0 pc:40";
    });
    Instruction ldr(Op::LdrLiteral, {Register(0), PcOffset{40}}, Width::Narrow16);
    bool anchor = ref != entries.end() && ref->capstone == "ldr r0, [pc, #0x28]" &&
                  hex(ref->bytes) == "0a48" && encode(ldr).halfwords[0] == 0x480A;
    std::ostringstream d;
    d << entries.size() << " oracle encodings, " << bad << " mismatches, "
      << covered.size() << " mnemonic/width pairs; ldr r0,[pc,#40] = 0x480A"
      << (anchor ? " (clang+capstone agree)" : " (oracle disagrees)");
    return {bad == 0 && grid_complete && anchor, d.str()};
}

Verdict golden_anchor() {
    auto p = prepare("load_cafecafe");
    auto r0 = Target::parse("r0");
    uint32_t v = r0.value(p.golden.final_state, p.image);
    auto cat = generate_catalog(CatalogDescriptor::parse("exhaustive1", EventSet::Load), p.golden);
    auto rep = run_campaign(p.image, p.golden, cat, r0);
    bool hw_ok = true;
    for (const auto &o : rep.outcomes)
        if (o.classification == Classification::FaultTargetReg)
            hw_ok &= o.target_hw == 21 || o.target_hw == 23;
    auto fetch = sweep(p, "exhaustive1", EventSet::Fetch, r0);
    uint64_t exc = n(fetch, Classification::Exception);
    std::ostringstream d;
    d << "r0=" << hex32(v) << " hw=" << hamming_weight(v) << "; load sweep "
      << n(rep.summary, Classification::FaultTargetReg) << "/" << rep.summary.specs
      << " fault_target; fetch sweep " << exc << "/" << fetch.specs << " exception";
    return {v == 0xCAFECAFE && hamming_weight(v) == 22 &&
                n(rep.summary, Classification::FaultTargetReg) == 32 && hw_ok &&
                2 * exc > fetch.specs,
            d.str()};
}

Verdict ft_single_skip() {
    auto p = prepare("bl_call", plan(Scheme::FaultTolerance, true));
    auto s = sweep(p, "skips:insn", EventSet::Both, Target::parse("r0"));
    std::ostringstream d;
    d << s.specs << " instruction skips: fault_target=" << n(s, Classification::FaultTargetReg)
      << " fault_other=" << n(s, Classification::FaultOtherReg);
    return {s.specs > 0 && n(s, Classification::FaultTargetReg) == 0 &&
                n(s, Classification::FaultOtherReg) == 0,
            d.str()};
}

Verdict ft_double_corruption() {
    auto narrow = sweep(prepare("bl_call", plan(Scheme::FaultTolerance, false)), "skips:word",
                        EventSet::Both, Target::parse("r0"));
    auto wide = sweep(prepare("bl_call", plan(Scheme::FaultTolerance, true)), "skips:word",
                      EventSet::Both, Target::parse("r0"));
    uint64_t a = n(narrow, Classification::FaultTargetReg), b = n(wide, Classification::FaultTargetReg);
    std::ostringstream d;
    d << "word skips: default width fault_target=" << a << "/" << narrow.specs
      << ", forced wide fault_target=" << b << "/" << wide.specs;
    return {a >= 1 && b == 0, d.str()};
}

Verdict fd_completeness() {
    auto p = prepare("ldr_detect", plan(Scheme::FaultDetection, true));
    auto r0 = Target::parse("r0");
    uint64_t total = 0, silent = 0;
    std::ostringstream d;
    for (auto [desc, ev] : {std::pair{"exhaustive1", EventSet::Load},
                            std::pair{"exhaustive2", EventSet::Load},
                            std::pair{"skips", EventSet::Both}}) {
        auto s = sweep(p, desc, ev, r0);
        uint64_t ok = n(s, Classification::Detected) + n(s, Classification::Correct);
        total += s.specs;
        silent += s.specs - ok;
        d << desc << " " << n(s, Classification::Detected) << " detected + "
          << n(s, Classification::Correct) << " correct of " << s.specs << "; ";
    }
    d << "silent " << silent;
    return {total > 0 && silent == 0, d.str()};
}

Verdict density_direction() {
    double narrow = validity_density(Width::Narrow16, 1, 0);
    double wide = validity_density(Width::Wide32, 1000000, 42);
    // goldens recorded at first computation
    bool golden = narrow == 58336.0 / 65536.0 && wide == 326413.0 / 1000000.0;
    char buf[160];
    std::snprintf(buf, sizeof buf, "narrow %.6f > wide %.6f (1e6 samples, seed 42)%s", narrow,
                  wide, golden ? "" : " goldens changed");
    return {narrow > wide && golden, buf};
}

Verdict freertos_scenarios() {
    auto rc = load_benchmark("restore_context");
    auto rcs = sweep(prepare("restore_context"), "skips", EventSet::Both, rc.target);
    auto tc = load_benchmark("task_create_args");
    auto count = [&](std::optional<RewritePlan> p) {
        return n(sweep(prepare("task_create_args", p), "exhaustive1", EventSet::Both, tc.target),
                 Classification::FaultTargetReg);
    };
    uint64_t none = count(std::nullopt);
    uint64_t ldr_only = count(plan(Scheme::FaultDetection, true, {"ldr"}));
    uint64_t all = count(plan(Scheme::FaultDetection, true));
    std::ostringstream d;
    d << "restore_context control-altering skips=" << n(rcs, Classification::FaultTargetReg)
      << "; task_create_args fault_target: none=" << none << " fd ldr-only=" << ldr_only
      << " fd all=" << all;
    return {n(rcs, Classification::FaultTargetReg) >= 1 && all <= ldr_only && ldr_only < none,
            d.str()};
}

Verdict determinism() {
    bool same = true, perm = true;
    size_t campaigns = 0;
    std::mt19937 rng(1);
    for (const auto &name : benchmark_names()) {
        auto b = load_benchmark(name);
        auto p = prepare(name);
        for (auto desc : {"exhaustive1", "sampled:2:300:99", "skips"}) {
            auto cat = generate_catalog(CatalogDescriptor::parse(desc), p.golden);
            CampaignOptions one, many;
            one.threads = 1;
            many.threads = 8;
            auto a = run_campaign(p.image, p.golden, cat, b.target, one);
            auto again = generate_catalog(CatalogDescriptor::parse(desc), run(p.image));
            auto c = run_campaign(p.image, p.golden, again, b.target, many);
            same &= report_csv(a) == report_csv(c) &&
                    summary_json(a.summary) == summary_json(c.summary);
            auto shuffled = cat;
            std::shuffle(shuffled.specs.begin(), shuffled.specs.end(), rng);
            auto s = run_campaign(p.image, p.golden, shuffled, b.target, many);
            perm &= s.summary.counts == a.summary.counts &&
                    s.summary.histogram == a.summary.histogram;
            ++campaigns;
        }
    }
    std::ostringstream d;
    d << campaigns << " campaigns rerun (1 vs 8 threads): "
      << (same ? "byte-identical" : "reports differ") << "; shuffled catalogs: "
      << (perm ? "same counts" : "counts differ");
    return {same && perm, d.str()};
}

} // namespace

int main(int argc, char **argv) {
    std::set<int> known;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--known-deviation") == 0 && i + 1 < argc) {
            known.insert(std::atoi(argv[++i]));
        } else {
            std::fprintf(stderr, "usage: acceptance [--known-deviation N]...\n");
            return 2;
        }
    }
    const std::vector<std::pair<const char *, std::function<Verdict()>>> criteria = {
        {"encoding fidelity", encoding_fidelity},
        {"load_cafecafe golden and fault anchors", golden_anchor},
        {"tolerance: single instruction skips", ft_single_skip},
        {"tolerance: fetch-word skips need wide encodings", ft_double_corruption},
        {"detection completeness", fd_completeness},
        {"encoding sparsity direction", density_direction},
        {"task scenarios", freertos_scenarios},
        {"determinism and restart isolation", determinism},
    };
    int unexpected = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception &e) {
            v = {false, std::string("error: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        int id = int(i + 1);
        bool tolerated = !v.pass && known.count(id);
        std::printf("%s %d %s: %s [%.2fs]%s\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first,
                    v.detail.c_str(), secs, tolerated ? " (known deviation)" : "");
        if (!v.pass && !tolerated)
            ++unexpected;
    }
    return unexpected;
}
