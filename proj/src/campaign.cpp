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

#include "thumbfi/campaign.hpp"

#include <json.hpp>
#include <omp.h>

#include <cstdio>
#include <sstream>

namespace thumbfi {

using nlohmann::json;

std::string classification_name(Classification c) {
    switch (c) {
    case Classification::Correct:
        return "correct";
    case Classification::FaultTargetReg:
        return "fault_target";
    case Classification::FaultOtherReg:
        return "fault_other";
    case Classification::Detected:
        return "detected";
    case Classification::Exception:
        return "exception";
    case Classification::Timeout:
        return "timeout";
    }
    return "?";
}

Target Target::parse(std::string_view text) {
    if (text.rfind("mem:", 0) == 0) {
        auto v = text.substr(4);
        unsigned long addr = 0;
        try {
            size_t used = 0;
            addr = std::stoul(std::string(v), &used, 0);
            if (used != v.size())
                throw Error("");
        } catch (const std::exception &) {
            throw Error("bad memory target '" + std::string(text) + "'");
        }
        if (addr > 0xFFFFFFFFul || addr % 4 != 0)
            throw Error("memory target must be a word-aligned 32-bit address");
        return Target{uint32_t(addr)};
    }
    if (auto r = parse_register(text)) {
        if (r->index() == Register::PC)
            throw Error("pc cannot be a campaign target");
        return Target{*r};
    }
    if (auto s = parse_special_register(text))
        return Target{*s};
    throw Error("bad target '" + std::string(text) +
                "' (register, control|psp|basepri, or mem:ADDR)");
}

std::string Target::name() const {
    if (auto r = std::get_if<Register>(&where))
        return r->name();
    if (auto s = std::get_if<SpecialRegister>(&where))
        return special_register_name(*s);
    char buf[24];
    std::snprintf(buf, sizeof buf, "mem:0x%08X", std::get<uint32_t>(where));
    return buf;
}

uint32_t Target::value(const MachineState &state,
                       const ProgramImage &image) const {
    if (auto r = std::get_if<Register>(&where))
        return state.reg(*r);
    if (auto s = std::get_if<SpecialRegister>(&where))
        return state.special(*s);
    uint32_t a = std::get<uint32_t>(where);
    if (image.contains(a, 4))
        return image.word(a);
    return state.read_ram_word(a);
}

RunResult golden_run(const ProgramImage &image, const Limits &limits) {
    RunResult g = run(image, limits);
    if (g.final_state.status != Status::Halted || g.error_handler_reached)
        throw Error("golden run not Halted (status " +
                    status_name(g.final_state.status) +
                    (g.error_handler_reached ? ", error handler reached" : "") +
                    ")");
    return g;
}

Classification classify(const RunResult &faulty, const RunResult &golden,
                        const Target &target, const ProgramImage &image) {
    if (faulty.error_handler_reached)
        return Classification::Detected;
    switch (faulty.final_state.status) {
    case Status::Exception:
        return Classification::Exception;
    case Status::Timeout:
    case Status::Running:
        return Classification::Timeout;
    case Status::Halted:
        break;
    }
    const auto &f = faulty.final_state;
    const auto &g = golden.final_state;
    if (target.value(f, image) != target.value(g, image))
        return Classification::FaultTargetReg;
    for (unsigned r = 0; r < 15; ++r)
        if (f.regs[r] != g.regs[r])
            return Classification::FaultOtherReg;
    if (f.specials != g.specials)
        return Classification::FaultOtherReg;
    return Classification::Correct;
}

namespace {

Outcome run_one(const ProgramImage &image, const RunResult &golden,
                const FaultSpec &spec, const Target &target,
                const Limits &limits) {
    FaultHooks hooks(spec);
    RunResult r = run(image, reset_state(image.entry), limits, &hooks);
    uint32_t v = target.value(r.final_state, image);
    return {spec, classify(r, golden, target, image), v, hamming_weight(v)};
}

void check_golden(const RunResult &golden) {
    if (golden.final_state.status != Status::Halted ||
        golden.error_handler_reached)
        throw Error("golden run not Halted");
}

CampaignReport finish(std::vector<Outcome> outcomes, const ProgramImage &image,
                      const FaultCatalog &catalog, const Target &target,
                      const CampaignOptions &options) {
    Provenance p;
    p.program_hash = image_hash(image);
    p.rewrite_plan = options.rewrite_plan;
    p.catalog = catalog.descriptor.to_string();
    p.seed = catalog.descriptor.kind == CatalogDescriptor::Kind::Sampled
                 ? catalog.descriptor.seed
                 : 0;
    CampaignReport rep;
    rep.summary = summarize(outcomes, catalog, target, p);
    rep.outcomes = std::move(outcomes);
    return rep;
}

} // namespace

CampaignReport run_campaign(const ProgramImage &image, const RunResult &golden,
                            const FaultCatalog &catalog, const Target &target,
                            const CampaignOptions &options) {
    check_golden(golden);
    const auto &specs = catalog.specs;
    const int64_t n = int64_t(specs.size());
    std::vector<std::optional<Outcome>> slots(specs.size());
    int threads = options.threads > 0 ? options.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads)
    for (int64_t k = 0; k < n; ++k)
        slots[size_t(k)] = run_one(image, golden, specs[size_t(k)], target,
                                   options.limits);
    std::vector<Outcome> outcomes;
    outcomes.reserve(specs.size());
    for (auto &s : slots)
        outcomes.push_back(*s);
    return finish(std::move(outcomes), image, catalog, target, options);
}

CampaignReport run_campaign_serial(const ProgramImage &image,
                                   const RunResult &golden,
                                   const FaultCatalog &catalog,
                                   const Target &target,
                                   const CampaignOptions &options) {
    check_golden(golden);
    std::vector<Outcome> outcomes;
    outcomes.reserve(catalog.specs.size());
    for (const auto &spec : catalog.specs)
        outcomes.push_back(run_one(image, golden, spec, target, options.limits));
    return finish(std::move(outcomes), image, catalog, target, options);
}

CampaignSummary summarize(const std::vector<Outcome> &outcomes,
                          const FaultCatalog &catalog, const Target &target,
                          Provenance provenance) {
    CampaignSummary s;
    s.descriptor_class = catalog.descriptor.class_name();
    s.descriptor = catalog.descriptor.to_string();
    s.target = target.name();
    s.specs = outcomes.size();
    for (const auto &o : outcomes) {
        ++s.counts[size_t(o.classification)];
        if (o.classification == Classification::FaultTargetReg)
            ++s.histogram[o.target_hw];
    }
    s.any_register = s.count(Classification::FaultTargetReg) +
                     s.count(Classification::FaultOtherReg);
    s.crash = s.count(Classification::Exception) +
              s.count(Classification::Timeout);
    s.provenance = std::move(provenance);
    return s;
}

std::string report_csv(const CampaignReport &report) {
    std::ostringstream out;
    out << "kind,index,mask,classification,target_value,target_hw\n";
    char buf[32];
    for (const auto &o : report.outcomes) {
        out << fault_kind_name(o.spec.kind()) << "," << o.spec.index() << ",";
        if (o.spec.kind() == FaultKind::Skip) {
            out << (o.spec.granularity() == SkipGranularity::OneInstruction
                        ? "insn"
                        : "word");
        } else {
            std::snprintf(buf, sizeof buf, "0x%08X", o.spec.mask());
            out << buf;
        }
        std::snprintf(buf, sizeof buf, "0x%08X", o.target_value);
        out << "," << classification_name(o.classification) << "," << buf << ","
            << o.target_hw << "\n";
    }
    return out.str();
}

namespace {

std::string hex64(uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "0x%016llX",
                  static_cast<unsigned long long>(v));
    return buf;
}

} // namespace

std::string summary_json(const CampaignSummary &s) {
    json counts = json::object();
    for (size_t c = 0; c < kClassificationCount; ++c)
        counts[classification_name(Classification(c))] = s.counts[c];
    json j = {
        {"descriptor", s.descriptor},
        {"descriptor_class", s.descriptor_class},
        {"target", s.target},
        {"specs", s.specs},
        {"counts", counts},
        {"any_register", s.any_register},
        {"crash", s.crash},
        {"histogram", s.histogram},
        {"provenance",
         {{"program_hash", hex64(s.provenance.program_hash)},
          {"rewrite_plan", s.provenance.rewrite_plan},
          {"catalog", s.provenance.catalog},
          {"seed", s.provenance.seed}}},
    };
    return j.dump(2) + "\n";
}

CampaignSummary parse_summary_json(std::string_view text) {
    try {
        json j = json::parse(text);
        CampaignSummary s;
        s.descriptor = j.at("descriptor").get<std::string>();
        s.descriptor_class = j.at("descriptor_class").get<std::string>();
        s.target = j.at("target").get<std::string>();
        s.specs = j.at("specs").get<uint64_t>();
        for (size_t c = 0; c < kClassificationCount; ++c)
            s.counts[c] =
                j.at("counts").at(classification_name(Classification(c))).get<uint64_t>();
        s.any_register = j.at("any_register").get<uint64_t>();
        s.crash = j.at("crash").get<uint64_t>();
        s.histogram = j.at("histogram").get<std::array<uint64_t, 33>>();
        const auto &p = j.at("provenance");
        s.provenance.program_hash =
            std::stoull(p.at("program_hash").get<std::string>(), nullptr, 16);
        s.provenance.rewrite_plan = p.at("rewrite_plan").get<std::string>();
        s.provenance.catalog = p.at("catalog").get<std::string>();
        s.provenance.seed = p.at("seed").get<uint64_t>();
        return s;
    } catch (const json::exception &e) {
        throw Error(std::string("bad summary document: ") + e.what());
    }
}

Comparison compare_reports(const CampaignSummary &a, const CampaignSummary &b) {
    if (a.descriptor_class != b.descriptor_class)
        throw Error("incompatible descriptors: " + a.descriptor_class + " vs " +
                    b.descriptor_class);
    if (a.target != b.target)
        throw Error("incompatible targets: " + a.target + " vs " + b.target);
    Comparison c;
    for (size_t k = 0; k < kClassificationCount; ++k)
        c.deltas[k] = int64_t(b.counts[k]) - int64_t(a.counts[k]);
    c.any_register_delta = int64_t(b.any_register) - int64_t(a.any_register);
    c.crash_delta = int64_t(b.crash) - int64_t(a.crash);
    c.vulnerable_a = a.count(Classification::FaultTargetReg);
    c.vulnerable_b = b.count(Classification::FaultTargetReg);
    if (c.vulnerable_a)
        c.vulnerable_ratio = double(c.vulnerable_b) / double(c.vulnerable_a);
    return c;
}

std::string format_comparison(const Comparison &c, const CampaignSummary &a,
                              const CampaignSummary &b) {
    std::ostringstream out;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-14s %10s %10s %10s\n", "class", "a", "b",
                  "delta");
    out << buf;
    auto row = [&](const std::string &name, uint64_t x, uint64_t y, int64_t d) {
        std::snprintf(buf, sizeof buf, "%-14s %10llu %10llu %+10lld\n",
                      name.c_str(), static_cast<unsigned long long>(x),
                      static_cast<unsigned long long>(y),
                      static_cast<long long>(d));
        out << buf;
    };
    for (size_t k = 0; k < kClassificationCount; ++k)
        row(classification_name(Classification(k)), a.counts[k], b.counts[k],
            c.deltas[k]);
    row("any_register", a.any_register, b.any_register, c.any_register_delta);
    row("crash", a.crash, b.crash, c.crash_delta);
    out << "vulnerable points: " << c.vulnerable_a << " -> " << c.vulnerable_b;
    if (c.vulnerable_ratio) {
        std::snprintf(buf, sizeof buf, " (ratio %.4f)", *c.vulnerable_ratio);
        out << buf;
    }
    out << "\n";
    return out.str();
}

} // namespace thumbfi
