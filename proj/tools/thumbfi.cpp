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

// thumbfi: assemble, rewrite, run and fault-inject Thumb-2 subset programs.

#include "thumbfi/benchmarks.hpp"
#include "thumbfi/campaign.hpp"
#include "thumbfi/encoding.hpp"
#include "thumbfi/rewriter.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

using namespace thumbfi;

namespace {

std::string read_input(const std::string &path) {
    if (path == "-")
        return std::string(std::istreambuf_iterator<char>(std::cin), {});
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open '" + path + "'");
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_output(const std::string &path, const std::string &text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write '" + path + "'");
    out << text;
}

const std::string kPlanTag = "; rewrite: ";

std::string plan_note(const std::string &text) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (line.rfind(kPlanTag, 0) == 0)
            return line.substr(kPlanTag.size());
    return "none";
}

ProgramImage load_program(const std::string &text) {
    if (looks_like_image_dump(text))
        return load_image(text);
    return assemble(text);
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Thumb-2 subset assembler, countermeasure rewriter and "
                 "fault-injection simulator"};
    app.require_subcommand(1);

    // assemble
    std::string asm_in, asm_out;
    uint32_t asm_base = 0;
    auto *c_asm = app.add_subcommand("assemble", "Assemble to an image dump");
    c_asm->add_option("input", asm_in, "Assembly file or - for stdin")->required();
    c_asm->add_option("-o,--output", asm_out, "Image dump path (default stdout)");
    c_asm->add_option("--base", asm_base, "Load address (4-byte aligned)");

    // rewrite
    std::string rw_in, rw_out, rw_scheme, rw_scratch;
    std::vector<std::string> rw_only;
    bool rw_wide = false;
    auto *c_rw = app.add_subcommand("rewrite", "Apply a countermeasure");
    c_rw->add_option("input", rw_in, "Assembly file or -")->required();
    c_rw->add_option("--scheme", rw_scheme, "ft | fd")->required();
    c_rw->add_flag("--force-wide", rw_wide, "Use 32-bit encodings everywhere");
    c_rw->add_option("--only", rw_only, "Comma-separated mnemonics to rewrite")
        ->delimiter(',');
    c_rw->add_option("--scratch", rw_scratch, "Scratch register");
    c_rw->add_option("-o,--output", rw_out, "Output assembly (default stdout)");

    // run
    std::string run_in;
    uint64_t run_steps = 10000;
    bool run_trace = false;
    auto *c_run = app.add_subcommand("run", "Simulate without faults");
    c_run->add_option("input", run_in, "Assembly or image dump, or -")->required();
    c_run->add_option("--max-steps", run_steps, "Step limit")
        ->check(CLI::PositiveNumber);
    c_run->add_flag("--trace", run_trace, "Also print the bus event trace");

    // campaign
    std::string cp_in, cp_catalog, cp_target, cp_error, cp_out = "-", cp_summary,
                cp_events = "both", cp_plan;
    uint64_t cp_steps = 10000;
    int cp_threads = 0;
    auto *c_cp = app.add_subcommand("campaign", "Run a fault-injection campaign");
    c_cp->add_option("input", cp_in, "Assembly or image dump, or -")->required();
    c_cp->add_option("--catalog", cp_catalog,
                     "exhaustive1 | exhaustive2 | sampled:K:N:SEED | skips[:insn|:word]")
        ->required();
    c_cp->add_option("--target", cp_target, "rN, control|psp|basepri or mem:ADDR")
        ->required();
    c_cp->add_option("--events", cp_events, "Corrupted bus events: fetch|load|both");
    c_cp->add_option("--error-label", cp_error, "Error handler label");
    c_cp->add_option("-o,--output", cp_out, "Per-spec report (CSV)");
    c_cp->add_option("--summary", cp_summary, "Aggregate summary (JSON)");
    c_cp->add_option("--threads", cp_threads, "Worker threads (0 = default)")
        ->check(CLI::NonNegativeNumber);
    c_cp->add_option("--max-steps", cp_steps, "Step limit per run")
        ->check(CLI::PositiveNumber);
    c_cp->add_option("--plan", cp_plan, "Rewrite plan recorded in the summary");

    // compare
    std::string cmp_a, cmp_b;
    auto *c_cmp = app.add_subcommand("compare", "Compare two campaign summaries");
    c_cmp->add_option("a", cmp_a, "Baseline summary (JSON)")->required();
    c_cmp->add_option("b", cmp_b, "Other summary (JSON)")->required();

    // density
    int dn_width = 16;
    uint64_t dn_samples = 1000000;
    std::optional<uint64_t> dn_seed;
    auto *c_dn = app.add_subcommand("density", "Fraction of valid encodings");
    c_dn->add_option("--width", dn_width, "16 or 32")
        ->required()
        ->check(CLI::IsMember({16, 32}));
    c_dn->add_option("--samples", dn_samples, "Samples for 32-bit words")
        ->check(CLI::PositiveNumber);
    c_dn->add_option("--seed", dn_seed, "Seed for 32-bit sampling");

    // bench
    std::string bn_name;
    bool bn_list = false, bn_manifest = false;
    auto *c_bn = app.add_subcommand("bench", "Print a bundled benchmark program");
    c_bn->add_option("name", bn_name, "Benchmark name");
    c_bn->add_flag("--list", bn_list, "List benchmark names");
    c_bn->add_flag("--manifest", bn_manifest, "Print the golden manifest");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*c_asm) {
            std::string text = read_input(asm_in);
            auto prog = parse(text);
            std::string dump = dump_image(layout(prog, asm_base));
            if (auto note = plan_note(text); note != "none")
                dump += kPlanTag + note + "\n";
            write_output(asm_out, dump);
        } else if (*c_rw) {
            RewritePlan plan;
            plan.scheme = parse_scheme(rw_scheme);
            plan.force_wide = rw_wide;
            plan.only = rw_only;
            if (!rw_scratch.empty()) {
                auto r = parse_register(rw_scratch);
                if (!r)
                    throw Error("bad --scratch register '" + rw_scratch + "'");
                plan.scratch = *r;
            }
            auto out = rewrite(parse(read_input(rw_in)), plan);
            write_output(rw_out, kPlanTag + plan.to_string() + "\n" +
                                     format_program(out));
        } else if (*c_run) {
            auto image = load_program(read_input(run_in));
            Limits limits;
            limits.max_steps = run_steps;
            auto r = run(image, limits);
            std::cout << dump_state(r.final_state);
            std::cout << "steps = " << r.steps << "\n";
            if (r.error_handler_reached)
                std::cout << "error handler reached\n";
            if (run_trace)
                std::cout << dump_trace(r);
        } else if (*c_cp) {
            std::string text = read_input(cp_in);
            auto image = load_program(text);
            Limits limits;
            limits.max_steps = cp_steps;
            if (!cp_error.empty())
                limits.error_handler = image.symbol(cp_error);
            auto target = Target::parse(cp_target);
            auto desc = CatalogDescriptor::parse(cp_catalog,
                                                 parse_event_set(cp_events));
            auto golden = golden_run(image, limits);
            auto catalog = generate_catalog(desc, golden);
            CampaignOptions opt;
            opt.limits = limits;
            opt.threads = cp_threads;
            opt.rewrite_plan = cp_plan.empty() ? plan_note(text) : cp_plan;
            auto report = run_campaign(image, golden, catalog, target, opt);
            write_output(cp_out, report_csv(report));
            if (!cp_summary.empty())
                write_output(cp_summary, summary_json(report.summary));
            const auto &s = report.summary;
            std::ostream &log = cp_out == "-" ? std::cerr : std::cout;
            log << s.specs << " specs:";
            for (size_t c = 0; c < kClassificationCount; ++c)
                log << " " << classification_name(Classification(c)) << "="
                    << s.counts[c];
            log << "\n";
        } else if (*c_cmp) {
            auto a = parse_summary_json(read_input(cmp_a));
            auto b = parse_summary_json(read_input(cmp_b));
            auto c = compare_reports(a, b);
            std::cout << format_comparison(c, a, b);
        } else if (*c_dn) {
            Width w = dn_width == 16 ? Width::Narrow16 : Width::Wide32;
            if (w == Width::Wide32 && !dn_seed)
                throw Error("--seed is required for 32-bit sampling");
            double d = validity_density(w, dn_samples, dn_seed.value_or(0));
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.6f", d);
            std::cout << "density " << dn_width << " = " << buf << "\n";
        } else if (*c_bn) {
            if (bn_list) {
                for (const auto &n : benchmark_names())
                    std::cout << n << "\n";
            } else if (bn_manifest) {
                std::cout << benchmark_manifest();
            } else if (bn_name.empty()) {
                throw Error("bench: a benchmark name, --list or --manifest is required");
            } else {
                std::cout << load_benchmark(bn_name).source;
            }
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
