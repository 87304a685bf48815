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

#include "thumbfi/faults.hpp"
#include "thumbfi/simulator.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace thumbfi {

enum class Classification {
    Correct,
    FaultTargetReg,
    FaultOtherReg,
    Detected,
    Exception,
    Timeout,
};
constexpr size_t kClassificationCount = 6;
std::string classification_name(Classification c);

/// What a campaign watches: a core register, a special register, or a RAM
/// word (`mem:0x20001000`).
struct Target {
    std::variant<Register, SpecialRegister, uint32_t> where{Register(0)};

    static Target parse(std::string_view text);
    std::string name() const;
    uint32_t value(const MachineState &state, const ProgramImage &image) const;
    bool operator==(const Target &) const = default;
};

struct Outcome {
    FaultSpec spec;
    Classification classification;
    uint32_t target_value;
    unsigned target_hw;
    bool operator==(const Outcome &) const = default;
};

struct Provenance {
    uint64_t program_hash = 0;
    std::string rewrite_plan = "none";
    std::string catalog;
    uint64_t seed = 0;
    bool operator==(const Provenance &) const = default;
};

/// Aggregates; everything compare_reports needs.
struct CampaignSummary {
    std::string descriptor_class;
    std::string descriptor;
    std::string target;
    uint64_t specs = 0;
    std::array<uint64_t, kClassificationCount> counts{};
    /// FaultTargetReg + FaultOtherReg.
    uint64_t any_register = 0;
    /// Exception + Timeout.
    uint64_t crash = 0;
    /// Hamming weights of the target value over FaultTargetReg outcomes.
    std::array<uint64_t, 33> histogram{};
    Provenance provenance;

    uint64_t count(Classification c) const { return counts[size_t(c)]; }
    bool operator==(const CampaignSummary &) const = default;
};

struct CampaignReport {
    std::vector<Outcome> outcomes; // catalog order
    CampaignSummary summary;
};

struct CampaignOptions {
    Limits limits;
    /// 0 keeps the OpenMP default.
    int threads = 0;
    std::string rewrite_plan = "none";
};

/// Fault-free reference run.
RunResult golden_run(const ProgramImage &image, const Limits &limits = {});

Classification classify(const RunResult &faulty, const RunResult &golden,
                        const Target &target, const ProgramImage &image);

/// One simulation per spec from a fresh reset state. Specs run in parallel
/// (OpenMP); results are independent of the thread count.
CampaignReport run_campaign(const ProgramImage &image, const RunResult &golden,
                            const FaultCatalog &catalog, const Target &target,
                            const CampaignOptions &options = {});
/// Single-threaded reference implementation of run_campaign.
CampaignReport run_campaign_serial(const ProgramImage &image,
                                   const RunResult &golden,
                                   const FaultCatalog &catalog,
                                   const Target &target,
                                   const CampaignOptions &options = {});

/// Recompute aggregates from a list of outcomes.
CampaignSummary summarize(const std::vector<Outcome> &outcomes,
                          const FaultCatalog &catalog, const Target &target,
                          Provenance provenance);

/// `kind,index,mask,classification,target_value,target_hw` rows.
std::string report_csv(const CampaignReport &report);
std::string summary_json(const CampaignSummary &summary);
CampaignSummary parse_summary_json(std::string_view text);

struct Comparison {
    /// b - a per classification, absolute counts.
    std::array<int64_t, kClassificationCount> deltas{};
    int64_t any_register_delta = 0;
    int64_t crash_delta = 0;
    uint64_t vulnerable_a = 0; // FaultTargetReg counts
    uint64_t vulnerable_b = 0;
    /// vulnerable_b / vulnerable_a; absent when a has none.
    std::optional<double> vulnerable_ratio;
};

Comparison compare_reports(const CampaignSummary &a, const CampaignSummary &b);
std::string format_comparison(const Comparison &c, const CampaignSummary &a,
                              const CampaignSummary &b);

} // namespace thumbfi
