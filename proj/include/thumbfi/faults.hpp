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

#include "thumbfi/simulator.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace thumbfi {

enum class FaultKind { FetchCorrupt, LoadCorrupt, Skip };
enum class SkipGranularity { OneInstruction, WholeFetchWord };

std::string fault_kind_name(FaultKind kind);

/// A single fault. For corruptions `index` is the fetch or load event index
/// and `mask` is XORed into the word. For Skip/OneInstruction `index` is the
/// dynamic step index of the skipped instruction; for Skip/WholeFetchWord it
/// is a fetch event index.
class FaultSpec {
  public:
    static FaultSpec fetch(uint64_t index, uint32_t mask);
    static FaultSpec load(uint64_t index, uint32_t mask);
    static FaultSpec skip(uint64_t index, SkipGranularity granularity);

    FaultKind kind() const { return kind_; }
    uint64_t index() const { return index_; }
    uint32_t mask() const { return mask_; } // 0 for Skip
    SkipGranularity granularity() const { return granularity_; }

    /// `fetch 3 0x00000001`, `load 0 0x80000000`, `skip 5 insn|word`.
    std::string to_string() const;
    static FaultSpec parse(std::string_view line);

    bool operator==(const FaultSpec &) const = default;

  private:
    FaultSpec(FaultKind kind, uint64_t index, uint32_t mask,
              SkipGranularity g)
        : kind_(kind), index_(index), mask_(mask), granularity_(g) {}
    FaultKind kind_;
    uint64_t index_;
    uint32_t mask_;
    SkipGranularity granularity_;
};

constexpr uint32_t kNopPair = 0xBF00BF00;

/// Effect of a spec on one bus event; the identity for non-matching events.
uint32_t apply(const FaultSpec &spec, const Event &event);
/// Effect of a spec on the halfwords of an instruction at a given step.
std::array<uint16_t, 2> apply_decode(const FaultSpec &spec, uint64_t step,
                                     Width width, std::array<uint16_t, 2> hw);

/// Hooks injecting exactly one FaultSpec.
class FaultHooks final : public Hooks {
  public:
    explicit FaultHooks(FaultSpec spec) : spec_(spec) {}
    uint32_t on_fetch(const FetchEvent &e) const override;
    uint32_t on_load(const LoadEvent &e) const override;
    std::array<uint16_t, 2> on_decode(uint64_t step, uint32_t address,
                                      Width width,
                                      std::array<uint16_t, 2> hw) const override;

  private:
    FaultSpec spec_;
};

/// Which bus events a corruption catalog covers.
enum class EventSet { Fetch, Load, Both };

/// Catalog generation descriptor.
struct CatalogDescriptor {
    enum class Kind { Exhaustive1, Exhaustive2, Sampled, Skips };
    Kind kind = Kind::Exhaustive1;
    EventSet events = EventSet::Both;
    // Sampled only
    unsigned flips = 1;
    uint64_t count = 0;
    uint64_t seed = 0;
    // Skips only: which granularities to sweep
    bool skip_instructions = true;
    bool skip_words = true;

    /// exhaustive1 | exhaustive2 | sampled:K:N:SEED | skips[:insn|:word]
    static CatalogDescriptor parse(std::string_view text,
                                   EventSet events = EventSet::Both);
    std::string to_string() const;
    /// Name without parameters; reports are comparable only within a class.
    std::string class_name() const;
    bool operator==(const CatalogDescriptor &) const = default;
};

std::string event_set_name(EventSet set);
EventSet parse_event_set(std::string_view text);

struct FaultCatalog {
    CatalogDescriptor descriptor;
    std::vector<FaultSpec> specs;
};

/// Specs in a fixed order: fetch events first, then load events, each by
/// event index then mask. Skip sweeps list step skips then word skips.
FaultCatalog generate_catalog(const CatalogDescriptor &descriptor,
                              const RunResult &golden);

std::string serialize_catalog(const FaultCatalog &catalog);

} // namespace thumbfi
