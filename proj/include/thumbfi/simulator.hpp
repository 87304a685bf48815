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

#include "thumbfi/assembler.hpp"
#include "thumbfi/isa.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace thumbfi {

enum class EventKind { Fetch, Load };

/// One bus transfer: an instruction fetch of an aligned word or the data read
/// of an ldr. `value` is the raw word before any hook ran.
struct Event {
    EventKind kind;
    uint64_t index; // per-kind counter
    uint32_t address;
    uint32_t value;
    bool operator==(const Event &) const = default;
};

using FetchEvent = Event;
using LoadEvent = Event;

/// Injection points. The defaults are the identity.
class Hooks {
  public:
    virtual ~Hooks() = default;
    virtual uint32_t on_fetch(const FetchEvent &e) const { return e.value; }
    virtual uint32_t on_load(const LoadEvent &e) const { return e.value; }
    /// Called once per step with the instruction's halfwords (hw2 unused for
    /// narrow instructions) before decode.
    virtual std::array<uint16_t, 2> on_decode(uint64_t step, uint32_t address,
                                              Width width,
                                              std::array<uint16_t, 2> hw) const {
        (void)step, (void)address, (void)width;
        return hw;
    }
};

struct Limits {
    uint64_t max_steps = 10000;
    /// Reaching this address stops the run (the fault-detection handler).
    /// Defaults to the image's error handler.
    std::optional<uint32_t> error_handler;
};

struct RunResult {
    MachineState final_state;
    std::vector<Event> trace; // fetch and load events in bus order
    uint64_t steps = 0;
    bool error_handler_reached = false;
    /// Address of the instruction executed at each step.
    std::vector<uint32_t> executed;

    uint64_t fetch_count() const;
    uint64_t load_count() const;
    std::vector<Event> events(EventKind kind) const;
    bool operator==(const RunResult &) const = default;
};

/// Step-wise executor. Most callers want run().
class Simulator {
  public:
    Simulator(const ProgramImage &image, MachineState initial,
              Limits limits = {}, const Hooks *hooks = nullptr);

    /// Execute one instruction. Returns false once the state has stopped.
    bool step();
    const MachineState &state() const { return state_; }
    RunResult finish() &&;

  private:
    bool fetch(uint32_t aligned);
    std::optional<uint16_t> halfword_at(uint32_t address);
    std::optional<uint32_t> load(uint32_t address, uint32_t pc);
    bool store(uint32_t address, uint32_t value, uint32_t pc);
    void execute(const Instruction &instr, uint32_t pc, Width width);
    void branch_to(uint32_t target);

    const ProgramImage &image_;
    MachineState state_;
    Limits limits_;
    const Hooks *hooks_;
    Hooks identity_;
    RunResult result_;
    std::optional<std::pair<uint32_t, uint32_t>> buffer_; // aligned addr, word
    uint64_t fetches_ = 0;
    uint64_t loads_ = 0;
    std::optional<uint32_t> stop_at_;
};

RunResult run(const ProgramImage &image, const MachineState &initial,
              const Limits &limits = {}, const Hooks *hooks = nullptr);
/// Run from the image entry with a reset state.
RunResult run(const ProgramImage &image, const Limits &limits = {},
              const Hooks *hooks = nullptr);

/// The 4-aligned fetch word containing `address`.
std::pair<uint32_t, uint32_t> fetch_word_of(const ProgramImage &image,
                                            uint32_t address);

/// `F index addr word` / `L index addr value` lines.
std::string dump_trace(const RunResult &result);

/// Registers, specials and status, one per line.
std::string dump_state(const MachineState &state);

} // namespace thumbfi
