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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace thumbfi {

enum class Scheme { FaultTolerance, FaultDetection };

std::string scheme_name(Scheme scheme); // "ft" / "fd"
Scheme parse_scheme(std::string_view text);

struct RewritePlan {
    Scheme scheme = Scheme::FaultTolerance;
    /// Mnemonics to rewrite (`ldr` covers both ldr forms, conditional
    /// branches are `beq`/`bne`). Empty means every supported instruction.
    std::vector<std::string> only;
    /// Widen every emitted instruction that has a 32-bit form. With an empty
    /// filter this includes instructions passed through unchanged.
    bool force_wide = false;
    /// Scratch register. When absent the first register of the scheme's
    /// reserved set that the program never touches is taken: r1 first for
    /// fault tolerance (as in the classic bl sequence), r12 downwards for
    /// fault detection.
    std::optional<Register> scratch;
    /// Address the rewritten program will be laid out at; used to keep
    /// narrow adr targets aligned.
    uint32_t base = 0;

    std::string to_string() const;
};

/// Every mnemonic name accepted in RewritePlan::only.
const std::vector<std::string> &filter_mnemonics();

/// Mnemonics the detection scheme can protect: instructions writing a
/// general register without consuming flags.
bool fd_coverable(const Instruction &instr);

/// Scratch register the plan resolves to for this program. Throws on a
/// collision with a register the program uses or when none is free.
Register resolve_scratch(const SourceProgram &program, const RewritePlan &plan);

SourceProgram apply_fault_tolerance(const SourceProgram &program,
                                    const RewritePlan &plan);
SourceProgram apply_fault_detection(const SourceProgram &program,
                                    const RewritePlan &plan);
/// Dispatch on plan.scheme.
SourceProgram rewrite(const SourceProgram &program, const RewritePlan &plan);

} // namespace thumbfi
