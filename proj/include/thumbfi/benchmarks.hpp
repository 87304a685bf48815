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

#include "thumbfi/campaign.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace thumbfi {

/// A bundled test program with its golden expectation.
struct Benchmark {
    std::string name;
    std::string source;
    Target target;
    uint32_t expected = 0;
    bool has_error_handler = false;
    /// Further golden values (register, special register or mem:ADDR).
    std::map<std::string, uint32_t> checks;
    std::string notes;
};

const std::vector<std::string> &benchmark_names();
/// Throws Error for an unknown name.
Benchmark load_benchmark(const std::string &name);
/// The manifest document the fixtures ship with.
const std::string &benchmark_manifest();

} // namespace thumbfi
