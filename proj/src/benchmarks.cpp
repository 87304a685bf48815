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

#include "thumbfi/benchmarks.hpp"

#include <json.hpp>

namespace thumbfi {

// Generated from fixtures/ at configure time.
namespace embedded {
extern const std::map<std::string, std::string> &fixture_files();
}

namespace {

uint32_t parse_hex_word(const std::string &text) {
    size_t used = 0;
    unsigned long v = std::stoul(text, &used, 16);
    if (used != text.size() || v > 0xFFFFFFFFul)
        throw Error("manifest: bad value '" + text + "'");
    return uint32_t(v);
}

const std::string &file(const std::string &name) {
    const auto &files = embedded::fixture_files();
    auto it = files.find(name);
    if (it == files.end())
        throw Error("missing fixture file '" + name + "'");
    return it->second;
}

} // namespace

const std::string &benchmark_manifest() { return file("manifest.json"); }

const std::vector<std::string> &benchmark_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        auto j = nlohmann::json::parse(benchmark_manifest());
        for (const auto &b : j.at("benchmarks"))
            out.push_back(b.at("name").get<std::string>());
        return out;
    }();
    return names;
}

Benchmark load_benchmark(const std::string &name) {
    auto j = nlohmann::json::parse(benchmark_manifest());
    for (const auto &b : j.at("benchmarks")) {
        if (b.at("name").get<std::string>() != name)
            continue;
        Benchmark out;
        out.name = name;
        out.source = file(b.at("file").get<std::string>());
        out.target = Target::parse(b.at("target").get<std::string>());
        out.expected = parse_hex_word(b.at("expected").get<std::string>());
        for (const auto &[k, v] : b.at("checks").items())
            out.checks[k] = parse_hex_word(v.get<std::string>());
        out.notes = b.at("notes").get<std::string>();
        out.has_error_handler = parse(out.source).error_handler.has_value();
        return out;
    }
    std::string known;
    for (const auto &n : benchmark_names())
        known += (known.empty() ? "" : ", ") + n;
    throw Error("unknown benchmark '" + name + "' (" + known + ")");
}

} // namespace thumbfi
