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

#include "thumbfi/faults.hpp"

#include <charconv>
#include <cstdio>
#include <random>
#include <sstream>

namespace thumbfi {

namespace {

uint64_t parse_u64(std::string_view text, const char *what) {
    int base = 10;
    if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
        base = 16;
        text.remove_prefix(2);
    }
    uint64_t v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v, base);
    if (ec != std::errc() || p != text.data() + text.size() || text.empty())
        throw Error(std::string("bad ") + what + " '" + std::string(text) + "'");
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    size_t start = 0;
    for (size_t k = 0; k <= s.size(); ++k) {
        if (k == s.size() || s[k] == sep) {
            out.push_back(s.substr(start, k - start));
            start = k + 1;
        }
    }
    return out;
}

} // namespace

std::string fault_kind_name(FaultKind kind) {
    switch (kind) {
    case FaultKind::FetchCorrupt:
        return "fetch";
    case FaultKind::LoadCorrupt:
        return "load";
    case FaultKind::Skip:
        return "skip";
    }
    return "?";
}

FaultSpec FaultSpec::fetch(uint64_t index, uint32_t mask) {
    if (mask == 0)
        throw Error("corruption mask must be nonzero");
    return FaultSpec(FaultKind::FetchCorrupt, index, mask,
                     SkipGranularity::OneInstruction);
}

FaultSpec FaultSpec::load(uint64_t index, uint32_t mask) {
    if (mask == 0)
        throw Error("corruption mask must be nonzero");
    return FaultSpec(FaultKind::LoadCorrupt, index, mask,
                     SkipGranularity::OneInstruction);
}

FaultSpec FaultSpec::skip(uint64_t index, SkipGranularity granularity) {
    return FaultSpec(FaultKind::Skip, index, 0, granularity);
}

std::string FaultSpec::to_string() const {
    std::string out = fault_kind_name(kind_) + " " + std::to_string(index_) + " ";
    if (kind_ == FaultKind::Skip)
        return out + (granularity_ == SkipGranularity::OneInstruction ? "insn"
                                                                      : "word");
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08X", mask_);
    return out + buf;
}

FaultSpec FaultSpec::parse(std::string_view line) {
    std::istringstream in{std::string(line)};
    std::string kind, index, last, extra;
    if (!(in >> kind >> index >> last) || (in >> extra))
        throw Error("bad fault spec '" + std::string(line) + "'");
    uint64_t idx = parse_u64(index, "event index");
    if (kind == "skip") {
        if (last == "insn")
            return skip(idx, SkipGranularity::OneInstruction);
        if (last == "word")
            return skip(idx, SkipGranularity::WholeFetchWord);
        throw Error("bad skip granularity '" + last + "'");
    }
    uint64_t mask = parse_u64(last, "mask");
    if (mask > 0xFFFFFFFFu)
        throw Error("mask wider than 32 bits");
    if (kind == "fetch")
        return fetch(idx, uint32_t(mask));
    if (kind == "load")
        return load(idx, uint32_t(mask));
    throw Error("bad fault kind '" + kind + "'");
}

uint32_t apply(const FaultSpec &spec, const Event &event) {
    if (event.index != spec.index())
        return event.value;
    switch (spec.kind()) {
    case FaultKind::FetchCorrupt:
        return event.kind == EventKind::Fetch ? event.value ^ spec.mask()
                                              : event.value;
    case FaultKind::LoadCorrupt:
        return event.kind == EventKind::Load ? event.value ^ spec.mask()
                                             : event.value;
    case FaultKind::Skip:
        if (event.kind == EventKind::Fetch &&
            spec.granularity() == SkipGranularity::WholeFetchWord)
            return kNopPair;
        return event.value;
    }
    return event.value;
}

std::array<uint16_t, 2> apply_decode(const FaultSpec &spec, uint64_t step,
                                     Width width, std::array<uint16_t, 2> hw) {
    if (spec.kind() != FaultKind::Skip ||
        spec.granularity() != SkipGranularity::OneInstruction ||
        spec.index() != step)
        return hw;
    if (width == Width::Wide32)
        return {0xF3AF, 0x8000};
    return {0xBF00, hw[1]};
}

uint32_t FaultHooks::on_fetch(const FetchEvent &e) const {
    return apply(spec_, e);
}

uint32_t FaultHooks::on_load(const LoadEvent &e) const {
    return apply(spec_, e);
}

std::array<uint16_t, 2> FaultHooks::on_decode(uint64_t step, uint32_t,
                                              Width width,
                                              std::array<uint16_t, 2> hw) const {
    return apply_decode(spec_, step, width, hw);
}

std::string event_set_name(EventSet set) {
    switch (set) {
    case EventSet::Fetch:
        return "fetch";
    case EventSet::Load:
        return "load";
    case EventSet::Both:
        return "both";
    }
    return "?";
}

EventSet parse_event_set(std::string_view text) {
    if (text == "fetch")
        return EventSet::Fetch;
    if (text == "load")
        return EventSet::Load;
    if (text == "both")
        return EventSet::Both;
    throw Error("bad event set '" + std::string(text) + "' (fetch|load|both)");
}

CatalogDescriptor CatalogDescriptor::parse(std::string_view text,
                                           EventSet events) {
    CatalogDescriptor d;
    d.events = events;
    auto parts = split(text, ':');
    auto head = parts[0];
    if (head == "exhaustive1" && parts.size() == 1) {
        d.kind = Kind::Exhaustive1;
    } else if (head == "exhaustive2" && parts.size() == 1) {
        d.kind = Kind::Exhaustive2;
    } else if (head == "sampled" && parts.size() == 4) {
        d.kind = Kind::Sampled;
        d.flips = unsigned(parse_u64(parts[1], "flip count"));
        d.count = parse_u64(parts[2], "sample count");
        d.seed = parse_u64(parts[3], "seed");
        if (d.flips < 1 || d.flips > 32)
            throw Error("sampled flip count must be in 1..32");
    } else if (head == "skips" && parts.size() <= 2) {
        d.kind = Kind::Skips;
        if (parts.size() == 2) {
            if (parts[1] == "insn")
                d.skip_words = false;
            else if (parts[1] == "word")
                d.skip_instructions = false;
            else if (parts[1] != "both")
                throw Error("bad skip granularity '" + std::string(parts[1]) + "'");
        }
    } else {
        throw Error("bad catalog descriptor '" + std::string(text) +
                    "' (exhaustive1|exhaustive2|sampled:K:N:SEED|skips[:insn|:word])");
    }
    return d;
}

std::string CatalogDescriptor::class_name() const {
    switch (kind) {
    case Kind::Exhaustive1:
        return "exhaustive1";
    case Kind::Exhaustive2:
        return "exhaustive2";
    case Kind::Sampled:
        return "sampled";
    case Kind::Skips:
        return "skips";
    }
    return "?";
}

std::string CatalogDescriptor::to_string() const {
    switch (kind) {
    case Kind::Sampled:
        return "sampled:" + std::to_string(flips) + ":" + std::to_string(count) +
               ":" + std::to_string(seed) + "@" + event_set_name(events);
    case Kind::Skips:
        if (skip_instructions && !skip_words)
            return "skips:insn";
        if (!skip_instructions && skip_words)
            return "skips:word";
        return "skips";
    default:
        return class_name() + "@" + event_set_name(events);
    }
}

FaultCatalog generate_catalog(const CatalogDescriptor &d,
                              const RunResult &golden) {
    if (golden.trace.empty())
        throw Error("empty trace: golden run produced no events");
    FaultCatalog cat;
    cat.descriptor = d;
    const uint64_t nf = golden.fetch_count();
    const uint64_t nl = golden.load_count();
    const bool use_f = d.events != EventSet::Load;
    const bool use_l = d.events != EventSet::Fetch;

    auto per_event = [&](auto &&emit_masks) {
        if (use_f)
            for (uint64_t e = 0; e < nf; ++e)
                emit_masks([&](uint32_t m) { cat.specs.push_back(FaultSpec::fetch(e, m)); });
        if (use_l)
            for (uint64_t e = 0; e < nl; ++e)
                emit_masks([&](uint32_t m) { cat.specs.push_back(FaultSpec::load(e, m)); });
    };

    switch (d.kind) {
    case CatalogDescriptor::Kind::Exhaustive1:
        per_event([](auto &&push) {
            for (unsigned b = 0; b < 32; ++b)
                push(1u << b);
        });
        break;
    case CatalogDescriptor::Kind::Exhaustive2:
        per_event([](auto &&push) {
            for (unsigned b1 = 0; b1 < 32; ++b1)
                for (unsigned b2 = b1 + 1; b2 < 32; ++b2)
                    push((1u << b1) | (1u << b2));
        });
        break;
    case CatalogDescriptor::Kind::Sampled: {
        const uint64_t total = (use_f ? nf : 0) + (use_l ? nl : 0);
        if (total == 0)
            throw Error("empty trace: no events of the requested kind");
        std::mt19937_64 rng(d.seed);
        for (uint64_t n = 0; n < d.count; ++n) {
            uint64_t ev = rng() % total;
            uint32_t mask = 0;
            while (unsigned(std::popcount(mask)) < d.flips)
                mask |= 1u << (rng() % 32);
            bool is_fetch = use_f && ev < nf;
            uint64_t idx = is_fetch ? ev : ev - (use_f ? nf : 0);
            cat.specs.push_back(is_fetch ? FaultSpec::fetch(idx, mask)
                                         : FaultSpec::load(idx, mask));
        }
        break;
    }
    case CatalogDescriptor::Kind::Skips:
        if (d.skip_instructions)
            for (uint64_t s = 0; s < golden.steps; ++s)
                cat.specs.push_back(
                    FaultSpec::skip(s, SkipGranularity::OneInstruction));
        if (d.skip_words)
            for (uint64_t e = 0; e < nf; ++e)
                cat.specs.push_back(
                    FaultSpec::skip(e, SkipGranularity::WholeFetchWord));
        break;
    }
    return cat;
}

std::string serialize_catalog(const FaultCatalog &catalog) {
    std::string out;
    for (const auto &s : catalog.specs)
        out += s.to_string() + "\n";
    return out;
}

} // namespace thumbfi
