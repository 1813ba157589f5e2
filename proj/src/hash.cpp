// Copyright 2026 The mbdiff Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mbd/hash.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <vector>

#include "mbd/error.hpp"

namespace mbd {

void Fnv1a::update(std::span<const std::uint8_t> bytes) {
    for (std::uint8_t b : bytes) {
        state_ ^= b;
        state_ *= 0x100000001b3ULL;
    }
}

void Fnv1a::update(std::string_view text) {
    update(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string Fnv1a::hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(state_));
    return buf;
}

std::string hash_hex(std::string_view text) {
    Fnv1a h;
    h.update(text);
    return h.hex();
}

std::string hash_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open for hashing: " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Fnv1a h;
    h.update(std::string_view(bytes.data(), bytes.size()));
    return h.hex();
}

namespace {
WarningSink& sink_slot() {
    static WarningSink sink;
    return sink;
}
}  // namespace

void warn(const std::string& message) {
    if (auto& s = sink_slot()) {
        s(message);
    } else {
        std::fprintf(stderr, "warning: %s\n", message.c_str());
    }
}

WarningSink set_warning_sink(WarningSink sink) {
    auto previous = std::move(sink_slot());
    sink_slot() = std::move(sink);
    return previous;
}

}  // namespace mbd
