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

#include "mbd/audio.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace mbd {

AudioSignal::AudioSignal(std::vector<double> samples, int sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
    if (sample_rate_ <= 0) throw std::invalid_argument("sample_rate must be positive");
    for (double v : samples_) {
        if (!std::isfinite(v)) throw DataError("audio samples must be finite");
    }
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

double RngStream::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_int(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
        r = engine_();
    } while (r >= limit);
    return r % n;
}

double RngStream::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::vector<double> RngStream::gaussian_vector(std::size_t n) {
    std::vector<double> out(n);
    for (auto& v : out) v = gaussian();
    return out;
}

RngStream RngStream::child(std::uint64_t id) const {
    return RngStream(splitmix64(seed_ ^ splitmix64(id + 0x632be59bd9b4e019ULL)));
}

std::string to_string(SynthKind kind) {
    switch (kind) {
        case SynthKind::sine_mixture: return "sine-mixture";
        case SynthKind::chirp: return "chirp";
        case SynthKind::white_noise: return "white-noise";
        case SynthKind::pulse_train: return "pulse-train";
    }
    return "unknown";
}

SynthKind synth_kind_from_string(const std::string& name) {
    if (name == "sine-mixture") return SynthKind::sine_mixture;
    if (name == "chirp") return SynthKind::chirp;
    if (name == "white-noise") return SynthKind::white_noise;
    if (name == "pulse-train") return SynthKind::pulse_train;
    throw std::invalid_argument("unknown synth kind: " + name);
}

}  // namespace mbd
