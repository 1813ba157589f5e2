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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mbd/error.hpp"

namespace mbd {

// Mono sample sequence plus its sample rate. Samples are finite; the
// object is immutable once built.
class AudioSignal {
public:
    AudioSignal() = default;
    AudioSignal(std::vector<double> samples, int sample_rate);

    std::span<const double> samples() const { return samples_; }
    const std::vector<double>& vec() const { return samples_; }
    int sample_rate() const { return sample_rate_; }
    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }
    double duration() const { return static_cast<double>(samples_.size()) / sample_rate_; }

private:
    std::vector<double> samples_;
    int sample_rate_ = 1;
};

// Deterministic random source: mt19937_64 bits, 53-bit uniforms,
// Box-Muller Gaussians. The algorithm id is written into run manifests
// so a seed means the same draws across releases.
class RngStream {
public:
    static constexpr const char* kAlgorithm = "mt19937_64/u53/box-muller/v1";

    explicit RngStream(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }
    // Uniform on [0, 1).
    double uniform();
    // Uniform integer on [0, n).
    std::uint64_t uniform_int(std::uint64_t n);
    double gaussian();
    std::vector<double> gaussian_vector(std::size_t n);

    // Child stream seeded from (seed, id) only; independent of how much
    // of this stream has been consumed.
    RngStream child(std::uint64_t id) const;

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

enum class WavEncoding { pcm16, float32 };

class WavError : public DataError {
public:
    enum class Kind { missing_file, malformed_header, unsupported_encoding, unwritable_path };
    WavError(Kind kind, const std::string& message) : DataError(message), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// Reads PCM16 or IEEE float32 RIFF/WAVE; stereo is averaged to mono.
AudioSignal load_wav(const std::filesystem::path& path);

// Returns the number of samples clipped to [-1, 1] (pcm16 only).
std::size_t save_wav(const AudioSignal& signal, const std::filesystem::path& path,
                     WavEncoding encoding = WavEncoding::float32);

enum class SynthKind { sine_mixture, chirp, white_noise, pulse_train };

struct SynthSpec {
    SynthKind kind = SynthKind::sine_mixture;
    // sine_mixture: one entry per component. chirp: {start, end}.
    // pulse_train: {pulse rate}. white_noise: unused.
    std::vector<double> frequencies_hz;
    // sine_mixture: per component; other kinds use amplitudes[0] (default 1).
    std::vector<double> amplitudes;
    // sine_mixture only, radians; missing entries are 0.
    std::vector<double> phases;
};

AudioSignal synthesize(const SynthSpec& spec, double duration_s, int sample_rate, RngStream& rng);

std::string to_string(SynthKind kind);
SynthKind synth_kind_from_string(const std::string& name);

}  // namespace mbd
