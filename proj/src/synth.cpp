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

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mbd/audio.hpp"

namespace mbd {

namespace {

double amplitude_or(const SynthSpec& spec, std::size_t i, double fallback) {
    return i < spec.amplitudes.size() ? spec.amplitudes[i] : fallback;
}

void check_band_limit(const SynthSpec& spec, int sample_rate) {
    const double nyquist = 0.5 * sample_rate;
    for (double f : spec.frequencies_hz) {
        if (f < 0.0) throw std::invalid_argument("synthesize: negative frequency");
        if (f >= nyquist) {
            throw std::invalid_argument("synthesize: component at " + std::to_string(f) +
                                        " Hz aliases (Nyquist " + std::to_string(nyquist) + " Hz)");
        }
    }
}

}  // namespace

AudioSignal synthesize(const SynthSpec& spec, double duration_s, int sample_rate, RngStream& rng) {
    if (!(duration_s > 0.0)) throw std::invalid_argument("synthesize: duration must be positive");
    if (sample_rate <= 0) throw std::invalid_argument("synthesize: sample_rate must be positive");
    check_band_limit(spec, sample_rate);

    const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
    const double sr = sample_rate;
    std::vector<double> out(n, 0.0);

    switch (spec.kind) {
        case SynthKind::sine_mixture: {
            for (std::size_t c = 0; c < spec.frequencies_hz.size(); ++c) {
                const double f = spec.frequencies_hz[c];
                const double a = amplitude_or(spec, c, 1.0);
                const double ph = c < spec.phases.size() ? spec.phases[c] : 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    out[k] += a * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(k) / sr + ph);
                }
            }
            break;
        }
        case SynthKind::chirp: {
            if (spec.frequencies_hz.size() != 2) {
                throw std::invalid_argument("synthesize: chirp needs {start, end} frequencies");
            }
            const double f0 = spec.frequencies_hz[0];
            const double f1 = spec.frequencies_hz[1];
            const double a = amplitude_or(spec, 0, 1.0);
            for (std::size_t k = 0; k < n; ++k) {
                const double t = static_cast<double>(k) / sr;
                const double phase = 2.0 * std::numbers::pi * (f0 * t + 0.5 * (f1 - f0) * t * t / duration_s);
                out[k] = a * std::sin(phase);
            }
            break;
        }
        case SynthKind::white_noise: {
            const double a = amplitude_or(spec, 0, 1.0);
            for (auto& v : out) v = a * rng.gaussian();
            break;
        }
        case SynthKind::pulse_train: {
            if (spec.frequencies_hz.size() != 1 || !(spec.frequencies_hz[0] > 0.0)) {
                throw std::invalid_argument("synthesize: pulse train needs one positive rate");
            }
            const double a = amplitude_or(spec, 0, 1.0);
            const double period = sr / spec.frequencies_hz[0];
            for (double pos = 0.0; pos < static_cast<double>(n); pos += period) {
                out[static_cast<std::size_t>(pos)] = a;
            }
            break;
        }
    }
    return AudioSignal(std::move(out), sample_rate);
}

}  // namespace mbd
