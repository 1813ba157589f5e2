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

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mbd/audio.hpp"

namespace mbd {

// HTK mel scale: m = 2595 * log10(1 + f / 700).
double mel(double hz);
double mel_inv(double mel_value);

// Complementary FIR band splitter. Band 0 is LP(c1), band i is
// LP(c_{i+1}) - LP(c_i), the top band is delta - LP(c_{B-1}); the kernels
// therefore sum to a centered unit impulse.
struct FilterBank {
    int sample_rate = 0;
    int kernel_len = 0;
    std::vector<double> cutoffs_hz;           // n_bands - 1, strictly ascending
    std::vector<std::vector<double>> lowpass; // one Hann-windowed sinc per cutoff
    std::vector<std::vector<double>> kernels; // n_bands band kernels

    int n_bands() const { return static_cast<int>(kernels.size()); }
};

constexpr int kDefaultKernelLen = 255;

// Cutoffs at mel_inv(i * mel(sr/2) / n_bands), i = 1..n_bands-1.
std::vector<double> mel_cutoffs(int sample_rate, int n_bands);
std::vector<double> linear_cutoffs(int sample_rate, int n_bands);

FilterBank design_bands(int sample_rate, int n_bands, int kernel_len = kDefaultKernelLen);
FilterBank design_bands_with_cutoffs(int sample_rate, std::vector<double> cutoffs_hz,
                                     int kernel_len = kDefaultKernelLen);

struct BandSet {
    std::vector<AudioSignal> bands;
    std::shared_ptr<const FilterBank> bank;
};

// Zero-phase split: centered convolution with reflect padding of
// kernel_len/2 samples on both sides. Output bands match x in length.
BandSet split(const AudioSignal& x, std::shared_ptr<const FilterBank> bank);
std::vector<std::vector<double>> split_samples(std::span<const double> x, const FilterBank& bank);

AudioSignal merge(const BandSet& bands);

nlohmann::json to_json(const FilterBank& bank);
FilterBank filterbank_from_json(const nlohmann::json& j);
// Identity of the bank's defining parameters.
std::string filterbank_hash(const FilterBank& bank);

}  // namespace mbd
