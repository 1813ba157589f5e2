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
#include <string>
#include <vector>

#include <json.hpp>

#include "mbd/audio.hpp"
#include "mbd/filterbank.hpp"

namespace mbd {

constexpr double kBandStdFloor = 1e-8;

// Per-band rebalancing b_i * (sigma_noise_i / sigma_data_i)^rho.
struct EqProfile {
    std::shared_ptr<const FilterBank> bank;
    std::vector<double> sigma_noise;
    std::vector<double> sigma_data;
    double rho = 0.4;

    void validate() const;
    std::vector<double> gains() const;
    std::vector<double> inverse_gains() const;
};

struct NoiseBandStats {
    std::vector<double> sigma;
    // Relative standard error of each sigma, from 10 batch means.
    std::vector<double> relative_std_error;
};

NoiseBandStats noise_band_stats(const FilterBank& bank, std::size_t n_samples, RngStream& rng);

// Mergeable sufficient statistics for pooled band deviations, so corpus
// shards can be accumulated independently.
struct BandAccumulator {
    std::vector<double> count, sum, sum_sq;

    explicit BandAccumulator(int n_bands = 0);
    void add(const AudioSignal& x, const FilterBank& bank);
    void merge(const BandAccumulator& other);
    std::vector<double> sigma(double floor = kBandStdFloor) const;
};

// Pooled band deviations over unit-variance-normalized signals. Bands with
// no energy are floored at 1e-8 with a warning.
std::vector<double> measure_band_stats(const std::vector<AudioSignal>& corpus, const FilterBank& bank);

AudioSignal equalize(const AudioSignal& x, const EqProfile& profile);
AudioSignal deequalize(const AudioSignal& y, const EqProfile& profile);

nlohmann::json to_json(const EqProfile& profile);
EqProfile eq_profile_from_json(const nlohmann::json& j);
std::string eq_profile_hash(const EqProfile& profile);

}  // namespace mbd
