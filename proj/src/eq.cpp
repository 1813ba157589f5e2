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

#include "mbd/eq.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mbd/hash.hpp"

namespace mbd {

void EqProfile::validate() const {
    if (!bank) throw std::invalid_argument("EqProfile: missing filterbank");
    const auto n = static_cast<std::size_t>(bank->n_bands());
    if (sigma_noise.size() != n || sigma_data.size() != n) {
        throw std::invalid_argument("EqProfile: sigma vectors must have one entry per band");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!(sigma_noise[i] > 0.0) || !(sigma_data[i] > 0.0)) {
            throw std::invalid_argument("EqProfile: band deviations must be positive");
        }
    }
    if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("EqProfile: rho must lie in [0, 1]");
}

std::vector<double> EqProfile::gains() const {
    std::vector<double> g(sigma_noise.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::pow(sigma_noise[i] / sigma_data[i], rho);
    return g;
}

std::vector<double> EqProfile::inverse_gains() const {
    std::vector<double> g(sigma_noise.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::pow(sigma_data[i] / sigma_noise[i], rho);
    return g;
}

NoiseBandStats noise_band_stats(const FilterBank& bank, std::size_t n_samples, RngStream& rng) {
    if (n_samples < 100000) throw std::invalid_argument("noise_band_stats: need at least 1e5 samples");
    constexpr std::size_t kBatches = 10;
    const std::size_t per_batch = n_samples / kBatches;
    const auto n_bands = static_cast<std::size_t>(bank.n_bands());

    std::vector<std::vector<double>> batch_sigma(n_bands);
    double total_count = 0.0;
    std::vector<double> total_sq(n_bands, 0.0);
    for (std::size_t b = 0; b < kBatches; ++b) {
        const auto noise = rng.gaussian_vector(per_batch);
        const auto bands = split_samples(noise, bank);
        for (std::size_t i = 0; i < n_bands; ++i) {
            double sq = 0.0;
            for (double v : bands[i]) sq += v * v;
            total_sq[i] += sq;
            batch_sigma[i].push_back(std::sqrt(sq / per_batch));
        }
        total_count += static_cast<double>(per_batch);
    }

    NoiseBandStats stats;
    for (std::size_t i = 0; i < n_bands; ++i) {
        const double sigma = std::sqrt(total_sq[i] / total_count);
        double mean = 0.0, var = 0.0;
        for (double s : batch_sigma[i]) mean += s;
        mean /= kBatches;
        for (double s : batch_sigma[i]) var += (s - mean) * (s - mean);
        var /= (kBatches - 1);
        stats.sigma.push_back(sigma);
        stats.relative_std_error.push_back(std::sqrt(var / kBatches) / sigma);
    }
    return stats;
}

BandAccumulator::BandAccumulator(int n_bands)
    : count(n_bands, 0.0), sum(n_bands, 0.0), sum_sq(n_bands, 0.0) {}

void BandAccumulator::add(const AudioSignal& x, const FilterBank& bank) {
    if (x.sample_rate() != bank.sample_rate) throw std::invalid_argument("band stats: sample rate mismatch");
    double energy = 0.0;
    for (double v : x.samples()) energy += v * v;
    const double rms = x.empty() ? 0.0 : std::sqrt(energy / static_cast<double>(x.size()));
    std::vector<double> normalized(x.vec());
    if (rms > 0.0) {
        for (auto& v : normalized) v /= rms;
    }
    const auto bands = split_samples(normalized, bank);
    for (std::size_t i = 0; i < bands.size(); ++i) {
        for (double v : bands[i]) {
            sum[i] += v;
            sum_sq[i] += v * v;
        }
        count[i] += static_cast<double>(bands[i].size());
    }
}

void BandAccumulator::merge(const BandAccumulator& other) {
    if (other.count.size() != count.size()) throw std::invalid_argument("band stats: band count mismatch");
    for (std::size_t i = 0; i < count.size(); ++i) {
        count[i] += other.count[i];
        sum[i] += other.sum[i];
        sum_sq[i] += other.sum_sq[i];
    }
}

std::vector<double> BandAccumulator::sigma(double floor) const {
    std::vector<double> s(count.size(), floor);
    for (std::size_t i = 0; i < count.size(); ++i) {
        if (count[i] <= 0.0) continue;
        const double mean = sum[i] / count[i];
        const double var = std::max(0.0, sum_sq[i] / count[i] - mean * mean);
        s[i] = std::max(floor, std::sqrt(var));
    }
    return s;
}

std::vector<double> measure_band_stats(const std::vector<AudioSignal>& corpus, const FilterBank& bank) {
    if (corpus.empty()) throw DataError("measure_band_stats: empty corpus");
    BandAccumulator acc(bank.n_bands());
    for (const auto& x : corpus) {
        if (x.size() < static_cast<std::size_t>(bank.kernel_len)) {
            throw DataError("measure_band_stats: signal shorter than the filter kernel");
        }
        acc.add(x, bank);
    }
    auto sigma = acc.sigma();
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        if (sigma[i] <= kBandStdFloor) warn("band " + std::to_string(i) + " has no energy in the corpus; floored at 1e-8");
    }
    return sigma;
}

namespace {

AudioSignal apply_gains(const AudioSignal& x, const EqProfile& profile, const std::vector<double>& gains) {
    profile.validate();
    if (x.sample_rate() != profile.bank->sample_rate) {
        throw std::invalid_argument("equalizer: sample rate " + std::to_string(x.sample_rate()) +
                                    " does not match profile rate " + std::to_string(profile.bank->sample_rate));
    }
    const auto bands = split_samples(x.samples(), *profile.bank);
    std::vector<double> out(x.size(), 0.0);
    for (std::size_t b = 0; b < bands.size(); ++b) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += gains[b] * bands[b][i];
    }
    return AudioSignal(std::move(out), x.sample_rate());
}

}  // namespace

AudioSignal equalize(const AudioSignal& x, const EqProfile& profile) {
    return apply_gains(x, profile, profile.gains());
}

AudioSignal deequalize(const AudioSignal& y, const EqProfile& profile) {
    return apply_gains(y, profile, profile.inverse_gains());
}

nlohmann::json to_json(const EqProfile& profile) {
    return {{"bank", to_json(*profile.bank)},
            {"sigma_noise", profile.sigma_noise},
            {"sigma_data", profile.sigma_data},
            {"rho", profile.rho}};
}

EqProfile eq_profile_from_json(const nlohmann::json& j) {
    EqProfile p;
    p.bank = std::make_shared<const FilterBank>(filterbank_from_json(j.at("bank")));
    p.sigma_noise = j.at("sigma_noise").get<std::vector<double>>();
    p.sigma_data = j.at("sigma_data").get<std::vector<double>>();
    p.rho = j.at("rho").get<double>();
    p.validate();
    return p;
}

std::string eq_profile_hash(const EqProfile& profile) {
    return hash_hex(to_json(profile).dump());
}

}  // namespace mbd
