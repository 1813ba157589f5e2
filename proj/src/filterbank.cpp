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

#include "mbd/filterbank.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mbd/hash.hpp"

namespace mbd {

double mel(double hz) {
    if (hz < 0.0) throw std::invalid_argument("mel: negative frequency");
    return 2595.0 * std::log10(1.0 + hz / 700.0);
}

double mel_inv(double mel_value) {
    if (mel_value < 0.0) throw std::invalid_argument("mel_inv: negative mel value");
    return 700.0 * (std::pow(10.0, mel_value / 2595.0) - 1.0);
}

std::vector<double> mel_cutoffs(int sample_rate, int n_bands) {
    if (n_bands < 1) throw std::invalid_argument("n_bands must be >= 1");
    const double top = mel(0.5 * sample_rate);
    std::vector<double> cutoffs;
    for (int i = 1; i < n_bands; ++i) cutoffs.push_back(mel_inv(i * top / n_bands));
    return cutoffs;
}

std::vector<double> linear_cutoffs(int sample_rate, int n_bands) {
    if (n_bands < 1) throw std::invalid_argument("n_bands must be >= 1");
    std::vector<double> cutoffs;
    for (int i = 1; i < n_bands; ++i) cutoffs.push_back(0.5 * sample_rate * i / n_bands);
    return cutoffs;
}

namespace {

// Hann-windowed sinc low-pass, normalized to unit DC gain.
std::vector<double> windowed_sinc(double cutoff_hz, int sample_rate, int len) {
    const double fc = cutoff_hz / sample_rate;  // cycles per sample
    const int half = len / 2;
    std::vector<double> h(len);
    double sum = 0.0;
    for (int n = 0; n < len; ++n) {
        const double m = n - half;
        const double ideal = m == 0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * m) / (std::numbers::pi * m);
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / (len - 1));
        h[n] = ideal * w;
        sum += h[n];
    }
    for (auto& v : h) v /= sum;
    return h;
}

std::size_t reflect_index(long i, long n) {
    if (n == 1) return 0;
    const long period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return static_cast<std::size_t>(i < n ? i : period - i);
}

}  // namespace

FilterBank design_bands_with_cutoffs(int sample_rate, std::vector<double> cutoffs_hz, int kernel_len) {
    if (sample_rate <= 0) throw std::invalid_argument("design_bands: sample_rate must be positive");
    if (kernel_len < 63 || kernel_len % 2 == 0) {
        throw std::invalid_argument("design_bands: kernel_len must be odd and >= 63");
    }
    const double nyquist = 0.5 * sample_rate;
    for (std::size_t i = 0; i < cutoffs_hz.size(); ++i) {
        if (!(cutoffs_hz[i] > 0.0 && cutoffs_hz[i] < nyquist)) {
            throw std::invalid_argument("design_bands: cutoff outside (0, Nyquist)");
        }
        if (i > 0 && !(cutoffs_hz[i] > cutoffs_hz[i - 1])) {
            throw std::invalid_argument("design_bands: cutoffs must be strictly ascending");
        }
    }

    // Hann transition width is roughly 4/kernel_len of Nyquist; a band
    // narrower than that cannot be isolated.
    const double min_width = 4.0 / kernel_len * nyquist;
    double prev = 0.0;
    for (double c : cutoffs_hz) {
        if (c - prev < min_width) {
            warn("filterbank: band [" + std::to_string(prev) + ", " + std::to_string(c) +
                 ") Hz is narrower than the kernel transition (" + std::to_string(min_width) +
                 " Hz); use a longer kernel");
            break;
        }
        prev = c;
    }

    FilterBank bank;
    bank.sample_rate = sample_rate;
    bank.kernel_len = kernel_len;
    bank.cutoffs_hz = std::move(cutoffs_hz);
    for (double c : bank.cutoffs_hz) bank.lowpass.push_back(windowed_sinc(c, sample_rate, kernel_len));

    std::vector<double> delta(kernel_len, 0.0);
    delta[kernel_len / 2] = 1.0;
    const std::size_t n_bands = bank.cutoffs_hz.size() + 1;
    for (std::size_t b = 0; b < n_bands; ++b) {
        const std::vector<double>& upper = b + 1 < n_bands ? bank.lowpass[b] : delta;
        std::vector<double> k = upper;
        if (b > 0) {
            for (int n = 0; n < kernel_len; ++n) k[n] -= bank.lowpass[b - 1][n];
        }
        bank.kernels.push_back(std::move(k));
    }
    return bank;
}

FilterBank design_bands(int sample_rate, int n_bands, int kernel_len) {
    return design_bands_with_cutoffs(sample_rate, mel_cutoffs(sample_rate, n_bands), kernel_len);
}

std::vector<std::vector<double>> split_samples(std::span<const double> x, const FilterBank& bank) {
    const std::size_t n = x.size();
    const int half = bank.kernel_len / 2;
    std::vector<std::vector<double>> out(bank.n_bands(), std::vector<double>(n, 0.0));
    if (n == 0) return out;

    std::vector<double> padded(n + 2 * half);
    for (long i = 0; i < static_cast<long>(padded.size()); ++i) {
        padded[i] = x[reflect_index(i - half, static_cast<long>(n))];
    }

    // Low-pass outputs, then bands as their successive differences.
    std::vector<std::vector<double>> lp(bank.lowpass.size(), std::vector<double>(n));
    for (std::size_t c = 0; c < bank.lowpass.size(); ++c) {
        const double* h = bank.lowpass[c].data();
        for (std::size_t i = 0; i < n; ++i) {
            const double* p = padded.data() + i;
            double acc = 0.0;
            for (int k = 0; k < bank.kernel_len; ++k) acc += h[k] * p[k];
            lp[c][i] = acc;
        }
    }
    const std::size_t last = out.size() - 1;
    for (std::size_t i = 0; i < n; ++i) {
        double below = 0.0;
        for (std::size_t b = 0; b < last; ++b) {
            out[b][i] = lp[b][i] - below;
            below = lp[b][i];
        }
        out[last][i] = x[i] - below;
    }
    return out;
}

BandSet split(const AudioSignal& x, std::shared_ptr<const FilterBank> bank) {
    if (!bank) throw std::invalid_argument("split: null filterbank");
    if (x.sample_rate() != bank->sample_rate) {
        throw std::invalid_argument("split: sample rate " + std::to_string(x.sample_rate()) +
                                    " does not match filterbank rate " + std::to_string(bank->sample_rate));
    }
    BandSet set;
    for (auto& b : split_samples(x.samples(), *bank)) set.bands.emplace_back(std::move(b), x.sample_rate());
    set.bank = std::move(bank);
    return set;
}

AudioSignal merge(const BandSet& set) {
    if (set.bands.empty()) throw std::invalid_argument("merge: empty band set");
    const std::size_t n = set.bands.front().size();
    std::vector<double> out(n, 0.0);
    for (const auto& b : set.bands) {
        if (b.size() != n) throw std::invalid_argument("merge: band length mismatch");
        if (b.sample_rate() != set.bands.front().sample_rate()) {
            throw std::invalid_argument("merge: band sample rate mismatch");
        }
        for (std::size_t i = 0; i < n; ++i) out[i] += b.samples()[i];
    }
    return AudioSignal(std::move(out), set.bands.front().sample_rate());
}

nlohmann::json to_json(const FilterBank& bank) {
    return {{"sample_rate", bank.sample_rate},
            {"n_bands", bank.n_bands()},
            {"kernel_len", bank.kernel_len},
            {"cutoffs_hz", bank.cutoffs_hz}};
}

FilterBank filterbank_from_json(const nlohmann::json& j) {
    auto bank = design_bands_with_cutoffs(j.at("sample_rate").get<int>(),
                                          j.at("cutoffs_hz").get<std::vector<double>>(),
                                          j.at("kernel_len").get<int>());
    if (bank.n_bands() != j.at("n_bands").get<int>()) {
        throw DataError("filterbank profile: n_bands inconsistent with cutoffs");
    }
    return bank;
}

std::string filterbank_hash(const FilterBank& bank) {
    return hash_hex(to_json(bank).dump());
}

}  // namespace mbd
