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


#include <doctest.h>

#include <cmath>
#include <memory>

#include "mbd/filterbank.hpp"
#include "test_util.hpp"

using namespace mbd;
using mbd::testing::snr_db;
using mbd::testing::energy;

namespace {

AudioSignal noise(std::size_t n, int sr, std::uint64_t seed) {
    RngStream rng(seed);
    return AudioSignal(rng.gaussian_vector(n), sr);
}

AudioSignal chirp(int sr, double duration) {
    RngStream rng(0);
    return synthesize({SynthKind::chirp, {80.0, 0.45 * sr}, {0.7}, {}}, duration, sr, rng);
}

}  // namespace

TEST_CASE("mel scale") {
    CHECK(mel(0.0) == 0.0);
    CHECK(mel(1000.0) == doctest::Approx(999.9855371396244).epsilon(1e-12));
    CHECK(std::abs(mel_inv(mel(4000.0)) - 4000.0) < 1e-6);
}

TEST_CASE("one band is a centered delta") {
    const auto bank = design_bands(8000, 1);
    REQUIRE(bank.n_bands() == 1);
    for (int k = 0; k < bank.kernel_len; ++k) CHECK(bank.kernels[0][k] == (k == bank.kernel_len / 2 ? 1.0 : 0.0));
}

TEST_CASE("mel cutoffs at 24 kHz") {
    const auto c = mel_cutoffs(24000, 4);
    REQUIRE(c.size() == 3);
    CHECK(c[0] == doctest::Approx(744.6893133897614).epsilon(1e-12));
    CHECK(c[1] == doctest::Approx(2281.610303175115).epsilon(1e-12));
    CHECK(c[2] == doctest::Approx(5453.572202414133).epsilon(1e-12));
}

TEST_CASE("band kernels sum to a delta") {
    for (int n_bands : {4, 8}) {
        const auto bank = design_bands(8000, n_bands);
        for (int k = 0; k < bank.kernel_len; ++k) {
            double s = 0.0;
            for (const auto& h : bank.kernels) s += h[k];
            CHECK(std::abs(s - (k == bank.kernel_len / 2 ? 1.0 : 0.0)) <= 1e-6);
        }
    }
}

TEST_CASE("a low tone lands in band 0") {
    auto bank = std::make_shared<const FilterBank>(design_bands(24000, 4));
    RngStream rng(0);
    const auto x = synthesize({SynthKind::sine_mixture, {100.0}, {1.0}, {}}, 0.5, 24000, rng);
    const auto set = split(x, bank);
    double total = 0.0;
    for (const auto& b : set.bands) total += energy(b.samples());
    CHECK(energy(set.bands[0].samples()) / total >= 0.99);
}

TEST_CASE("split of silence is silent") {
    auto bank = std::make_shared<const FilterBank>(design_bands(8000, 4));
    const auto set = split(AudioSignal(std::vector<double>(500, 0.0), 8000), bank);
    for (const auto& b : set.bands) CHECK(energy(b.samples()) == 0.0);
}

TEST_CASE("merge of split reconstructs noise and chirps") {
    for (int n_bands : {4, 8}) {
        auto bank = std::make_shared<const FilterBank>(design_bands(8000, n_bands));
        for (const auto& x : {noise(16000, 8000, 3), chirp(8000, 2.0)}) {
            const auto y = merge(split(x, bank));
            CHECK(snr_db(x.samples(), y.samples()) >= 40.0);
        }
    }
}

TEST_CASE("merge is a plain sum") {
    auto bank = std::make_shared<const FilterBank>(design_bands(8000, 4));
    const auto x = noise(2000, 8000, 9);
    auto set = split(x, bank);
    const auto full = merge(set);
    const auto dropped = set.bands[2];
    set.bands[2] = AudioSignal(std::vector<double>(x.size(), 0.0), 8000);
    const auto partial = merge(set);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(partial.vec()[i] == doctest::Approx(full.vec()[i] - dropped.vec()[i]).epsilon(1e-12));
    }

    auto one = std::make_shared<const FilterBank>(design_bands(8000, 1));
    const auto same = merge(split(x, one));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(same.vec()[i] == doctest::Approx(x.vec()[i]).epsilon(1e-15));
}

TEST_CASE("split keeps length for signals shorter than the kernel") {
    auto bank = std::make_shared<const FilterBank>(design_bands(8000, 4));
    const auto x = noise(10, 8000, 1);
    const auto set = split(x, bank);
    for (const auto& b : set.bands) CHECK(b.size() == 10);
}

TEST_CASE("filterbank json round trip keeps the hash") {
    const auto bank = design_bands(8000, 4);
    const auto back = filterbank_from_json(to_json(bank));
    CHECK(filterbank_hash(back) == filterbank_hash(bank));
    CHECK(back.kernels == bank.kernels);
    CHECK(filterbank_hash(design_bands(8000, 8)) != filterbank_hash(bank));
}

TEST_CASE("design rejects bad cutoffs") {
    CHECK_THROWS(design_bands_with_cutoffs(8000, {1000.0, 500.0}));
    CHECK_THROWS(design_bands_with_cutoffs(8000, {4000.0}));
    CHECK_THROWS(design_bands(8000, 4, 254));
}
