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
#include <vector>

#include "mbd/diffusion.hpp"
#include "test_util.hpp"

using namespace mbd;

namespace {

double mean_of(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    return m / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / static_cast<double>(v.size());
}

// Two steps with beta = 0.5 each: alpha_bar = {0.5, 0.25}.
NoiseSchedule two_step_schedule() {
    NoiseSchedule s;
    s.T = 2;
    s.betas = {0.5, 0.5};
    s.alphas_bar = {0.5, 0.25};
    s.beta_tilde = {0.0, 0.5 * 0.5 / 0.75};
    return s;
}

class ZeroDenoiser final : public Denoiser {
public:
    std::vector<double> predict(std::span<const double> x, int, const ConditioningFrames*) const override {
        return std::vector<double>(x.size(), 0.0);
    }
};

}  // namespace

TEST_CASE("forward sample closed form") {
    const auto s = power_schedule();
    const std::vector<double> x0{0.5, -1.0, 2.0};
    const auto clean = forward_sample(x0, 300, std::vector<double>(3, 0.0), s);
    for (int i = 0; i < 3; ++i) CHECK(clean[i] == doctest::Approx(std::sqrt(s.alpha_bar(300)) * x0[i]).epsilon(1e-15));

    const std::vector<double> eps{0.1, 0.7, -0.3};
    const auto noisy = forward_sample(x0, 1000, eps, s);
    const double bound = std::sqrt(s.alpha_bar(1000)) * std::sqrt(0.25 + 1.0 + 4.0) +
                         (1.0 - std::sqrt(1.0 - s.alpha_bar(1000))) * std::sqrt(0.01 + 0.49 + 0.09);
    double dist = 0.0;
    for (int i = 0; i < 3; ++i) dist += (noisy[i] - eps[i]) * (noisy[i] - eps[i]);
    CHECK(std::sqrt(dist) <= bound + 1e-12);
    CHECK_THROWS(forward_sample(x0, 0, eps, s));
    CHECK_THROWS(forward_sample(x0, 1001, eps, s));
}

TEST_CASE("Markov chain matches the closed form in distribution") {
    const auto s = power_schedule();
    constexpr int kTrials = 100000;
    const double x0 = 1.5;
    RngStream rng(21);
    std::vector<double> x(kTrials, x0);
    for (int t = 1; t <= s.T; ++t) {
        const double a = std::sqrt(1.0 - s.beta(t)), b = std::sqrt(s.beta(t));
        for (auto& v : x) v = a * v + b * rng.gaussian();
        if (t == 100 || t == 500 || t == 1000) {
            const double mean = std::sqrt(s.alpha_bar(t)) * x0;
            const double var = 1.0 - s.alpha_bar(t);
            CAPTURE(t);
            CHECK(std::abs(mean_of(x) - mean) <= 0.02 * std::max(std::abs(mean), std::sqrt(var)));
            CHECK(std::abs(var_of(x) / var - 1.0) <= 0.02);
        }
    }
}

TEST_CASE("training pairs") {
    const auto s = power_schedule();
    SUBCASE("t is uniform over 1..T") {
        RngStream rng(5);
        std::vector<int> counts(s.T + 1, 0);
        const std::vector<double> x0{0.0};
        constexpr int kDraws = 100000;
        for (int i = 0; i < kDraws; ++i) {
            const auto p = training_pair(x0, s, rng);
            REQUIRE(p.t >= 1);
            REQUIRE(p.t <= s.T);
            ++counts[p.t];
        }
        const double expected = static_cast<double>(kDraws) / s.T;
        double chi2 = 0.0;
        for (int t = 1; t <= s.T; ++t) chi2 += (counts[t] - expected) * (counts[t] - expected) / expected;
        // 99th percentile of chi-square with 999 degrees of freedom.
        CHECK(chi2 < 1105.917);
    }
    SUBCASE("a fixed seed reproduces the pair") {
        const std::vector<double> x0{0.1, 0.2, 0.3, 0.4};
        RngStream a(9), b(9);
        const auto p = training_pair(x0, s, a), q = training_pair(x0, s, b);
        CHECK(p.t == q.t);
        CHECK(p.eps == q.eps);
        CHECK(p.x_t == q.x_t);
    }
    SUBCASE("a perfect predictor has zero loss") {
        RngStream rng(3);
        const auto p = training_pair(std::vector<double>(64, 0.5), s, rng);
        CHECK(mse(p.eps, p.eps) == 0.0);
        CHECK(mse(p.eps, std::vector<double>(64, 0.0)) > 0.0);
    }
}

TEST_CASE("reverse steps") {
    SUBCASE("a vanishing beta leaves x in place") {
        const auto s = linear_schedule(1e-12, 2e-12, 2);
        const std::vector<double> x{0.3, -2.0};
        const auto y = reverse_step(x, 1, std::vector<double>(2, 0.0), s);
        for (int i = 0; i < 2; ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-11));
    }
    SUBCASE("scalar case lands on the posterior mean") {
        const auto s = two_step_schedule();
        const double x0 = 1.0, eps = 0.3;
        const auto x2 = forward_sample(std::vector<double>{x0}, 2, std::vector<double>{eps}, s);
        const auto x1 = reverse_step(x2, 2, std::vector<double>{eps}, s);
        CHECK(x1[0] == doctest::Approx(0.8295812683257062).epsilon(1e-14));
    }
    SUBCASE("noise enters with the posterior deviation") {
        const auto s = two_step_schedule();
        const std::vector<double> x{0.4};
        const auto quiet = reverse_step(x, 2, std::vector<double>{0.1}, s);
        const auto loud = reverse_step(x, 2, std::vector<double>{0.1}, s, std::vector<double>{1.0});
        CHECK(loud[0] - quiet[0] == doctest::Approx(std::sqrt(s.posterior_variance(2))).epsilon(1e-14));
        const auto wide = reverse_step(x, 2, std::vector<double>{0.1}, s, std::vector<double>{1.0}, ReverseVariance::beta);
        CHECK(wide[0] - quiet[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
    }
    SUBCASE("adjacent steps reproduce the single-step update") {
        const auto s = power_schedule();
        const std::vector<double> x{0.2, -0.4}, e{0.5, 0.1}, z{1.0, -1.0};
        CHECK(reverse_step_between(x, 400, 399, e, s, z) == reverse_step(x, 400, e, s, z));
        CHECK_THROWS(reverse_step_between(x, 400, 400, e, s));
    }
    SUBCASE("zero model and zero prior stay at zero without noise") {
        const auto s = power_schedule();
        std::vector<double> x(8, 0.0);
        for (int t = s.T; t >= 1; --t) x = reverse_step(x, t, std::vector<double>(8, 0.0), s);
        for (double v : x) CHECK(v == 0.0);
    }
}

TEST_CASE("the final step injects no noise") {
    const auto s = power_schedule();
    const GaussianOracle oracle(0.0, 1.0, s);
    const StepPlan plan{{1000}};
    const std::vector<double> prior{0.3, -0.2, 1.1};
    RngStream a(1), b(2);
    CHECK(sample(oracle, nullptr, s, plan, prior, a) == sample(oracle, nullptr, s, plan, prior, b));
}

TEST_CASE("analytic oracle sampling recovers the target Gaussian") {
    const auto s = power_schedule();
    const GaussianOracle oracle(3.0, 0.5, s);
    constexpr std::size_t kChains = 10000;
    SUBCASE("full chain") {
        RngStream rng(31);
        auto prior = rng.gaussian_vector(kChains);
        const auto x = sample(oracle, nullptr, s, subsample(s.T, s.T), prior, rng);
        CHECK(std::abs(mean_of(x) - 3.0) <= 0.05);
        CHECK(std::abs(std::sqrt(var_of(x)) / 0.5 - 1.0) <= 0.10);
    }
    SUBCASE("20-step plan") {
        RngStream rng(32);
        auto prior = rng.gaussian_vector(kChains);
        const auto x = sample(oracle, nullptr, s, subsample(s.T, 20), prior, rng);
        CHECK(std::abs(mean_of(x) - 3.0) <= 0.1);
    }
}

TEST_CASE("oracle eps") {
    const auto s = power_schedule();
    RngStream rng(4);
    const auto eps = rng.gaussian_vector(16);
    SUBCASE("a point mass returns the injected noise") {
        const auto x_t = forward_sample(std::vector<double>(16, 1.25), 600, eps, s);
        const auto e = oracle_eps(x_t, 600, 1.25, 1e-9, s);
        for (int i = 0; i < 16; ++i) CHECK(e[i] == doctest::Approx(eps[i]).epsilon(1e-9));
    }
    SUBCASE("standard normal data") {
        const auto e = oracle_eps(eps, 250, 0.0, 1.0, s);
        for (int i = 0; i < 16; ++i) CHECK(e[i] == doctest::Approx(std::sqrt(1.0 - s.alpha_bar(250)) * eps[i]));
    }
    SUBCASE("odd symmetry") {
        std::vector<double> neg(eps);
        for (auto& v : neg) v = -v;
        const auto a = oracle_eps(eps, 700, 0.4, 0.3, s), b = oracle_eps(neg, 700, -0.4, 0.3, s);
        for (int i = 0; i < 16; ++i) CHECK(a[i] == -b[i]);
    }
    CHECK_THROWS(oracle_eps(eps, 10, 0.0, 0.0, s));
}

TEST_CASE("sampling with a zero model is deterministic per seed") {
    const auto s = power_schedule();
    const ZeroDenoiser zero;
    RngStream a(8), b(8);
    const std::vector<double> prior(32, 0.5);
    CHECK(sample(zero, nullptr, s, subsample(s.T, 20), prior, a) == sample(zero, nullptr, s, subsample(s.T, 20), prior, b));
}
