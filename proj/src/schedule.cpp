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

#include "mbd/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace mbd {

namespace {

// Products accumulated in long double, stored as double.
NoiseSchedule from_betas(ScheduleVariant variant, const std::vector<long double>& betas) {
    NoiseSchedule s;
    s.variant = variant;
    s.T = static_cast<int>(betas.size());
    long double alpha_bar = 1.0L;
    for (long double beta : betas) {
        const long double prev = alpha_bar;
        alpha_bar *= (1.0L - beta);
        s.betas.push_back(static_cast<double>(beta));
        s.alphas_bar.push_back(static_cast<double>(alpha_bar));
        s.beta_tilde.push_back(static_cast<double>((1.0L - prev) / (1.0L - alpha_bar) * beta));
    }
    return s;
}

void check_endpoints(double beta0, double betaT, int T) {
    if (T < 1) throw std::invalid_argument("schedule: T must be >= 1");
    if (!(beta0 > 0.0 && beta0 < betaT && betaT < 1.0)) {
        throw std::invalid_argument("schedule: need 0 < beta0 < betaT < 1");
    }
}

}  // namespace

NoiseSchedule power_schedule(double p, double beta0, double betaT, int T) {
    check_endpoints(beta0, betaT, T);
    if (!(p > 0.0)) throw std::invalid_argument("power_schedule: p must be positive");
    const long double lp = p;
    const long double lo = std::pow(static_cast<long double>(beta0), 1.0L / lp);
    const long double hi = std::pow(static_cast<long double>(betaT), 1.0L / lp);
    std::vector<long double> betas(T);
    for (int t = 1; t <= T; ++t) {
        const long double frac = static_cast<long double>(t) / T;
        betas[t - 1] = std::pow(lo + frac * (hi - lo), lp);
    }
    auto s = from_betas(ScheduleVariant::power, betas);
    s.p = p;
    s.beta0 = beta0;
    s.betaT = betaT;
    return s;
}

NoiseSchedule power_schedule(const PowerScheduleParams& params) {
    return power_schedule(params.p, params.beta0, params.betaT, params.T);
}

NoiseSchedule linear_schedule(double beta0, double betaT, int T) {
    check_endpoints(beta0, betaT, T);
    std::vector<long double> betas(T);
    for (int t = 1; t <= T; ++t) {
        betas[t - 1] = static_cast<long double>(beta0) +
                       static_cast<long double>(t) / T * (static_cast<long double>(betaT) - beta0);
    }
    auto s = from_betas(ScheduleVariant::linear, betas);
    s.beta0 = beta0;
    s.betaT = betaT;
    return s;
}

NoiseSchedule cosine_schedule(int T, double offset) {
    if (T < 1) throw std::invalid_argument("cosine_schedule: T must be >= 1");
    if (!(offset >= 0.0)) throw std::invalid_argument("cosine_schedule: offset must be >= 0");
    const long double s = offset;
    auto f = [&](int t) {
        const long double c = std::cos((static_cast<long double>(t) / T + s) / (1.0L + s) *
                                       std::numbers::pi_v<long double> / 2.0L);
        return c * c;
    };
    std::vector<long double> betas(T);
    for (int t = 1; t <= T; ++t) betas[t - 1] = std::min(1.0L - f(t) / f(t - 1), 0.999L);
    auto sched = from_betas(ScheduleVariant::cosine, betas);
    sched.cosine_offset = offset;
    return sched;
}

double fraction_alpha_bar_above(const NoiseSchedule& sched, double threshold) {
    const auto n = std::count_if(sched.alphas_bar.begin(), sched.alphas_bar.end(),
                                 [&](double a) { return a > threshold; });
    return static_cast<double>(n) / sched.T;
}

int first_step_below(const NoiseSchedule& sched, double threshold) {
    for (int t = 1; t <= sched.T; ++t) {
        if (sched.alpha_bar(t) < threshold) return t;
    }
    return sched.T + 1;
}

StepPlan subsample(int T, int N) {
    if (N < 1) throw std::invalid_argument("subsample: N must be >= 1");
    if (N > T) throw std::invalid_argument("subsample: N must not exceed T");
    StepPlan plan;
    for (long i = 1; i <= N; ++i) {
        // round(i * T / N), halves rounded up
        const int t = static_cast<int>((2 * i * T + N) / (2L * N));
        if (plan.steps.empty() || plan.steps.back() != t) plan.steps.push_back(t);
    }
    return plan;
}

std::string to_string(ScheduleVariant v) {
    switch (v) {
        case ScheduleVariant::linear: return "linear";
        case ScheduleVariant::cosine: return "cosine";
        case ScheduleVariant::power: return "power";
    }
    return "unknown";
}

ScheduleVariant schedule_variant_from_string(const std::string& name) {
    if (name == "linear") return ScheduleVariant::linear;
    if (name == "cosine") return ScheduleVariant::cosine;
    if (name == "power") return ScheduleVariant::power;
    throw std::invalid_argument("unknown schedule variant: " + name);
}

std::string schedule_csv(const NoiseSchedule& sched) {
    std::string out = "t,beta,alpha_bar,beta_tilde\n";
    char line[128];
    for (int t = 1; t <= sched.T; ++t) {
        std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g\n", t, sched.beta(t), sched.alpha_bar(t),
                      sched.posterior_variance(t));
        out += line;
    }
    return out;
}

}  // namespace mbd
