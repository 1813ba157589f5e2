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

#include <string>
#include <vector>

namespace mbd {

enum class ScheduleVariant { linear, cosine, power };

// Noise schedule tables indexed by step t = 1..T (stored at t - 1).
// t = 0 is the clean data point with alpha_bar(0) = 1.
struct NoiseSchedule {
    ScheduleVariant variant = ScheduleVariant::power;
    int T = 0;
    std::vector<double> betas;
    std::vector<double> alphas_bar;
    std::vector<double> beta_tilde;
    // Construction parameters, for manifests and CSV headers.
    double p = 1.0, beta0 = 0.0, betaT = 0.0, cosine_offset = 0.0;

    double beta(int t) const { return betas.at(t - 1); }
    double alpha_bar(int t) const { return t == 0 ? 1.0 : alphas_bar.at(t - 1); }
    double posterior_variance(int t) const { return beta_tilde.at(t - 1); }
};

// beta_t = (beta0^(1/p) + t/T * (betaT^(1/p) - beta0^(1/p)))^p, t = 1..T.
NoiseSchedule power_schedule(double p, double beta0, double betaT, int T);
NoiseSchedule linear_schedule(double beta0, double betaT, int T);
// Improved-DDPM cosine schedule; betas clipped to 0.999.
NoiseSchedule cosine_schedule(int T, double offset = 0.008);

// Defaults used throughout the pipeline.
struct PowerScheduleParams {
    double p = 7.5;
    double beta0 = 1.0e-5;
    double betaT = 2.9e-2;
    int T = 1000;
};
NoiseSchedule power_schedule(const PowerScheduleParams& params = {});

// Fraction of steps whose alpha_bar exceeds the threshold.
double fraction_alpha_bar_above(const NoiseSchedule& sched, double threshold);

// First t with alpha_bar(t) < threshold, or T + 1 if none.
int first_step_below(const NoiseSchedule& sched, double threshold);

struct StepPlan {
    std::vector<int> steps;  // strictly increasing subset of 1..T
    int N() const { return static_cast<int>(steps.size()); }
};

// S = {round(i * T / N) : i = 1..N}, deduplicated.
StepPlan subsample(int T, int N);

std::string to_string(ScheduleVariant v);
ScheduleVariant schedule_variant_from_string(const std::string& name);

// CSV rows "t,beta,alpha_bar,beta_tilde" with a header line.
std::string schedule_csv(const NoiseSchedule& sched);

}  // namespace mbd
