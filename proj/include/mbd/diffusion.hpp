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

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mbd/audio.hpp"
#include "mbd/schedule.hpp"

namespace mbd {

struct ConditioningFrames;

// Noise predictor eps_theta(x_t, t, cond). Output has the input's length.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual std::vector<double> predict(std::span<const double> x_t, int t,
                                        const ConditioningFrames* cond) const = 0;
};

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
std::vector<double> forward_sample(std::span<const double> x0, int t, std::span<const double> eps,
                                   const NoiseSchedule& sched);

struct TrainingPair {
    std::vector<double> x_t;
    int t = 0;
    std::vector<double> eps;
};

// t ~ U{1..T}, eps ~ N(0, I). Draws t first, then eps.
TrainingPair training_pair(std::span<const double> x0, const NoiseSchedule& sched, RngStream& rng);

double mse(std::span<const double> a, std::span<const double> b);

// Reverse-step variance. beta_tilde is the pipeline's choice; beta exists
// for comparison in tests.
enum class ReverseVariance { beta_tilde, beta };

// x_{t-1} = (x_t - beta_t / sqrt(1 - abar_t) eps_hat) / sqrt(1 - beta_t) + sqrt(sigma_t) z
// An empty noise span means z = 0.
std::vector<double> reverse_step(std::span<const double> x_t, int t, std::span<const double> eps_hat,
                                 const NoiseSchedule& sched, std::span<const double> noise = {},
                                 ReverseVariance variance = ReverseVariance::beta_tilde);

// Same update between arbitrary retained steps t_from > t_to, with
// beta_hat = 1 - abar(t_from) / abar(t_to). Adjacent steps use the table
// values so the full plan reproduces reverse_step exactly.
std::vector<double> reverse_step_between(std::span<const double> x, int t_from, int t_to,
                                         std::span<const double> eps_hat, const NoiseSchedule& sched,
                                         std::span<const double> noise = {});

struct SampleTraceRow {
    int t;
    double x_norm;
    double eps_norm;
};

struct SampleOptions {
    // Steps above this index are replaced by the identity (skipped).
    // 0 disables skipping.
    int identity_above = 0;
    std::function<void(const SampleTraceRow&)> trace;
};

// Iterates the plan in descending order. No noise is injected on the
// final step into t = 0.
std::vector<double> sample(const Denoiser& denoiser, const ConditioningFrames* cond, const NoiseSchedule& sched,
                           const StepPlan& plan, std::vector<double> prior, RngStream& rng,
                           const SampleOptions& options = {});

// Posterior mean of eps for data distributed N(mu, s^2) per dimension:
// sqrt(1 - abar)(x_t - sqrt(abar) mu) / (abar s^2 + 1 - abar).
std::vector<double> oracle_eps(std::span<const double> x_t, int t, double mu, double s,
                               const NoiseSchedule& sched);

class GaussianOracle final : public Denoiser {
public:
    GaussianOracle(double mu, double s, const NoiseSchedule& sched);
    std::vector<double> predict(std::span<const double> x_t, int t,
                                const ConditioningFrames* cond) const override;

private:
    double mu_, s_;
    const NoiseSchedule& sched_;
};

// KL(N(sqrt(abar_T) x0, (1 - abar_T) I) || N(0, I)) for |x0|^2 = x0_norm_sq.
double prior_kl(const NoiseSchedule& sched, double x0_norm_sq, std::size_t dim);

}  // namespace mbd
