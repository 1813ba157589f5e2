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

#include "mbd/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace mbd {

namespace {

void check_step(int t, const NoiseSchedule& sched) {
    if (t < 1 || t > sched.T) {
        throw std::out_of_range("diffusion step " + std::to_string(t) + " outside 1.." + std::to_string(sched.T));
    }
}

double norm(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

std::vector<double> step_with(std::span<const double> x, std::span<const double> eps_hat, double beta,
                              double one_minus_abar, double variance, std::span<const double> noise) {
    if (eps_hat.size() != x.size()) throw std::invalid_argument("reverse step: eps_hat length mismatch");
    if (!noise.empty() && noise.size() != x.size()) throw std::invalid_argument("reverse step: noise length mismatch");
    const double inv_sqrt_alpha = 1.0 / std::sqrt(1.0 - beta);
    const double eps_coef = beta / std::sqrt(one_minus_abar);
    const double noise_coef = std::sqrt(variance);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = inv_sqrt_alpha * (x[i] - eps_coef * eps_hat[i]);
        if (!noise.empty()) out[i] += noise_coef * noise[i];
    }
    return out;
}

}  // namespace

std::vector<double> forward_sample(std::span<const double> x0, int t, std::span<const double> eps,
                                   const NoiseSchedule& sched) {
    if (eps.size() != x0.size()) throw std::invalid_argument("forward_sample: eps length mismatch");
    check_step(t, sched);
    const double a = std::sqrt(sched.alpha_bar(t));
    const double b = std::sqrt(1.0 - sched.alpha_bar(t));
    std::vector<double> out(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * eps[i];
    return out;
}

TrainingPair training_pair(std::span<const double> x0, const NoiseSchedule& sched, RngStream& rng) {
    TrainingPair pair;
    pair.t = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(sched.T)));
    pair.eps = rng.gaussian_vector(x0.size());
    pair.x_t = forward_sample(x0, pair.t, pair.eps, sched);
    return pair;
}

double mse(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("mse: length mismatch");
    if (a.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc / static_cast<double>(a.size());
}

std::vector<double> reverse_step(std::span<const double> x_t, int t, std::span<const double> eps_hat,
                                 const NoiseSchedule& sched, std::span<const double> noise,
                                 ReverseVariance variance) {
    check_step(t, sched);
    const double beta = sched.beta(t);
    const double var = variance == ReverseVariance::beta_tilde ? sched.posterior_variance(t) : beta;
    return step_with(x_t, eps_hat, beta, 1.0 - sched.alpha_bar(t), var, noise);
}

std::vector<double> reverse_step_between(std::span<const double> x, int t_from, int t_to,
                                         std::span<const double> eps_hat, const NoiseSchedule& sched,
                                         std::span<const double> noise) {
    check_step(t_from, sched);
    if (t_to < 0 || t_to >= t_from) throw std::invalid_argument("reverse_step_between: need 0 <= t_to < t_from");
    if (t_to == t_from - 1) return reverse_step(x, t_from, eps_hat, sched, noise);
    const double abar_from = sched.alpha_bar(t_from);
    const double abar_to = sched.alpha_bar(t_to);
    const double beta = 1.0 - abar_from / abar_to;
    const double var = (1.0 - abar_to) / (1.0 - abar_from) * beta;
    return step_with(x, eps_hat, beta, 1.0 - abar_from, var, noise);
}

std::vector<double> sample(const Denoiser& denoiser, const ConditioningFrames* cond, const NoiseSchedule& sched,
                           const StepPlan& plan, std::vector<double> prior, RngStream& rng,
                           const SampleOptions& options) {
    if (plan.steps.empty()) throw std::invalid_argument("sample: empty step plan");
    std::vector<double> x = std::move(prior);
    for (int k = plan.N() - 1; k >= 0; --k) {
        const int t = plan.steps[k];
        const int t_prev = k > 0 ? plan.steps[k - 1] : 0;
        if (options.identity_above > 0 && t > options.identity_above) continue;
        const auto eps_hat = denoiser.predict(x, t, cond);
        if (options.trace) options.trace({t, norm(x), norm(eps_hat)});
        if (t_prev == 0) {
            x = reverse_step_between(x, t, 0, eps_hat, sched);
        } else {
            const auto z = rng.gaussian_vector(x.size());
            x = reverse_step_between(x, t, t_prev, eps_hat, sched, z);
        }
    }
    return x;
}

std::vector<double> oracle_eps(std::span<const double> x_t, int t, double mu, double s,
                               const NoiseSchedule& sched) {
    if (!(s > 0.0)) throw std::invalid_argument("oracle_eps: s must be positive");
    check_step(t, sched);
    const double abar = sched.alpha_bar(t);
    const double sa = std::sqrt(abar);
    const double scale = std::sqrt(1.0 - abar) / (abar * s * s + 1.0 - abar);
    std::vector<double> out(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) out[i] = scale * (x_t[i] - sa * mu);
    return out;
}

GaussianOracle::GaussianOracle(double mu, double s, const NoiseSchedule& sched) : mu_(mu), s_(s), sched_(sched) {
    if (!(s > 0.0)) throw std::invalid_argument("GaussianOracle: s must be positive");
}

std::vector<double> GaussianOracle::predict(std::span<const double> x_t, int t, const ConditioningFrames*) const {
    return oracle_eps(x_t, t, mu_, s_, sched_);
}

double prior_kl(const NoiseSchedule& sched, double x0_norm_sq, std::size_t dim) {
    const double abar = sched.alpha_bar(sched.T);
    const double var = 1.0 - abar;
    return 0.5 * (static_cast<double>(dim) * (var - 1.0 - std::log(var)) + abar * x0_norm_sq);
}

}  // namespace mbd
