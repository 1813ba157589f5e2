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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mbd/audio.hpp"
#include "mbd/conditioner.hpp"
#include "mbd/diffusion.hpp"

namespace mbd {

// Symmetric 1-D U-Net: stem conv, then per stage a residual block and a
// stride-4 down conv; a conditioned residual block at the bottleneck;
// mirrored transposed convs with additive skips on the way up. The
// timestep embedding row is projected and added after every conv block.
struct DenoiserConfig {
    int depth = 2;
    int base_channels = 8;
    int growth = 4;
    int kernel = 5;
    int stride = 4;
    int t_embed_dim = 16;
    int T = 1000;
    int cond_dim = 16;

    void validate() const;
    int channels(int stage) const;
    int length_multiple() const;

    bool operator==(const DenoiserConfig&) const = default;
};

nlohmann::json to_json(const DenoiserConfig& cfg);
DenoiserConfig denoiser_config_from_json(const nlohmann::json& j);

struct ConvSlot {
    std::size_t weight = 0;
    std::size_t bias = 0;
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 0;
};

struct ResidualSlot {
    ConvSlot first, second;
    std::size_t embed = 0;  // out_channels x t_embed_dim projection
};

// Offsets of every tensor inside the flat parameter vector.
struct ParamLayout {
    ConvSlot stem;
    std::size_t stem_embed = 0;
    std::vector<ResidualSlot> encoder;
    std::vector<ConvSlot> down;
    std::vector<std::size_t> down_embed;
    ResidualSlot middle;
    std::size_t cond_proj = 0;  // channels(depth) x cond_dim, no bias
    std::vector<ConvSlot> up;   // weights stored in x out x kernel
    std::vector<std::size_t> up_embed;
    std::vector<ResidualSlot> decoder;
    ConvSlot out;
    std::size_t embed_table = 0;  // T x t_embed_dim
    std::size_t total = 0;

    static ParamLayout build(const DenoiserConfig& cfg);
};

struct DenoiserParams {
    DenoiserConfig config;
    ParamLayout layout;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

// Fan-in scaled uniform weights, zero biases; embedding rows start as
// sinusoids of t with a little Gaussian jitter.
DenoiserParams init_params(const DenoiserConfig& cfg, RngStream& rng);

// Conditioning already resampled to the bottleneck: one row per
// bottleneck position, cond_dim columns.
using BottleneckCond = ConditioningFrames;

// Runs the network. x is zero-padded symmetrically to a multiple of
// stride^depth and the output is cropped back. cond (if any) is linearly
// upsampled to the bottleneck length.
std::vector<double> forward(const DenoiserParams& params, std::span<const double> x_t, int t,
                            const ConditioningFrames* cond);

// Same, with conditioning supplied at bottleneck resolution. x length must
// already be a multiple of stride^depth.
std::vector<double> forward_bottleneck(const DenoiserParams& params, std::span<const double> x_t, int t,
                                       const BottleneckCond* cond);

struct TrainingExample {
    std::vector<double> x_t;
    int t = 0;
    std::vector<double> eps;
    const BottleneckCond* cond = nullptr;  // may be null
};

struct LossAndGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

// loss = mean over examples of mean((eps - eps_hat)^2); gradients by
// reverse-mode accumulation. Lengths must be multiples of stride^depth.
LossAndGrad loss_and_grad(const DenoiserParams& params, std::span<const TrainingExample> batch);
double loss_only(const DenoiserParams& params, std::span<const TrainingExample> batch);

struct AdamState {
    std::vector<double> m, v;
    std::uint64_t step = 0;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_params(std::size_t n, double lr = 1e-4);
};

// Bias-corrected adaptive-moment update.
void adam_update(std::vector<double>& params, AdamState& opt, std::span<const double> grad);

// Denoiser adaptor over trained parameters.
class ConvDenoiser final : public Denoiser {
public:
    explicit ConvDenoiser(const DenoiserParams& params) : params_(params) {}
    std::vector<double> predict(std::span<const double> x_t, int t, const ConditioningFrames* cond) const override {
        return forward(params_, x_t, t, cond);
    }

private:
    const DenoiserParams& params_;
};

// Checkpoint: "MBDCKPT1", u32 version, config as 8 x i32, u64 n_params,
// f64 params, u64 adam step, f64 lr/beta1/beta2/epsilon, f64 m, f64 v.
struct Checkpoint {
    DenoiserParams params;
    AdamState optimizer;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mbd
