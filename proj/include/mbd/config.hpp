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
#include <string>

#include <json.hpp>

#include "mbd/denoiser.hpp"
#include "mbd/schedule.hpp"

namespace mbd {

// Whole-pipeline configuration. Text form is one `key = value` per line,
// `#` starts a comment; every key is typed and unknown keys are rejected.
// Defaults follow the paper where it gives a value; sample rate, model
// width and iteration counts are desk-scale.
struct PipelineConfig {
    int sample_rate = 8000;

    struct Eq {
        bool enabled = true;
        int n_bands = 8;
        double rho = 0.4;
        int kernel_len = 255;
        int noise_samples = 200000;
    } eq;

    struct Bands {
        int n_bands = 4;
        int kernel_len = 255;
    } bands;

    struct Schedule {
        ScheduleVariant variant = ScheduleVariant::power;
        double p = 7.5;
        double beta0 = 1.0e-5;
        double betaT = 2.9e-2;
        int T = 1000;
        double cosine_offset = 0.008;
    } schedule;

    struct Sampling {
        int steps = 20;
        int identity_above = 0;
    } sampling;

    struct Model {
        int depth = 2;
        int base_channels = 8;
        int growth = 4;
        int kernel = 5;
        int t_embed_dim = 16;
    } model;

    struct Conditioner {
        int K = 64;
        int n_books = 2;
        int frame_len = 256;
        int hop = 128;
        int dim = 16;
        int iters = 25;
    } conditioner;

    struct Training {
        int batch = 8;
        int iters = 2000;
        double lr = 1.0e-4;
        int crop = 512;
        int loss_window = 50;
        int log_every = 200;
    } training;

    struct Corpus {
        std::string dir;  // empty: synthesize
        int synth_items = 50;
        double synth_duration_s = 1.0;
        // Each item is a sum of notes; a note is a harmonic series on a
        // random fundamental with a random spectral tilt.
        int synth_notes = 2;
        int synth_partials = 100;  // harmonics per note, those above fmax dropped
        double synth_fmin_hz = 40.0;  // lowest fundamental
        double synth_f0_max_hz = 160.0;
        double synth_fmax_hz = 3800.0;
    } corpus;

    std::uint64_t seed = 0;
    std::string artifacts = "artifacts";

    // Throws UsageError describing the first invalid field.
    void validate() const;
    NoiseSchedule make_schedule() const;
    DenoiserConfig denoiser_config() const;
};

PipelineConfig parse_config(const std::string& text, const std::string& origin = "<config>");
PipelineConfig load_config(const std::filesystem::path& path);
// Applies one `key = value` assignment; used by the parser and CLI overrides.
void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value);
// Canonical text form, every key in a fixed order; parse_config round-trips it.
std::string to_text(const PipelineConfig& cfg);

}  // namespace mbd
