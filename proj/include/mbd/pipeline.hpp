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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mbd/audio.hpp"
#include "mbd/conditioner.hpp"
#include "mbd/config.hpp"
#include "mbd/metrics.hpp"

namespace mbd {

constexpr const char* kToolVersion = "mbd 0.1.0";

// File layout under the artifacts root.
struct ArtifactPaths {
    std::filesystem::path root;

    std::filesystem::path dataset_dir() const { return root / "dataset"; }
    std::filesystem::path dataset_index() const { return root / "dataset" / "index.json"; }
    std::filesystem::path eq_profile() const { return root / "eq_profile.json"; }
    std::filesystem::path codebook() const { return root / "codebook.json"; }
    std::filesystem::path manifest() const { return root / "manifest.json"; }
    std::filesystem::path checkpoint(int band) const;
    std::filesystem::path sidecar(int band) const;
    std::filesystem::path loss_log(int band) const;
};

// Artifacts root from the config, overridden by $MBD_ARTIFACTS when set.
ArtifactPaths artifact_paths(const PipelineConfig& cfg);

struct DatasetItem {
    std::string name;
    std::filesystem::path path;
    std::size_t n_samples = 0;
    std::string hash;
};

std::vector<DatasetItem> load_dataset_index(const ArtifactPaths& paths);
std::vector<AudioSignal> load_dataset(const ArtifactPaths& paths);

// Scales x to unit RMS; returns the scaled signal and the original RMS
// (silent input is returned unchanged with RMS 1).
std::pair<AudioSignal, double> normalize_rms(const AudioSignal& x);

// The deterministic sine-mixture corpus described by cfg.corpus.
std::vector<AudioSignal> synth_corpus(const PipelineConfig& cfg);

struct PrepareResult {
    std::size_t n_items = 0;
    std::vector<double> sigma_data;
    std::vector<double> codebook_inertia;  // final inertia per book
};

// Builds the dataset (synthesized, or copied from cfg.corpus.dir), fits the
// EQ profile and the codebook, and starts a fresh manifest.
PrepareResult cmd_prepare(const PipelineConfig& cfg);

struct BandTrainResult {
    int band = 0;
    std::vector<double> losses;
    double smoothed_start = 0.0;
    double smoothed_end = 0.0;
    std::size_t n_params = 0;
};

struct TrainOptions {
    std::optional<int> band;  // train one band only
    bool resume = false;      // continue from an existing checkpoint
    std::optional<int> iters; // overrides cfg.training.iters
};

std::vector<BandTrainResult> cmd_train(const PipelineConfig& cfg, const TrainOptions& options = {});

// Mean of the first and last `window` entries.
std::pair<double, double> smoothed_endpoints(const std::vector<double>& losses, int window);

struct DecodeOptions {
    std::optional<int> steps;   // overrides cfg.sampling.steps
    bool zero_conditioning = false;
    std::optional<std::uint64_t> seed;  // overrides cfg.seed
};

// Checks every component hash against the manifest; IntegrityError on mismatch.
void verify_manifest(const PipelineConfig& cfg);

// Full reverse path: per-band sampling from the band models, merge, inverse EQ.
AudioSignal decode_tokens(const PipelineConfig& cfg, const TokenSequence& tokens, std::size_t n_samples,
                          const DecodeOptions& options = {});
// Encodes a WAV with the prepared codebook and decodes it back. The input is
// normalized to unit RMS first and the output restored to the input RMS.
AudioSignal decode_wav(const PipelineConfig& cfg, const std::filesystem::path& wav, const DecodeOptions& options = {});
// Decodes a token file; output length follows the frame geometry.
AudioSignal decode_token_file(const PipelineConfig& cfg, const std::filesystem::path& tokens,
                              const DecodeOptions& options = {});

struct EvalRow {
    std::string file;
    MelSnrReport report;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    MelSnrReport mean;
    std::vector<std::string> unpaired;
};

// Pairs WAV files by name; unpaired names are warned about and skipped.
// DataError when nothing pairs up.
EvalReport cmd_eval(const std::filesystem::path& ref_dir, const std::filesystem::path& rec_dir,
                    const MelConfig& mel = {});
std::string eval_csv(const EvalReport& report);
std::string eval_table(const EvalReport& report);

// CSV of t, beta, alpha_bar, beta_tilde followed by a '#' summary line.
std::string cmd_inspect_schedule(const PipelineConfig& cfg);

}  // namespace mbd
