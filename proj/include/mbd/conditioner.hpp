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
#include <vector>

#include <json.hpp>

#include "mbd/audio.hpp"

namespace mbd {

// Row-major n_rows x dim real matrix; rows are time frames.
struct FrameMatrix {
    int n_rows = 0;
    int dim = 0;
    std::vector<double> values;

    FrameMatrix() = default;
    FrameMatrix(int rows, int cols) : n_rows(rows), dim(cols), values(static_cast<std::size_t>(rows) * cols, 0.0) {}
    double* row(int r) { return values.data() + static_cast<std::size_t>(r) * dim; }
    const double* row(int r) const { return values.data() + static_cast<std::size_t>(r) * dim; }
};

// Averaged codebook embeddings per frame, ready for upsampling.
struct ConditioningFrames : FrameMatrix {
    using FrameMatrix::FrameMatrix;
    int n_frames() const { return n_rows; }
};

struct FrameGeometry {
    int frame_len = 256;
    int hop = 128;
    int sample_rate = 0;

    bool operator==(const FrameGeometry&) const = default;
};

int frame_count(std::size_t n_samples, int frame_len, int hop);

// Per-frame log10 mel power in `dim` bands, normalized by window energy
// and floored at 1e-10. Partial tail frames are dropped.
FrameMatrix extract_frames(const AudioSignal& x, int frame_len, int hop, int dim);

struct KMeansResult {
    FrameMatrix centroids;
    std::vector<int> assignment;
    // Inertia after each assignment pass.
    std::vector<double> inertia_history;
};

// Lloyd iterations from a k-means++ start. Ties go to the lowest index;
// empty clusters are reseeded at the point farthest from its centroid.
KMeansResult kmeans(const FrameMatrix& data, int K, int iters, RngStream& rng);

struct Codebook {
    int K = 0;
    int dim = 0;
    FrameGeometry geometry;
    std::vector<FrameMatrix> books;  // n_books entries of K x dim

    int n_books() const { return static_cast<int>(books.size()); }
    void validate() const;
};

struct CodebookFit {
    Codebook codebook;
    std::vector<std::vector<double>> inertia_history;  // per book
};

// Book 0 fits the frames, book j fits the residual left by books < j.
CodebookFit fit_codebook(const FrameMatrix& frames, const FrameGeometry& geometry, int K, int n_books, int iters,
                         RngStream& rng);

struct TokenSequence {
    int K = 0;
    int n_books = 0;
    int n_frames = 0;
    FrameGeometry geometry;
    std::vector<std::int32_t> tokens;  // n_books x n_frames, row-major
    std::string codebook_hash;

    std::int32_t at(int book, int frame) const { return tokens[static_cast<std::size_t>(book) * n_frames + frame]; }
};

TokenSequence encode_frames(const FrameMatrix& frames, const Codebook& book);
TokenSequence encode(const AudioSignal& x, const Codebook& book);

// Sum of the selected centroids across books (the residual reconstruction).
FrameMatrix dequantize(const TokenSequence& tokens, const Codebook& book);

// frame j = mean over books of centroid_b[tokens[b][j]].
ConditioningFrames embed(const TokenSequence& tokens, const Codebook& book);

// Per-dimension standardization of averaged embeddings. Moments are those of
// embed() under independent uniform token choice per book, so they follow
// from the codebook alone and need no extra artifact.
struct EmbeddingScaler {
    std::vector<double> mean;
    std::vector<double> inv_std;

    static EmbeddingScaler from_codebook(const Codebook& book);
    void apply(ConditioningFrames& frames) const;
};

// Endpoint-preserving linear interpolation along time.
ConditioningFrames upsample_linear(const ConditioningFrames& frames, int target_len);

double token_bitrate(const TokenSequence& tokens, double duration_s);

nlohmann::json to_json(const Codebook& book);
Codebook codebook_from_json(const nlohmann::json& j);
std::string codebook_hash(const Codebook& book);

void save_tokens(const TokenSequence& tokens, const std::filesystem::path& path);
TokenSequence load_tokens(const std::filesystem::path& path);

// Externally produced tokens plus their centroid table, as JSON:
// {"sample_rate", "frame_len", "hop", "centroids": [book][K][dim],
//  "tokens": [book][frame]}.
struct ImportedTokens {
    Codebook codebook;
    TokenSequence tokens;
};
ImportedTokens import_external_tokens(const std::filesystem::path& path);

}  // namespace mbd
