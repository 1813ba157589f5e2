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

#include "mbd/conditioner.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>

#include "mbd/hash.hpp"
#include "mbd/metrics.hpp"

namespace mbd {

int frame_count(std::size_t n_samples, int frame_len, int hop) {
    if (frame_len < 1 || hop < 1) throw std::invalid_argument("frame geometry must be positive");
    if (n_samples < static_cast<std::size_t>(frame_len)) return 0;
    return static_cast<int>((n_samples - frame_len) / hop) + 1;
}

FrameMatrix extract_frames(const AudioSignal& x, int frame_len, int hop, int dim) {
    const int n_frames = frame_count(x.size(), frame_len, hop);
    if (n_frames == 0) throw std::invalid_argument("extract_frames: signal shorter than one frame");
    PowerSpectrum fft(frame_len);
    const auto fb = mel_filter_matrix(x.sample_rate(), frame_len, dim, 0.0, 0.0);
    double window_energy = 0.0;
    for (double w : fft.window()) window_energy += w * w;

    FrameMatrix out(n_frames, dim);
    std::vector<double> power(fft.n_bins());
    for (int f = 0; f < n_frames; ++f) {
        fft.compute(x.samples().subspan(static_cast<std::size_t>(f) * hop, frame_len), power);
        for (int m = 0; m < dim; ++m) {
            const double* row = fb.data() + static_cast<std::size_t>(m) * fft.n_bins();
            double acc = 0.0;
            for (int k = 0; k < fft.n_bins(); ++k) acc += row[k] * power[k];
            out.row(f)[m] = std::log10(acc / window_energy + 1e-10);
        }
    }
    return out;
}

namespace {

double sq_dist(const double* a, const double* b, int dim) {
    double acc = 0.0;
    for (int i = 0; i < dim; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc;
}

// Nearest centroid, lowest index on ties.
int nearest(const FrameMatrix& centroids, const double* v, double* best_dist = nullptr) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < centroids.n_rows; ++k) {
        const double d = sq_dist(centroids.row(k), v, centroids.dim);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    if (best_dist) *best_dist = best_d;
    return best;
}

std::size_t count_distinct(const FrameMatrix& data) {
    std::set<std::vector<double>> seen;
    for (int r = 0; r < data.n_rows; ++r) seen.emplace(data.row(r), data.row(r) + data.dim);
    return seen.size();
}

}  // namespace

KMeansResult kmeans(const FrameMatrix& data, int K, int iters, RngStream& rng) {
    if (K < 1) throw std::invalid_argument("kmeans: K must be >= 1");
    if (count_distinct(data) < static_cast<std::size_t>(K)) {
        throw DataError("kmeans: fewer than K=" + std::to_string(K) + " distinct frames");
    }
    const int n = data.n_rows, dim = data.dim;

    // k-means++ seeding
    KMeansResult r;
    r.centroids = FrameMatrix(K, dim);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    int pick = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    for (int k = 0; k < K; ++k) {
        std::copy(data.row(pick), data.row(pick) + dim, r.centroids.row(k));
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], sq_dist(data.row(i), r.centroids.row(k), dim));
            total += d2[i];
        }
        if (k + 1 == K) break;
        double target = rng.uniform() * total;
        pick = -1;
        for (int i = 0; i < n; ++i) {
            if (d2[i] <= 0.0) continue;
            pick = i;
            target -= d2[i];
            if (target < 0.0) break;
        }
    }

    r.assignment.assign(n, 0);
    std::vector<double> dist(n);
    std::vector<int> counts(K);
    for (int it = 0; it < std::max(iters, 1); ++it) {
        double inertia = 0.0;
        for (int i = 0; i < n; ++i) {
            r.assignment[i] = nearest(r.centroids, data.row(i), &dist[i]);
            inertia += dist[i];
        }
        r.inertia_history.push_back(inertia);

        FrameMatrix sums(K, dim);
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < n; ++i) {
            const int k = r.assignment[i];
            ++counts[k];
            for (int j = 0; j < dim; ++j) sums.row(k)[j] += data.row(i)[j];
        }
        for (int k = 0; k < K; ++k) {
            if (counts[k] == 0) {
                const auto far = static_cast<int>(std::max_element(dist.begin(), dist.end()) - dist.begin());
                std::copy(data.row(far), data.row(far) + dim, r.centroids.row(k));
                dist[far] = 0.0;
                continue;
            }
            for (int j = 0; j < dim; ++j) r.centroids.row(k)[j] = sums.row(k)[j] / counts[k];
        }
    }
    for (int i = 0; i < n; ++i) r.assignment[i] = nearest(r.centroids, data.row(i));
    return r;
}

void Codebook::validate() const {
    if (K < 1 || dim < 1 || books.empty()) throw DataError("codebook: empty");
    for (const auto& b : books) {
        if (b.n_rows != K || b.dim != dim) throw DataError("codebook: book shape mismatch");
        for (double v : b.values) {
            if (!std::isfinite(v)) throw DataError("codebook: non-finite centroid");
        }
    }
    // Residual books may legitimately repeat entries only if degenerate; book 0 must not.
    for (int i = 0; i < K; ++i) {
        for (int j = i + 1; j < K; ++j) {
            if (sq_dist(books[0].row(i), books[0].row(j), dim) <= 0.0) {
                throw DataError("codebook: duplicate centroids in book 0");
            }
        }
    }
}

CodebookFit fit_codebook(const FrameMatrix& frames, const FrameGeometry& geometry, int K, int n_books, int iters,
                         RngStream& rng) {
    if (n_books < 1) throw std::invalid_argument("fit_codebook: n_books must be >= 1");
    CodebookFit fit;
    fit.codebook.K = K;
    fit.codebook.dim = frames.dim;
    fit.codebook.geometry = geometry;
    FrameMatrix residual = frames;
    for (int b = 0; b < n_books; ++b) {
        auto child = rng.child(static_cast<std::uint64_t>(b));
        auto km = kmeans(residual, K, iters, child);
        for (int i = 0; i < residual.n_rows; ++i) {
            const double* c = km.centroids.row(km.assignment[i]);
            for (int j = 0; j < residual.dim; ++j) residual.row(i)[j] -= c[j];
        }
        fit.inertia_history.push_back(std::move(km.inertia_history));
        fit.codebook.books.push_back(std::move(km.centroids));
    }
    fit.codebook.validate();
    return fit;
}

TokenSequence encode_frames(const FrameMatrix& frames, const Codebook& book) {
    if (frames.dim != book.dim) throw std::invalid_argument("encode: feature dim does not match codebook");
    TokenSequence seq;
    seq.K = book.K;
    seq.n_books = book.n_books();
    seq.n_frames = frames.n_rows;
    seq.geometry = book.geometry;
    seq.codebook_hash = codebook_hash(book);
    seq.tokens.resize(static_cast<std::size_t>(seq.n_books) * seq.n_frames);
    std::vector<double> residual(frames.dim);
    for (int f = 0; f < frames.n_rows; ++f) {
        std::copy(frames.row(f), frames.row(f) + frames.dim, residual.begin());
        for (int b = 0; b < seq.n_books; ++b) {
            const int k = nearest(book.books[b], residual.data());
            seq.tokens[static_cast<std::size_t>(b) * seq.n_frames + f] = k;
            for (int j = 0; j < frames.dim; ++j) residual[j] -= book.books[b].row(k)[j];
        }
    }
    return seq;
}

TokenSequence encode(const AudioSignal& x, const Codebook& book) {
    if (x.sample_rate() != book.geometry.sample_rate) {
        throw DataError("encode: signal rate " + std::to_string(x.sample_rate()) + " does not match codebook rate " +
                        std::to_string(book.geometry.sample_rate));
    }
    return encode_frames(extract_frames(x, book.geometry.frame_len, book.geometry.hop, book.dim), book);
}

namespace {
void check_tokens(const TokenSequence& tokens, const Codebook& book) {
    if (tokens.n_books != book.n_books() || tokens.K != book.K) {
        throw DataError("tokens: codebook shape mismatch");
    }
    if (!(tokens.geometry == book.geometry)) throw DataError("tokens: frame geometry mismatch");
    for (auto v : tokens.tokens) {
        if (v < 0 || v >= book.K) throw DataError("tokens: index " + std::to_string(v) + " out of range");
    }
}
}  // namespace

FrameMatrix dequantize(const TokenSequence& tokens, const Codebook& book) {
    check_tokens(tokens, book);
    FrameMatrix out(tokens.n_frames, book.dim);
    for (int f = 0; f < tokens.n_frames; ++f) {
        for (int b = 0; b < tokens.n_books; ++b) {
            const double* c = book.books[b].row(tokens.at(b, f));
            for (int j = 0; j < book.dim; ++j) out.row(f)[j] += c[j];
        }
    }
    return out;
}

ConditioningFrames embed(const TokenSequence& tokens, const Codebook& book) {
    check_tokens(tokens, book);
    ConditioningFrames out(tokens.n_frames, book.dim);
    const double w = 1.0 / tokens.n_books;
    for (int f = 0; f < tokens.n_frames; ++f) {
        for (int b = 0; b < tokens.n_books; ++b) {
            const double* c = book.books[b].row(tokens.at(b, f));
            for (int j = 0; j < book.dim; ++j) out.row(f)[j] += w * c[j];
        }
    }
    return out;
}

EmbeddingScaler EmbeddingScaler::from_codebook(const Codebook& book) {
    book.validate();
    EmbeddingScaler s;
    s.mean.assign(book.dim, 0.0);
    std::vector<double> var(book.dim, 0.0);
    const double w = 1.0 / book.n_books();
    for (const auto& c : book.books) {
        for (int j = 0; j < book.dim; ++j) {
            double m = 0.0, m2 = 0.0;
            for (int k = 0; k < book.K; ++k) {
                m += c.row(k)[j];
                m2 += c.row(k)[j] * c.row(k)[j];
            }
            m /= book.K;
            m2 /= book.K;
            s.mean[j] += w * m;
            var[j] += w * w * std::max(0.0, m2 - m * m);
        }
    }
    s.inv_std.resize(book.dim);
    for (int j = 0; j < book.dim; ++j) s.inv_std[j] = 1.0 / std::sqrt(std::max(var[j], 1e-12));
    return s;
}

void EmbeddingScaler::apply(ConditioningFrames& frames) const {
    if (static_cast<std::size_t>(frames.dim) != mean.size()) {
        throw std::invalid_argument("EmbeddingScaler: dimension mismatch");
    }
    for (int f = 0; f < frames.n_rows; ++f) {
        double* r = frames.row(f);
        for (int j = 0; j < frames.dim; ++j) r[j] = (r[j] - mean[j]) * inv_std[j];
    }
}

ConditioningFrames upsample_linear(const ConditioningFrames& frames, int target_len) {
    if (target_len < 1) throw std::invalid_argument("upsample_linear: target_len must be >= 1");
    if (frames.n_rows < 1) throw std::invalid_argument("upsample_linear: no frames");
    ConditioningFrames out(target_len, frames.dim);
    const int n = frames.n_rows;
    for (int i = 0; i < target_len; ++i) {
        const double pos = target_len == 1 ? 0.0 : static_cast<double>(i) * (n - 1) / (target_len - 1);
        const int lo = std::min(static_cast<int>(pos), n - 1);
        const int hi = std::min(lo + 1, n - 1);
        const double frac = pos - lo;
        for (int j = 0; j < frames.dim; ++j) {
            out.row(i)[j] = (1.0 - frac) * frames.row(lo)[j] + frac * frames.row(hi)[j];
        }
    }
    return out;
}

double token_bitrate(const TokenSequence& tokens, double duration_s) {
    return tokens.n_books * static_cast<double>(tokens.n_frames) * std::log2(static_cast<double>(tokens.K)) /
           duration_s;
}

nlohmann::json to_json(const Codebook& book) {
    nlohmann::json books = nlohmann::json::array();
    for (const auto& b : book.books) books.push_back(b.values);
    return {{"K", book.K},
            {"dim", book.dim},
            {"sample_rate", book.geometry.sample_rate},
            {"frame_len", book.geometry.frame_len},
            {"hop", book.geometry.hop},
            {"books", books}};
}

Codebook codebook_from_json(const nlohmann::json& j) {
    Codebook book;
    book.K = j.at("K").get<int>();
    book.dim = j.at("dim").get<int>();
    book.geometry = {j.at("frame_len").get<int>(), j.at("hop").get<int>(), j.at("sample_rate").get<int>()};
    for (const auto& b : j.at("books")) {
        FrameMatrix m(book.K, book.dim);
        m.values = b.get<std::vector<double>>();
        if (m.values.size() != static_cast<std::size_t>(book.K) * book.dim) throw DataError("codebook: bad book size");
        book.books.push_back(std::move(m));
    }
    book.validate();
    return book;
}

std::string codebook_hash(const Codebook& book) {
    return hash_hex(to_json(book).dump());
}

namespace {
constexpr char kTokenMagic[8] = {'M', 'B', 'D', 'T', 'O', 'K', '0', '1'};

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw DataError("token file truncated");
    return v;
}
}  // namespace

// Layout (little-endian): magic[8], u32 K, u32 n_books, u32 n_frames,
// u32 frame_len, u32 hop, u32 sample_rate, char[16] codebook hash,
// then n_books * n_frames i32 tokens, row-major by book.
void save_tokens(const TokenSequence& tokens, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(kTokenMagic, sizeof(kTokenMagic));
    for (int v : {tokens.K, tokens.n_books, tokens.n_frames, tokens.geometry.frame_len, tokens.geometry.hop,
                  tokens.geometry.sample_rate}) {
        write_pod(out, static_cast<std::uint32_t>(v));
    }
    std::string h = tokens.codebook_hash;
    h.resize(16, '0');
    out.write(h.data(), 16);
    for (auto t : tokens.tokens) write_pod(out, t);
    if (!out) throw DataError("write failed: " + path.string());
}

TokenSequence load_tokens(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kTokenMagic, sizeof(magic)) != 0) throw DataError(path.string() + ": not a token file");
    TokenSequence t;
    t.K = static_cast<int>(read_pod<std::uint32_t>(in));
    t.n_books = static_cast<int>(read_pod<std::uint32_t>(in));
    t.n_frames = static_cast<int>(read_pod<std::uint32_t>(in));
    t.geometry.frame_len = static_cast<int>(read_pod<std::uint32_t>(in));
    t.geometry.hop = static_cast<int>(read_pod<std::uint32_t>(in));
    t.geometry.sample_rate = static_cast<int>(read_pod<std::uint32_t>(in));
    t.codebook_hash.resize(16);
    in.read(t.codebook_hash.data(), 16);
    if (!in) throw DataError("token file truncated");
    t.tokens.resize(static_cast<std::size_t>(t.n_books) * t.n_frames);
    for (auto& v : t.tokens) v = read_pod<std::int32_t>(in);
    return t;
}

ImportedTokens import_external_tokens(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    ImportedTokens out;
    Codebook& book = out.codebook;
    book.geometry = {j.at("frame_len").get<int>(), j.at("hop").get<int>(), j.at("sample_rate").get<int>()};
    const auto centroids = j.at("centroids").get<std::vector<std::vector<std::vector<double>>>>();
    if (centroids.empty() || centroids[0].empty()) throw DataError("import: empty centroid table");
    book.K = static_cast<int>(centroids[0].size());
    book.dim = static_cast<int>(centroids[0][0].size());
    for (const auto& b : centroids) {
        if (static_cast<int>(b.size()) != book.K) throw DataError("import: ragged centroid table");
        FrameMatrix m(book.K, book.dim);
        for (int k = 0; k < book.K; ++k) {
            if (static_cast<int>(b[k].size()) != book.dim) throw DataError("import: ragged centroid table");
            std::copy(b[k].begin(), b[k].end(), m.row(k));
        }
        book.books.push_back(std::move(m));
    }
    book.validate();

    const auto rows = j.at("tokens").get<std::vector<std::vector<std::int32_t>>>();
    if (static_cast<int>(rows.size()) != book.n_books()) throw DataError("import: token rows must match book count");
    TokenSequence& t = out.tokens;
    t.K = book.K;
    t.n_books = book.n_books();
    t.n_frames = static_cast<int>(rows[0].size());
    t.geometry = book.geometry;
    t.codebook_hash = codebook_hash(book);
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != t.n_frames) throw DataError("import: ragged token matrix");
        t.tokens.insert(t.tokens.end(), r.begin(), r.end());
    }
    check_tokens(t, book);
    return out;
}

}  // namespace mbd
