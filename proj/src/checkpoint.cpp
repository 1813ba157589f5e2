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

#include <cstring>
#include <fstream>

#include "mbd/denoiser.hpp"
#include "mbd/error.hpp"

namespace mbd {

namespace {

constexpr char kMagic[8] = {'M', 'B', 'D', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("checkpoint truncated: " + path.string());
    return v;
}

void put_vec(std::ofstream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_vec(std::ifstream& in, std::size_t n, const std::filesystem::path& path) {
    std::vector<double> v(n);
    if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)))) {
        throw DataError("checkpoint truncated: " + path.string());
    }
    return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto& p = ckpt.params;
    const auto& o = ckpt.optimizer;
    if (o.m.size() != p.size() || o.v.size() != p.size()) {
        throw std::invalid_argument("save_checkpoint: optimizer state does not match parameters");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    put(out, kVersion);
    const auto& c = p.config;
    for (int v : {c.depth, c.base_channels, c.growth, c.kernel, c.stride, c.t_embed_dim, c.T, c.cond_dim}) {
        put<std::int32_t>(out, v);
    }
    put<std::uint64_t>(out, p.size());
    put_vec(out, p.values);
    put<std::uint64_t>(out, o.step);
    for (double v : {o.lr, o.beta1, o.beta2, o.epsilon}) put(out, v);
    put_vec(out, o.m);
    put_vec(out, o.v);
    if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError("not a checkpoint file: " + path.string());
    }
    const auto version = get<std::uint32_t>(in, path);
    if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
    DenoiserConfig c;
    c.depth = get<std::int32_t>(in, path);
    c.base_channels = get<std::int32_t>(in, path);
    c.growth = get<std::int32_t>(in, path);
    c.kernel = get<std::int32_t>(in, path);
    c.stride = get<std::int32_t>(in, path);
    c.t_embed_dim = get<std::int32_t>(in, path);
    c.T = get<std::int32_t>(in, path);
    c.cond_dim = get<std::int32_t>(in, path);
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("checkpoint config invalid: ") + e.what());
    }

    Checkpoint ck;
    ck.params.config = c;
    ck.params.layout = ParamLayout::build(c);
    const auto n = get<std::uint64_t>(in, path);
    if (n != ck.params.layout.total) {
        throw DataError("checkpoint parameter count " + std::to_string(n) + " does not match config (" +
                        std::to_string(ck.params.layout.total) + ")");
    }
    ck.params.values = get_vec(in, n, path);
    ck.optimizer.step = get<std::uint64_t>(in, path);
    ck.optimizer.lr = get<double>(in, path);
    ck.optimizer.beta1 = get<double>(in, path);
    ck.optimizer.beta2 = get<double>(in, path);
    ck.optimizer.epsilon = get<double>(in, path);
    ck.optimizer.m = get_vec(in, n, path);
    ck.optimizer.v = get_vec(in, n, path);
    return ck;
}

}  // namespace mbd
