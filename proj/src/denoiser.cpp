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

#include "mbd/denoiser.hpp"

#include <cmath>
#include <algorithm>
#include <string>

#include "mbd/error.hpp"
#include <stdexcept>

namespace mbd {

void DenoiserConfig::validate() const {
    if (depth < 1) throw std::invalid_argument("denoiser: depth must be >= 1");
    if (base_channels < 1 || growth < 1) throw std::invalid_argument("denoiser: channels must be positive");
    if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("denoiser: kernel must be odd");
    if (stride != 4) throw std::invalid_argument("denoiser: stride is fixed at 4");
    if (t_embed_dim < 1 || T < 1 || cond_dim < 1) throw std::invalid_argument("denoiser: dims must be positive");
}

int DenoiserConfig::channels(int stage) const {
    int c = base_channels;
    for (int s = 0; s < stage; ++s) c *= growth;
    return c;
}

int DenoiserConfig::length_multiple() const {
    int m = 1;
    for (int s = 0; s < depth; ++s) m *= stride;
    return m;
}

nlohmann::json to_json(const DenoiserConfig& cfg) {
    return {{"depth", cfg.depth},         {"base_channels", cfg.base_channels}, {"growth", cfg.growth},
            {"kernel", cfg.kernel},       {"stride", cfg.stride},               {"t_embed_dim", cfg.t_embed_dim},
            {"T", cfg.T},                 {"cond_dim", cfg.cond_dim}};
}

DenoiserConfig denoiser_config_from_json(const nlohmann::json& j) {
    DenoiserConfig c;
    c.depth = j.at("depth").get<int>();
    c.base_channels = j.at("base_channels").get<int>();
    c.growth = j.at("growth").get<int>();
    c.kernel = j.at("kernel").get<int>();
    c.stride = j.at("stride").get<int>();
    c.t_embed_dim = j.at("t_embed_dim").get<int>();
    c.T = j.at("T").get<int>();
    c.cond_dim = j.at("cond_dim").get<int>();
    c.validate();
    return c;
}

ParamLayout ParamLayout::build(const DenoiserConfig& cfg) {
    cfg.validate();
    ParamLayout L;
    std::size_t off = 0;
    auto take = [&off](std::size_t n) {
        const std::size_t at = off;
        off += n;
        return at;
    };
    auto conv = [&](int cin, int cout, int k) {
        ConvSlot s;
        s.in_channels = cin;
        s.out_channels = cout;
        s.kernel = k;
        s.weight = take(static_cast<std::size_t>(cin) * cout * k);
        s.bias = take(cout);
        return s;
    };
    auto embed = [&](int channels) { return take(static_cast<std::size_t>(channels) * cfg.t_embed_dim); };
    auto residual = [&](int c) {
        ResidualSlot r;
        r.first = conv(c, c, cfg.kernel);
        r.embed = embed(c);
        r.second = conv(c, c, cfg.kernel);
        return r;
    };

    L.stem = conv(1, cfg.channels(0), cfg.kernel);
    L.stem_embed = embed(cfg.channels(0));
    for (int s = 0; s < cfg.depth; ++s) {
        L.encoder.push_back(residual(cfg.channels(s)));
        L.down.push_back(conv(cfg.channels(s), cfg.channels(s + 1), cfg.stride));
        L.down_embed.push_back(embed(cfg.channels(s + 1)));
    }
    L.cond_proj = take(static_cast<std::size_t>(cfg.channels(cfg.depth)) * cfg.cond_dim);
    L.middle = residual(cfg.channels(cfg.depth));
    L.up.resize(cfg.depth);
    L.up_embed.resize(cfg.depth);
    L.decoder.resize(cfg.depth);
    for (int s = cfg.depth - 1; s >= 0; --s) {
        L.up[s] = conv(cfg.channels(s + 1), cfg.channels(s), cfg.stride);
        L.up_embed[s] = embed(cfg.channels(s));
        L.decoder[s] = residual(cfg.channels(s));
    }
    L.out = conv(cfg.channels(0), 1, cfg.kernel);
    L.embed_table = take(static_cast<std::size_t>(cfg.T) * cfg.t_embed_dim);
    L.total = off;
    return L;
}

namespace {

void fill_uniform(std::vector<double>& v, std::size_t at, std::size_t n, double bound, RngStream& rng) {
    for (std::size_t i = 0; i < n; ++i) v[at + i] = bound * (2.0 * rng.uniform() - 1.0);
}

void init_conv(std::vector<double>& v, const ConvSlot& s, int fan_in, RngStream& rng) {
    fill_uniform(v, s.weight, static_cast<std::size_t>(s.in_channels) * s.out_channels * s.kernel,
                 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
}

}  // namespace

DenoiserParams init_params(const DenoiserConfig& cfg, RngStream& rng) {
    DenoiserParams p;
    p.config = cfg;
    p.layout = ParamLayout::build(cfg);
    p.values.assign(p.layout.total, 0.0);
    auto& v = p.values;
    const auto& L = p.layout;
    const double embed_bound = 1.0 / std::sqrt(static_cast<double>(cfg.t_embed_dim));
    auto init_embed = [&](std::size_t at, int channels) {
        fill_uniform(v, at, static_cast<std::size_t>(channels) * cfg.t_embed_dim, embed_bound, rng);
    };
    auto init_res = [&](const ResidualSlot& r) {
        init_conv(v, r.first, r.first.in_channels * r.first.kernel, rng);
        init_embed(r.embed, r.first.out_channels);
        init_conv(v, r.second, r.second.in_channels * r.second.kernel, rng);
    };

    init_conv(v, L.stem, L.stem.kernel, rng);
    init_embed(L.stem_embed, L.stem.out_channels);
    for (int s = 0; s < cfg.depth; ++s) {
        init_res(L.encoder[s]);
        init_conv(v, L.down[s], L.down[s].in_channels * L.down[s].kernel, rng);
        init_embed(L.down_embed[s], L.down[s].out_channels);
    }
    fill_uniform(v, L.cond_proj, static_cast<std::size_t>(cfg.channels(cfg.depth)) * cfg.cond_dim,
                 1.0 / std::sqrt(static_cast<double>(cfg.cond_dim)), rng);
    init_res(L.middle);
    for (int s = cfg.depth - 1; s >= 0; --s) {
        init_conv(v, L.up[s], L.up[s].in_channels, rng);
        init_embed(L.up_embed[s], L.up[s].out_channels);
        init_res(L.decoder[s]);
    }
    init_conv(v, L.out, L.out.in_channels * L.out.kernel, rng);

    // Sinusoidal rows plus small normal jitter: the table is trained like
    // any other parameter, but rows start smooth in t so rarely drawn steps
    // still carry a usable noise-level signal.
    const int E = cfg.t_embed_dim;
    for (int t = 1; t <= cfg.T; ++t) {
        for (int e = 0; e < E; ++e) {
            const int pair = e / 2;
            const double freq = std::pow(static_cast<double>(cfg.T), -static_cast<double>(pair) / std::max(1, E / 2));
            const double angle = static_cast<double>(t) * freq;
            const double base = e % 2 == 0 ? std::sin(angle) : std::cos(angle);
            v[L.embed_table + static_cast<std::size_t>(t - 1) * E + e] = base + 0.01 * rng.gaussian();
        }
    }
    return p;
}

namespace {

struct Tensor {
    int C = 0;
    int L = 0;
    std::vector<double> d;

    Tensor() = default;
    Tensor(int c, int l) : C(c), L(l), d(static_cast<std::size_t>(c) * l, 0.0) {}
    double* ch(int c) { return d.data() + static_cast<std::size_t>(c) * L; }
    const double* ch(int c) const { return d.data() + static_cast<std::size_t>(c) * L; }
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor silu(const Tensor& x) {
    Tensor y(x.C, x.L);
    for (std::size_t i = 0; i < x.d.size(); ++i) y.d[i] = x.d[i] * sigmoid(x.d[i]);
    return y;
}

// d_pre = d_out * silu'(pre)
Tensor silu_backward(const Tensor& pre, const Tensor& d_out) {
    Tensor g(pre.C, pre.L);
    for (std::size_t i = 0; i < pre.d.size(); ++i) {
        const double s = sigmoid(pre.d[i]);
        g.d[i] = d_out.d[i] * s * (1.0 + pre.d[i] * (1.0 - s));
    }
    return g;
}

// Stride-1 convolution with zero "same" padding.
Tensor conv_same(const std::vector<double>& p, const ConvSlot& s, const Tensor& in) {
    Tensor out(s.out_channels, in.L);
    const int pad = (s.kernel - 1) / 2;
    const int L = in.L;
    for (int co = 0; co < s.out_channels; ++co) {
        double* y = out.ch(co);
        const double b = p[s.bias + co];
        for (int i = 0; i < L; ++i) y[i] = b;
        for (int ci = 0; ci < s.in_channels; ++ci) {
            const double* x = in.ch(ci);
            const double* w = p.data() + s.weight + (static_cast<std::size_t>(co) * s.in_channels + ci) * s.kernel;
            for (int j = 0; j < s.kernel; ++j) {
                const int off = j - pad;
                const int lo = std::max(0, -off), hi = std::min(L, L - off);
                const double wv = w[j];
                for (int i = lo; i < hi; ++i) y[i] += wv * x[i + off];
            }
        }
    }
    return out;
}

Tensor conv_same_backward(const std::vector<double>& p, std::vector<double>& g, const ConvSlot& s, const Tensor& in,
                          const Tensor& d_out) {
    Tensor d_in(in.C, in.L);
    const int pad = (s.kernel - 1) / 2;
    const int L = in.L;
    for (int co = 0; co < s.out_channels; ++co) {
        const double* dy = d_out.ch(co);
        double db = 0.0;
        for (int i = 0; i < L; ++i) db += dy[i];
        g[s.bias + co] += db;
        for (int ci = 0; ci < s.in_channels; ++ci) {
            const double* x = in.ch(ci);
            double* dx = d_in.ch(ci);
            const std::size_t w_at = s.weight + (static_cast<std::size_t>(co) * s.in_channels + ci) * s.kernel;
            for (int j = 0; j < s.kernel; ++j) {
                const int off = j - pad;
                const int lo = std::max(0, -off), hi = std::min(L, L - off);
                const double wv = p[w_at + j];
                double acc = 0.0;
                for (int i = lo; i < hi; ++i) {
                    acc += dy[i] * x[i + off];
                    dx[i + off] += wv * dy[i];
                }
                g[w_at + j] += acc;
            }
        }
    }
    return d_in;
}

// Kernel == stride, no padding: out[i] = b + sum w[j] * in[stride * i + j].
Tensor conv_down(const std::vector<double>& p, const ConvSlot& s, const Tensor& in) {
    const int S = s.kernel;
    Tensor out(s.out_channels, in.L / S);
    for (int co = 0; co < s.out_channels; ++co) {
        double* y = out.ch(co);
        for (int i = 0; i < out.L; ++i) y[i] = p[s.bias + co];
        for (int ci = 0; ci < s.in_channels; ++ci) {
            const double* x = in.ch(ci);
            const double* w = p.data() + s.weight + (static_cast<std::size_t>(co) * s.in_channels + ci) * S;
            for (int i = 0; i < out.L; ++i) {
                double acc = 0.0;
                for (int j = 0; j < S; ++j) acc += w[j] * x[S * i + j];
                y[i] += acc;
            }
        }
    }
    return out;
}

Tensor conv_down_backward(const std::vector<double>& p, std::vector<double>& g, const ConvSlot& s, const Tensor& in,
                          const Tensor& d_out) {
    const int S = s.kernel;
    Tensor d_in(in.C, in.L);
    for (int co = 0; co < s.out_channels; ++co) {
        const double* dy = d_out.ch(co);
        double db = 0.0;
        for (int i = 0; i < d_out.L; ++i) db += dy[i];
        g[s.bias + co] += db;
        for (int ci = 0; ci < s.in_channels; ++ci) {
            const double* x = in.ch(ci);
            double* dx = d_in.ch(ci);
            const std::size_t w_at = s.weight + (static_cast<std::size_t>(co) * s.in_channels + ci) * S;
            for (int j = 0; j < S; ++j) {
                const double wv = p[w_at + j];
                double acc = 0.0;
                for (int i = 0; i < d_out.L; ++i) {
                    acc += dy[i] * x[S * i + j];
                    dx[S * i + j] += wv * dy[i];
                }
                g[w_at + j] += acc;
            }
        }
    }
    return d_in;
}

// Transposed conv, kernel == stride: out[stride * i + j] = b + sum w[ci][co][j] * in[ci][i].
Tensor conv_up(const std::vector<double>& p, const ConvSlot& s, const Tensor& in) {
    const int S = s.kernel;
    Tensor out(s.out_channels, in.L * S);
    for (int co = 0; co < s.out_channels; ++co) {
        double* y = out.ch(co);
        for (int i = 0; i < out.L; ++i) y[i] = p[s.bias + co];
        for (int ci = 0; ci < s.in_channels; ++ci) {
            const double* x = in.ch(ci);
            const double* w = p.data() + s.weight + (static_cast<std::size_t>(ci) * s.out_channels + co) * S;
            for (int i = 0; i < in.L; ++i) {
                for (int j = 0; j < S; ++j) y[S * i + j] += w[j] * x[i];
            }
        }
    }
    return out;
}

Tensor conv_up_backward(const std::vector<double>& p, std::vector<double>& g, const ConvSlot& s, const Tensor& in,
                        const Tensor& d_out) {
    const int S = s.kernel;
    Tensor d_in(in.C, in.L);
    for (int co = 0; co < s.out_channels; ++co) {
        const double* dy = d_out.ch(co);
        double db = 0.0;
        for (int i = 0; i < d_out.L; ++i) db += dy[i];
        g[s.bias + co] += db;
        for (int ci = 0; ci < s.in_channels; ++ci) {
            const double* x = in.ch(ci);
            double* dx = d_in.ch(ci);
            const std::size_t w_at = s.weight + (static_cast<std::size_t>(ci) * s.out_channels + co) * S;
            for (int j = 0; j < S; ++j) {
                const double wv = p[w_at + j];
                double acc = 0.0;
                for (int i = 0; i < in.L; ++i) {
                    acc += x[i] * dy[S * i + j];
                    dx[i] += wv * dy[S * i + j];
                }
                g[w_at + j] += acc;
            }
        }
    }
    return d_in;
}

void add_embed(const std::vector<double>& p, std::size_t at, std::span<const double> emb, Tensor& h) {
    const int E = static_cast<int>(emb.size());
    for (int c = 0; c < h.C; ++c) {
        double v = 0.0;
        for (int e = 0; e < E; ++e) v += p[at + static_cast<std::size_t>(c) * E + e] * emb[e];
        double* row = h.ch(c);
        for (int i = 0; i < h.L; ++i) row[i] += v;
    }
}

void add_embed_backward(const std::vector<double>& p, std::vector<double>& g, std::size_t at,
                        std::span<const double> emb, std::span<double> d_emb, const Tensor& d_h) {
    const int E = static_cast<int>(emb.size());
    for (int c = 0; c < d_h.C; ++c) {
        const double* row = d_h.ch(c);
        double s = 0.0;
        for (int i = 0; i < d_h.L; ++i) s += row[i];
        for (int e = 0; e < E; ++e) {
            g[at + static_cast<std::size_t>(c) * E + e] += s * emb[e];
            d_emb[e] += p[at + static_cast<std::size_t>(c) * E + e] * s;
        }
    }
}

void add_cond(const std::vector<double>& p, std::size_t at, const BottleneckCond& cond, Tensor& h) {
    const int D = cond.dim;
    for (int c = 0; c < h.C; ++c) {
        const double* w = p.data() + at + static_cast<std::size_t>(c) * D;
        double* row = h.ch(c);
        for (int i = 0; i < h.L; ++i) {
            const double* f = cond.row(i);
            double v = 0.0;
            for (int d = 0; d < D; ++d) v += w[d] * f[d];
            row[i] += v;
        }
    }
}

void add_cond_backward(std::vector<double>& g, std::size_t at, const BottleneckCond& cond, const Tensor& d_h) {
    const int D = cond.dim;
    for (int c = 0; c < d_h.C; ++c) {
        const double* row = d_h.ch(c);
        double* gw = g.data() + at + static_cast<std::size_t>(c) * D;
        for (int i = 0; i < d_h.L; ++i) {
            const double* f = cond.row(i);
            for (int d = 0; d < D; ++d) gw[d] += row[i] * f[d];
        }
    }
}

void add_into(Tensor& a, const Tensor& b) {
    for (std::size_t i = 0; i < a.d.size(); ++i) a.d[i] += b.d[i];
}

struct ResidualCache {
    Tensor in, act_in, pre_second, act_second;
};

Tensor residual_forward(const std::vector<double>& p, const ResidualSlot& r, std::span<const double> emb,
                        const Tensor& in, ResidualCache& cache) {
    cache.in = in;
    cache.act_in = silu(in);
    cache.pre_second = conv_same(p, r.first, cache.act_in);
    add_embed(p, r.embed, emb, cache.pre_second);
    cache.act_second = silu(cache.pre_second);
    Tensor out = conv_same(p, r.second, cache.act_second);
    add_into(out, in);
    return out;
}

Tensor residual_backward(const std::vector<double>& p, std::vector<double>& g, const ResidualSlot& r,
                         std::span<const double> emb, std::span<double> d_emb, const ResidualCache& cache,
                         const Tensor& d_out) {
    const Tensor d_act_second = conv_same_backward(p, g, r.second, cache.act_second, d_out);
    const Tensor d_pre_second = silu_backward(cache.pre_second, d_act_second);
    add_embed_backward(p, g, r.embed, emb, d_emb, d_pre_second);
    const Tensor d_act_in = conv_same_backward(p, g, r.first, cache.act_in, d_pre_second);
    Tensor d_in = silu_backward(cache.in, d_act_in);
    add_into(d_in, d_out);
    return d_in;
}

struct ForwardCache {
    Tensor x;
    std::vector<ResidualCache> encoder;
    std::vector<Tensor> skip;
    ResidualCache middle;
    std::vector<Tensor> up_in;
    std::vector<ResidualCache> decoder;
    Tensor out_pre, out_act;
};

std::span<const double> embedding_row(const DenoiserParams& params, int t) {
    const auto& cfg = params.config;
    if (t < 1 || t > cfg.T) throw std::out_of_range("denoiser: step " + std::to_string(t) + " outside 1..T");
    return std::span(params.values).subspan(params.layout.embed_table + static_cast<std::size_t>(t - 1) * cfg.t_embed_dim,
                                            cfg.t_embed_dim);
}

void check_cond(const DenoiserParams& params, const BottleneckCond* cond, int bottleneck_len) {
    if (!cond) return;
    if (cond->dim != params.config.cond_dim) {
        throw std::invalid_argument("denoiser: conditioning dim " + std::to_string(cond->dim) + " != cond_dim " +
                                    std::to_string(params.config.cond_dim));
    }
    if (cond->n_rows != bottleneck_len) {
        throw std::invalid_argument("denoiser: conditioning rows " + std::to_string(cond->n_rows) +
                                    " != bottleneck length " + std::to_string(bottleneck_len));
    }
}

Tensor run_forward(const DenoiserParams& params, std::span<const double> x, int t, const BottleneckCond* cond,
                   ForwardCache& c) {
    const auto& cfg = params.config;
    const auto& L = params.layout;
    const auto& p = params.values;
    const int len = static_cast<int>(x.size());
    if (len == 0 || len % cfg.length_multiple() != 0) {
        throw std::invalid_argument("denoiser: length " + std::to_string(len) + " is not a positive multiple of " +
                                    std::to_string(cfg.length_multiple()));
    }
    check_cond(params, cond, len / cfg.length_multiple());
    const auto emb = embedding_row(params, t);

    c.x = Tensor(1, len);
    std::copy(x.begin(), x.end(), c.x.d.begin());
    Tensor h = conv_same(p, L.stem, c.x);
    add_embed(p, L.stem_embed, emb, h);

    c.encoder.resize(cfg.depth);
    c.skip.resize(cfg.depth);
    for (int s = 0; s < cfg.depth; ++s) {
        h = residual_forward(p, L.encoder[s], emb, h, c.encoder[s]);
        c.skip[s] = h;
        h = conv_down(p, L.down[s], h);
        add_embed(p, L.down_embed[s], emb, h);
    }
    if (cond) add_cond(p, L.cond_proj, *cond, h);
    h = residual_forward(p, L.middle, emb, h, c.middle);

    c.up_in.resize(cfg.depth);
    c.decoder.resize(cfg.depth);
    for (int s = cfg.depth - 1; s >= 0; --s) {
        c.up_in[s] = h;
        h = conv_up(p, L.up[s], h);
        add_embed(p, L.up_embed[s], emb, h);
        add_into(h, c.skip[s]);
        h = residual_forward(p, L.decoder[s], emb, h, c.decoder[s]);
    }
    c.out_pre = h;
    c.out_act = silu(h);
    return conv_same(p, L.out, c.out_act);
}

void run_backward(const DenoiserParams& params, int t, const BottleneckCond* cond, const ForwardCache& c,
                  const Tensor& d_y, std::vector<double>& g) {
    const auto& cfg = params.config;
    const auto& L = params.layout;
    const auto& p = params.values;
    const auto emb = embedding_row(params, t);
    std::vector<double> d_emb(cfg.t_embed_dim, 0.0);

    Tensor d_h = silu_backward(c.out_pre, conv_same_backward(p, g, L.out, c.out_act, d_y));
    std::vector<Tensor> d_skip(cfg.depth);
    for (int s = 0; s < cfg.depth; ++s) {
        d_h = residual_backward(p, g, L.decoder[s], emb, d_emb, c.decoder[s], d_h);
        d_skip[s] = d_h;
        add_embed_backward(p, g, L.up_embed[s], emb, d_emb, d_h);
        d_h = conv_up_backward(p, g, L.up[s], c.up_in[s], d_h);
    }
    d_h = residual_backward(p, g, L.middle, emb, d_emb, c.middle, d_h);
    if (cond) add_cond_backward(g, L.cond_proj, *cond, d_h);
    for (int s = cfg.depth - 1; s >= 0; --s) {
        add_embed_backward(p, g, L.down_embed[s], emb, d_emb, d_h);
        d_h = conv_down_backward(p, g, L.down[s], c.skip[s], d_h);
        add_into(d_h, d_skip[s]);
        d_h = residual_backward(p, g, L.encoder[s], emb, d_emb, c.encoder[s], d_h);
    }
    add_embed_backward(p, g, L.stem_embed, emb, d_emb, d_h);
    conv_same_backward(p, g, L.stem, c.x, d_h);

    const std::size_t row = L.embed_table + static_cast<std::size_t>(t - 1) * cfg.t_embed_dim;
    for (int e = 0; e < cfg.t_embed_dim; ++e) g[row + e] += d_emb[e];
}

}  // namespace

std::vector<double> forward_bottleneck(const DenoiserParams& params, std::span<const double> x_t, int t,
                                       const BottleneckCond* cond) {
    ForwardCache cache;
    return run_forward(params, x_t, t, cond, cache).d;
}

std::vector<double> forward(const DenoiserParams& params, std::span<const double> x_t, int t,
                            const ConditioningFrames* cond) {
    const int multiple = params.config.length_multiple();
    const std::size_t n = x_t.size();
    if (n == 0) return {};
    const std::size_t padded = (n + multiple - 1) / multiple * multiple;
    const std::size_t left = (padded - n) / 2;
    std::vector<double> x(padded, 0.0);
    std::copy(x_t.begin(), x_t.end(), x.begin() + static_cast<long>(left));

    std::vector<double> y;
    if (cond) {
        if (cond->dim != params.config.cond_dim) throw std::invalid_argument("denoiser: conditioning dim mismatch");
        const auto up = upsample_linear(*cond, static_cast<int>(padded / multiple));
        y = forward_bottleneck(params, x, t, &up);
    } else {
        y = forward_bottleneck(params, x, t, nullptr);
    }
    return {y.begin() + static_cast<long>(left), y.begin() + static_cast<long>(left + n)};
}

namespace {

double accumulate_batch(const DenoiserParams& params, std::span<const TrainingExample> batch, std::vector<double>* grad) {
    if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& ex = batch[b];
        if (ex.eps.size() != ex.x_t.size()) throw std::invalid_argument("loss_and_grad: eps length mismatch");
        ForwardCache cache;
        const Tensor y = run_forward(params, ex.x_t, ex.t, ex.cond, cache);
        const double inv_len = 1.0 / static_cast<double>(ex.x_t.size());
        double sq = 0.0;
        Tensor d_y(1, y.L);
        for (int i = 0; i < y.L; ++i) {
            const double r = y.d[i] - ex.eps[i];
            if (!std::isfinite(r)) {
                throw DataError("denoiser: non-finite output at example " + std::to_string(b) + ", t=" +
                                std::to_string(ex.t) + ", position " + std::to_string(i));
            }
            sq += r * r;
            d_y.d[i] = 2.0 * r * inv_len * inv_batch;
        }
        loss += sq * inv_len * inv_batch;
        if (grad) run_backward(params, ex.t, ex.cond, cache, d_y, *grad);
    }
    return loss;
}

}  // namespace

LossAndGrad loss_and_grad(const DenoiserParams& params, std::span<const TrainingExample> batch) {
    LossAndGrad out;
    out.grad.assign(params.values.size(), 0.0);
    out.loss = accumulate_batch(params, batch, &out.grad);
    return out;
}

double loss_only(const DenoiserParams& params, std::span<const TrainingExample> batch) {
    return accumulate_batch(params, batch, nullptr);
}

AdamState AdamState::for_params(std::size_t n, double lr) {
    AdamState s;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    s.lr = lr;
    return s;
}

void adam_update(std::vector<double>& params, AdamState& opt, std::span<const double> grad) {
    if (grad.size() != params.size() || opt.m.size() != params.size() || opt.v.size() != params.size()) {
        throw std::invalid_argument("adam_update: shape mismatch");
    }
    ++opt.step;
    const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * grad[i];
        opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
        const double m_hat = opt.m[i] / c1;
        const double v_hat = opt.v[i] / c2;
        params[i] -= opt.lr * m_hat / (std::sqrt(v_hat) + opt.epsilon);
    }
}

}  // namespace mbd
