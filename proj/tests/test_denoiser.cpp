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


#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <vector>

#include "grad_check.hpp"
#include "mbd/denoiser.hpp"
#include "test_util.hpp"

using namespace mbd;
using namespace mbd::testing;

namespace {

DenoiserParams perturbed(const DenoiserConfig& cfg, std::uint64_t seed) {
    RngStream rng(seed);
    auto p = init_params(cfg, rng);
    // Nonzero biases so every path carries gradient.
    for (auto& v : p.values) v += 0.1 * rng.gaussian();
    return p;
}

}  // namespace

TEST_CASE("parameter count follows the layer shapes") {
    // Shape arithmetic: stem, per-stage residual + down conv + embeddings,
    // bottleneck projection and residual, mirrored decoder, output conv,
    // embedding table.
    RngStream rng(0);
    CHECK(init_params(DenoiserConfig{}, rng).size() == 245825);
    DenoiserConfig narrow;
    narrow.base_channels = 4;
    CHECK(ParamLayout::build(narrow).total == 75809);
    CHECK(ParamLayout::build(toy_config()).total == 361);
}

TEST_CASE("initialization is seeded") {
    RngStream a(3), b(3), c(4);
    const auto p = init_params(DenoiserConfig{}, a);
    CHECK(p.values == init_params(DenoiserConfig{}, b).values);
    CHECK(p.values != init_params(DenoiserConfig{}, c).values);
}

TEST_CASE("fresh network on zero input is finite") {
    RngStream rng(1);
    const auto p = init_params(DenoiserConfig{}, rng);
    const auto y = forward(p, std::vector<double>(256, 0.0), 500, nullptr);
    for (double v : y) CHECK(std::isfinite(v));
}

TEST_CASE("output length matches input length") {
    RngStream rng(2);
    const auto p = init_params(DenoiserConfig{}, rng);
    for (std::size_t n : {64u, 256u, 1000u, 37u}) {
        CHECK(forward(p, rng.gaussian_vector(n), 10, nullptr).size() == n);
    }
}

TEST_CASE("zero conditioning equals no conditioning") {
    const auto p = perturbed(DenoiserConfig{}, 5);
    RngStream rng(6);
    const auto x = rng.gaussian_vector(256);
    ConditioningFrames zeros(3, 16);
    CHECK(forward(p, x, 100, nullptr) == forward(p, x, 100, &zeros));
    ConditioningFrames ones(3, 16);
    for (auto& v : ones.values) v = 1.0;
    CHECK(forward(p, x, 100, nullptr) != forward(p, x, 100, &ones));
}

TEST_CASE("the timestep changes the output") {
    RngStream rng(7);
    const auto p = init_params(DenoiserConfig{}, rng);
    const auto x = rng.gaussian_vector(128);
    const auto a = forward(p, x, 1, nullptr), b = forward(p, x, 1000, nullptr);
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(std::sqrt(d) > 1e-6);
}

TEST_CASE("a target equal to the prediction gives zero loss and gradient") {
    const auto cfg = toy_config();
    const auto p = perturbed(cfg, 8);
    RngStream rng(9);
    auto b = toy_batch(cfg, rng, 2);
    attach_cond(b);
    for (auto& e : b.examples) e.eps = forward_bottleneck(p, e.x_t, e.t, e.cond);
    const auto lg = loss_and_grad(p, b.examples);
    CHECK(lg.loss == 0.0);
    for (double g : lg.grad) CHECK(g == 0.0);
}

TEST_CASE("analytic gradients match central differences") {
    const auto cfg = toy_config();
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        const auto p = perturbed(cfg, seed);
        RngStream rng(seed + 100);
        auto b = toy_batch(cfg, rng, 3);
        attach_cond(b);
        const auto r = gradient_check(p, b.examples);
        CAPTURE(seed);
        CAPTURE(r.worst_index);
        CHECK(r.worst_relative_error < 1e-4);
    }
    // Also without conditioning, where the projection receives no gradient.
    const auto p = perturbed(cfg, 14);
    RngStream rng(15);
    auto b = toy_batch(cfg, rng, 2);
    CHECK(gradient_check(p, b.examples).worst_relative_error < 1e-4);
    const auto lg = loss_and_grad(p, b.examples);
    for (int i = 0; i < cfg.channels(1) * cfg.cond_dim; ++i) CHECK(lg.grad[p.layout.cond_proj + i] == 0.0);
}

TEST_CASE("duplicating the batch leaves loss and gradient unchanged") {
    const auto cfg = toy_config();
    const auto p = perturbed(cfg, 16);
    RngStream rng(17);
    auto b = toy_batch(cfg, rng, 3);
    attach_cond(b);
    auto doubled = b.examples;
    doubled.insert(doubled.end(), b.examples.begin(), b.examples.end());
    const auto one = loss_and_grad(p, b.examples), two = loss_and_grad(p, doubled);
    CHECK(two.loss == doctest::Approx(one.loss).epsilon(1e-12));
    for (std::size_t i = 0; i < one.grad.size(); ++i) {
        CHECK(two.grad[i] == doctest::Approx(one.grad[i]).epsilon(1e-10).scale(1e-12));
    }
}

TEST_CASE("non-finite outputs are reported") {
    const auto cfg = toy_config();
    auto p = perturbed(cfg, 18);
    p.values[p.layout.out.bias] = std::numeric_limits<double>::quiet_NaN();
    RngStream rng(19);
    auto b = toy_batch(cfg, rng, 1);
    CHECK_THROWS_AS(loss_and_grad(p, b.examples), DataError);
}

TEST_CASE("adam updates") {
    SUBCASE("zero gradient leaves parameters alone") {
        std::vector<double> params{0.5, -1.0, 2.0};
        auto opt = AdamState::for_params(3, 0.01);
        adam_update(params, opt, std::vector<double>(3, 0.0));
        CHECK(params == std::vector<double>{0.5, -1.0, 2.0});
    }
    SUBCASE("first step moves by the learning rate") {
        std::vector<double> params{1.0};
        auto opt = AdamState::for_params(1, 0.1);
        adam_update(params, opt, std::vector<double>{1.0});
        CHECK(1.0 - params[0] == doctest::Approx(0.1).epsilon(1e-6));
        CHECK(opt.step == 1);
    }
    SUBCASE("a tiny network overfits a fixed batch") {
        const auto cfg = toy_config();
        RngStream rng(20);
        auto p = init_params(cfg, rng);
        auto b = toy_batch(cfg, rng, 1);
        attach_cond(b);
        auto opt = AdamState::for_params(p.size(), 1e-2);
        const double first = loss_only(p, b.examples);
        for (int i = 0; i < 200; ++i) adam_update(p.values, opt, loss_and_grad(p, b.examples).grad);
        CHECK(loss_only(p, b.examples) <= 0.5 * first);
    }
}

TEST_CASE("checkpoints round trip and reject damage") {
    TempDir dir("ckpt");
    const auto cfg = toy_config();
    Checkpoint ck{perturbed(cfg, 21), AdamState::for_params(ParamLayout::build(cfg).total, 3e-3)};
    ck.optimizer.step = 17;
    ck.optimizer.m[3] = 0.25;
    save_checkpoint(ck, dir / "a.ckpt");
    const auto back = load_checkpoint(dir / "a.ckpt");
    CHECK(back.params.config == cfg);
    CHECK(back.params.values == ck.params.values);
    CHECK(back.optimizer.step == 17);
    CHECK(back.optimizer.m == ck.optimizer.m);
    CHECK(back.optimizer.lr == 3e-3);

    std::ifstream in(dir / "a.ckpt", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    {
        std::ofstream out(dir / "short.ckpt", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), DataError);
    bytes[0] = 'X';
    {
        std::ofstream out(dir / "magic.ckpt", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "magic.ckpt"), DataError);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), DataError);
}

TEST_CASE("config json round trip and validation") {
    DenoiserConfig c;
    c.depth = 3;
    c.cond_dim = 7;
    CHECK(denoiser_config_from_json(to_json(c)) == c);
    c.stride = 2;
    CHECK_THROWS(c.validate());
    DenoiserConfig k;
    k.kernel = 4;
    CHECK_THROWS(k.validate());
}
